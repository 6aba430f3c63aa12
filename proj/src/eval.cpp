#include "tmpose/eval.hpp"

#include "tmpose/error.hpp"
#include "tmpose/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace tmpose {

double add_error(const TriangleMesh& mesh, const Pose& est, const Pose& gt) {
    if (mesh.vertices.empty()) throw DegenerateInput("add_error: mesh has no vertices");
    double sum = 0.0;
    for (const auto& v : mesh.vertices) sum += (gt.apply(v) - est.apply(v)).norm();
    return sum / static_cast<double>(mesh.vertices.size());
}

double adi_error(const TriangleMesh& mesh, const Pose& est, const Pose& gt) {
    if (mesh.vertices.empty()) throw DegenerateInput("adi_error: mesh has no vertices");
    std::vector<Vec3> moved;
    moved.reserve(mesh.vertices.size());
    for (const auto& v : mesh.vertices) moved.push_back(est.apply(v));
    const KdTree tree(std::move(moved));
    double sum = 0.0;
    for (const auto& v : mesh.vertices) sum += std::sqrt(tree.nearest(gt.apply(v)).sq_dist);
    return sum / static_cast<double>(mesh.vertices.size());
}

void finalize_counts(PrfCounts& c) {
    c.precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
    c.recall = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
    c.f1 = (c.precision + c.recall) > 0.0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
}

EvalReport evaluate(const std::vector<Detection>& detections, const std::vector<SceneInstance>& truth,
                    const std::map<std::string, EvalObject>& objects, double k_m) {
    auto object = [&](const std::string& id) -> const EvalObject& {
        auto it = objects.find(id);
        if (it == objects.end() || it->second.mesh == nullptr) throw Error("evaluate: unknown object " + id);
        return it->second;
    };

    struct Candidate {
        double m;
        int det;
        int gt;
        double add;
        double adi;
    };
    std::vector<Candidate> cands;
    for (std::size_t d = 0; d < detections.size(); ++d) {
        const EvalObject& obj = object(detections[d].object_id);
        for (std::size_t g = 0; g < truth.size(); ++g) {
            if (truth[g].object_id != detections[d].object_id) continue;
            const double add = add_error(*obj.mesh, detections[d].pose, truth[g].pose);
            const double adi = adi_error(*obj.mesh, detections[d].pose, truth[g].pose);
            cands.push_back({obj.symmetric ? adi : add, static_cast<int>(d), static_cast<int>(g), add, adi});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(a.m, a.det, a.gt) < std::tie(b.m, b.det, b.gt);
    });

    EvalReport report;
    report.k_m = k_m;
    report.detections.resize(detections.size());
    for (std::size_t d = 0; d < detections.size(); ++d) report.detections[d].object_id = detections[d].object_id;
    std::vector<char> gt_used(truth.size(), 0);
    std::vector<char> gt_hit(truth.size(), 0);
    for (const auto& c : cands) {
        auto& res = report.detections[static_cast<std::size_t>(c.det)];
        if (res.matched_gt || gt_used[static_cast<std::size_t>(c.gt)]) continue;
        gt_used[static_cast<std::size_t>(c.gt)] = 1;
        res.matched_gt = c.gt;
        res.add = c.add;
        res.adi = c.adi;
        res.correct = is_correct(c.m, object(res.object_id).diameter, k_m);
        if (res.correct) gt_hit[static_cast<std::size_t>(c.gt)] = 1;
    }

    for (const auto& t : truth) report.per_object[t.object_id];
    for (const auto& res : report.detections) {
        PrfCounts& c = report.per_object[res.object_id];
        if (res.correct) {
            ++c.tp;
        } else {
            ++c.fp;
        }
    }
    for (std::size_t g = 0; g < truth.size(); ++g) {
        if (!gt_hit[g]) ++report.per_object[truth[g].object_id].fn;
    }
    for (auto& [id, c] : report.per_object) {
        finalize_counts(c);
        report.micro.tp += c.tp;
        report.micro.fp += c.fp;
        report.micro.fn += c.fn;
    }
    finalize_counts(report.micro);
    return report;
}

}  // namespace tmpose
