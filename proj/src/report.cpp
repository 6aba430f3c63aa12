#include "tmpose/report.hpp"

#include "tmpose/error.hpp"

#include <json.hpp>

#include <cstdio>

namespace tmpose {

namespace {

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Match: return "match";
        case Stage::Cluster: return "cluster";
        case Stage::Filter: return "filter";
        case Stage::Score: return "score";
        case Stage::Nms: return "nms";
        case Stage::Full: return "full";
    }
    return "full";
}

nlohmann::json rotation_json(const Mat3& r) {
    nlohmann::json out = nlohmann::json::array();
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) out.push_back(r(a, b));
    }
    return out;
}

nlohmann::json counts_json(const PrfCounts& c) {
    return {{"tp", c.tp},       {"fp", c.fp},         {"fn", c.fn},
            {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}};
}

}  // namespace

std::string detections_to_json(const DetectResult& result, Stage stage) {
    nlohmann::json dets = nlohmann::json::array();
    for (const auto& d : result.detections) {
        nlohmann::json j = {
            {"object_id", d.object_id},   {"r_obj", d.position.row},        {"c_obj", d.position.col},
            {"d", d.distance},            {"gamma", d.gamma},               {"alpha", d.alpha},
            {"beta", d.beta},             {"member_count", d.member_count}, {"refined", d.refined},
        };
        if (d.refined) {
            const Vec3& t = d.pose.translation;
            j["R"] = rotation_json(d.pose.rotation);
            j["t"] = {t.x(), t.y(), t.z()};
            j["fitness"] = d.fitness;
            j["inlier_fraction"] = d.inlier_fraction;
            j["phi"] = d.phi;
            j["no_correspondences"] = d.no_correspondences;
        }
        dets.push_back(std::move(j));
    }
    const StageCounts& c = result.counts;
    const nlohmann::json out = {
        {"stage", stage_name(stage)},
        {"nms_radius", result.nms_radius},
        {"counts",
         {{"matches", c.matches},
          {"clusters", c.clusters},
          {"filtered", c.filtered},
          {"scored", c.scored},
          {"after_nms", c.after_nms},
          {"refined", c.refined},
          {"accepted", c.accepted}}},
        {"detections", dets},
    };
    return out.dump(2) + "\n";
}

std::vector<Detection> detections_from_json(const std::string& text) {
    std::vector<Detection> out;
    try {
        const auto j = nlohmann::json::parse(text);
        for (const auto& d : j.at("detections")) {
            if (!d.contains("R")) throw ConfigError("detection without a pose (was detect stopped early?)");
            Detection det;
            det.object_id = d.at("object_id").get<std::string>();
            const auto r = d.at("R").get<std::vector<double>>();
            const auto t = d.at("t").get<std::vector<double>>();
            if (r.size() != 9 || t.size() != 3) throw ConfigError("detection R needs 9 values and t needs 3");
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) det.pose.rotation(a, b) = r[static_cast<std::size_t>(3 * a + b)];
            }
            det.pose.translation = Vec3(t[0], t[1], t[2]);
            out.push_back(std::move(det));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("detections JSON: ") + e.what());
    }
    return out;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json per_object = nlohmann::json::object();
    for (const auto& [id, c] : report.per_object) per_object[id] = counts_json(c);
    nlohmann::json dets = nlohmann::json::array();
    for (const auto& d : report.detections) {
        dets.push_back({{"object_id", d.object_id},
                        {"matched_gt", d.matched_gt ? nlohmann::json(*d.matched_gt) : nlohmann::json(nullptr)},
                        {"add", d.add},
                        {"adi", d.adi},
                        {"correct", d.correct}});
    }
    const nlohmann::json out = {
        {"k_m", report.k_m},
        {"per_object", per_object},
        {"micro", counts_json(report.micro)},
        {"detections", dets},
    };
    return out.dump(2) + "\n";
}

std::string report_to_table(const EvalReport& report) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%-16s %5s %5s %5s %9s %9s %9s\n", "object", "TP", "FP", "FN", "precision",
                  "recall", "F1");
    out += line;
    auto row = [&](const std::string& name, const PrfCounts& c) {
        std::snprintf(line, sizeof line, "%-16s %5d %5d %5d %9.4f %9.4f %9.4f\n", name.c_str(), c.tp, c.fp, c.fn,
                      c.precision, c.recall, c.f1);
        out += line;
    };
    for (const auto& [id, c] : report.per_object) row(id, c);
    row("(micro)", report.micro);
    return out;
}

}  // namespace tmpose
