#include "tmpose/detection.hpp"

#include "tmpose/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <unordered_map>

namespace tmpose {

namespace {

long floor_div(int value, int step) {
    return static_cast<long>(std::floor(static_cast<double>(value) / step));
}

}  // namespace

std::vector<Hypothesis> cluster_matches(const std::vector<Match>& matches, int s_im) {
    if (s_im < 1) throw DegenerateInput("cluster_matches: s_im must be >= 1");
    using Key = std::tuple<std::string, long, long, double>;
    std::map<Key, std::size_t> index;
    std::vector<Hypothesis> out;
    for (const auto& m : matches) {
        Key key{m.object_id, floor_div(m.row, s_im), floor_div(m.col, s_im), m.train_distance};
        auto [it, inserted] = index.emplace(key, out.size());
        if (inserted) {
            Hypothesis h;
            h.object_id = m.object_id;
            h.train_distance = m.train_distance;
            out.push_back(std::move(h));
        }
        out[it->second].members.push_back(m);
    }
    for (auto& h : out) {
        double r = 0.0;
        double c = 0.0;
        for (const auto& m : h.members) {
            r += m.row;
            c += m.col;
        }
        const auto n = static_cast<double>(h.members.size());
        h.position = {r / n, c / n};
    }
    return out;
}

std::vector<Hypothesis> filter_clusters(const std::vector<Hypothesis>& hyps, int min_cluster_size) {
    if (min_cluster_size < 1) throw DegenerateInput("filter_clusters: min_cluster_size must be >= 1");
    std::vector<Hypothesis> out;
    for (const auto& h : hyps) {
        if (static_cast<int>(h.members.size()) >= min_cluster_size) out.push_back(h);
    }
    return out;
}

TemplateView render_template_view(const TriangleMesh& mesh, const CameraIntrinsics& cam,
                                  const NormalOptions& normal_options, const Template& tpl) {
    const RenderResult full = render_depth(mesh, cam, tpl.train_pose);
    const NormalMap normals = normals_from_depth(full.depth, cam, normal_options);
    TemplateView v;
    v.depth = DepthImage(tpl.cols, tpl.rows, 0.0);
    v.normals = NormalMap(tpl.cols, tpl.rows);
    for (int r = 0; r < tpl.rows; ++r) {
        for (int c = 0; c < tpl.cols; ++c) {
            const int sr = r + tpl.offset_row;
            const int sc = c + tpl.offset_col;
            if (!full.depth.contains(sr, sc)) continue;
            v.depth.at(r, c) = full.depth.at(sr, sc);
            if (normals.is_valid(sr, sc)) v.normals.set(r, c, normals.at(sr, sc));
        }
    }
    return v;
}

MeshTemplateRenderer::MeshTemplateRenderer(std::map<std::string, const TriangleMesh*> meshes, CameraIntrinsics cam,
                                           NormalOptions normal_options)
    : meshes_(std::move(meshes)), cam_(cam), normal_options_(normal_options) {}

const TriangleMesh& MeshTemplateRenderer::mesh(const std::string& object_id) const {
    auto it = meshes_.find(object_id);
    if (it == meshes_.end() || it->second == nullptr) throw Error("no mesh for object " + object_id);
    return *it->second;
}

std::shared_ptr<const TemplateView> MeshTemplateRenderer::view(const Template& tpl, int template_index) const {
    const auto key = std::make_pair(tpl.object_id, template_index);
    {
        std::lock_guard lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    auto v = std::make_shared<const TemplateView>(render_template_view(mesh(tpl.object_id), cam_, normal_options_, tpl));
    std::lock_guard lock(mutex_);
    return cache_.emplace(key, std::move(v)).first->second;
}

Hypothesis score_hypothesis(const Hypothesis& hyp, const DepthImage& scene_depth, const NormalMap& scene_normals,
                            const TemplateStore& store, const TemplateViewSource& views) {
    const ObjectTemplates* obj = store.find(hyp.object_id);
    if (!obj) throw Error("score_hypothesis: unknown object " + hyp.object_id);

    const int top = static_cast<int>(std::lround(hyp.position.row));
    const int left = static_cast<int>(std::lround(hyp.position.col));

    double eps_sum = 0.0;
    double theta_sum = 0.0;
    int eps_members = 0;
    int theta_members = 0;
    for (const auto& m : hyp.members) {
        if (m.template_index < 0 || m.template_index >= static_cast<int>(obj->templates.size())) {
            throw Error("score_hypothesis: template index out of range");
        }
        const Template& tpl = obj->templates[static_cast<std::size_t>(m.template_index)];
        const auto view = views.view(tpl, m.template_index);

        double depth_diff = 0.0;
        double angle_diff = 0.0;
        std::size_t depth_pairs = 0;
        std::size_t normal_pairs = 0;
        for (int r = 0; r < tpl.rows; ++r) {
            for (int c = 0; c < tpl.cols; ++c) {
                const int sr = top + r;
                const int sc = left + c;
                if (!scene_depth.contains(sr, sc)) continue;
                const double td = view->depth.at(r, c);
                const double sd = scene_depth.at(sr, sc);
                if (td > 0.0 && sd > 0.0) {
                    depth_diff += std::abs(td - sd);
                    ++depth_pairs;
                }
                if (view->normals.is_valid(r, c) && scene_normals.is_valid(sr, sc)) {
                    // atan2 form: identical normals give exactly zero.
                    const Vec3& a = view->normals.at(r, c);
                    const Vec3& b = scene_normals.at(sr, sc);
                    angle_diff += std::atan2(a.cross(b).norm(), a.dot(b));
                    ++normal_pairs;
                }
            }
        }
        if (depth_pairs > 0) {
            eps_sum += depth_diff / static_cast<double>(depth_pairs);
            ++eps_members;
        }
        if (normal_pairs > 0) {
            theta_sum += angle_diff / static_cast<double>(normal_pairs);
            ++theta_members;
        }
    }

    Hypothesis out = hyp;
    out.scored = true;
    if (eps_members == 0 || theta_members == 0) {
        out.no_valid_pairs = true;
        out.alpha = out.beta = out.score = 0.0;
        return out;
    }
    out.no_valid_pairs = false;
    out.alpha = std::exp(-(eps_sum / eps_members));
    out.beta = std::exp(-(theta_sum / theta_members));
    out.score = out.alpha * out.beta;
    return out;
}

bool nms_better(const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.train_distance != b.train_distance) return a.train_distance < b.train_distance;
    if (a.position.row != b.position.row) return a.position.row < b.position.row;
    return a.position.col < b.position.col;
}

std::vector<Hypothesis> nms(const std::vector<Hypothesis>& hyps, double radius) {
    if (!(radius > 0.0)) throw DegenerateInput("nms: radius must be > 0");
    // Bucket by (object, cell) with cell side = radius; neighbours lie in the
    // 3x3 block of cells around a hypothesis.
    using CellKey = std::tuple<std::string, long, long>;
    std::map<CellKey, std::vector<std::size_t>> grid;
    auto cell_of = [&](double v) { return static_cast<long>(std::floor(v / radius)); };
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        grid[{hyps[i].object_id, cell_of(hyps[i].position.row), cell_of(hyps[i].position.col)}].push_back(i);
    }
    const double r2 = radius * radius;
    std::vector<Hypothesis> out;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        const auto& h = hyps[i];
        const long cr = cell_of(h.position.row);
        const long cc = cell_of(h.position.col);
        bool suppressed = false;
        for (long dr = -1; dr <= 1 && !suppressed; ++dr) {
            for (long dc = -1; dc <= 1 && !suppressed; ++dc) {
                auto it = grid.find({h.object_id, cr + dr, cc + dc});
                if (it == grid.end()) continue;
                for (std::size_t j : it->second) {
                    if (j == i) continue;
                    const double er = hyps[j].position.row - h.position.row;
                    const double ec = hyps[j].position.col - h.position.col;
                    if (er * er + ec * ec <= r2 && nms_better(hyps[j], h)) {
                        suppressed = true;
                        break;
                    }
                }
            }
        }
        if (!suppressed) out.push_back(h);
    }
    return out;
}

}  // namespace tmpose
