#include "tmpose/verify.hpp"

#include "tmpose/error.hpp"

#include <cmath>
#include <limits>

namespace tmpose {

Vec3 SceneOctree::root_center() const {
    return origin_ + Vec3::Constant(root_half_extent());
}

double SceneOctree::root_half_extent() const {
    return 0.5 * resolution_ * std::ldexp(1.0, depth_);
}

LeafKey SceneOctree::leaf_of(const Vec3& p) const {
    LeafKey k;
    for (int a = 0; a < 3; ++a) k[a] = static_cast<std::int64_t>(std::floor((p[a] - origin_[a]) / resolution_));
    return k;
}

bool SceneOctree::occupied(const Vec3& p) const {
    if (!p.allFinite()) return false;
    return occupied(leaf_of(p));
}

bool SceneOctree::occupied(const LeafKey& key) const {
    if (nodes_.empty()) return false;
    const std::int64_t side = std::int64_t{1} << depth_;
    for (int a = 0; a < 3; ++a) {
        if (key[a] < 0 || key[a] >= side) return false;
    }
    std::int32_t node = 0;
    for (int level = depth_ - 1; level >= 0; --level) {
        const int octant = static_cast<int>(((key[0] >> level) & 1) | (((key[1] >> level) & 1) << 1) |
                                            (((key[2] >> level) & 1) << 2));
        node = nodes_[static_cast<std::size_t>(node)].child[static_cast<std::size_t>(octant)];
        if (node < 0) return false;
    }
    return true;
}

void SceneOctree::collect(std::int32_t node, int level, LeafKey base, std::vector<LeafKey>& out) const {
    if (level == 0) {
        out.push_back(base);
        return;
    }
    const std::int64_t half = std::int64_t{1} << (level - 1);
    for (int o = 0; o < 8; ++o) {
        const std::int32_t c = nodes_[static_cast<std::size_t>(node)].child[static_cast<std::size_t>(o)];
        if (c < 0) continue;
        LeafKey k = base;
        for (int a = 0; a < 3; ++a) {
            if ((o >> a) & 1) k[a] += half;
        }
        collect(c, level - 1, k, out);
    }
}

std::vector<LeafKey> SceneOctree::occupied_leaves() const {
    std::vector<LeafKey> out;
    if (!nodes_.empty()) collect(0, depth_, {0, 0, 0}, out);
    return out;
}

SceneOctree build_octree(const PointCloud& scene, double resolution) {
    if (!(resolution > 0.0)) throw DegenerateInput("build_octree: resolution must be > 0");
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    std::size_t n = 0;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (!scene.is_valid(i) || !scene.points[i].allFinite()) continue;
        lo = lo.cwiseMin(scene.points[i]);
        hi = hi.cwiseMax(scene.points[i]);
        ++n;
    }
    if (n == 0) throw EmptyCloud("build_octree: no valid scene points");

    SceneOctree t;
    t.resolution_ = resolution;
    t.origin_ = lo;
    std::int64_t max_cell = 0;
    for (int a = 0; a < 3; ++a) {
        max_cell = std::max(max_cell, static_cast<std::int64_t>(std::floor((hi[a] - lo[a]) / resolution)));
    }
    while ((std::int64_t{1} << t.depth_) <= max_cell) {
        ++t.depth_;
        if (t.depth_ > 40) throw DegenerateInput("build_octree: resolution too fine for the cloud extent");
    }

    t.nodes_.emplace_back();
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (!scene.is_valid(i) || !scene.points[i].allFinite()) continue;
        const LeafKey key = t.leaf_of(scene.points[i]);
        std::int32_t node = 0;
        for (int level = t.depth_ - 1; level >= 0; --level) {
            const auto octant = static_cast<std::size_t>(((key[0] >> level) & 1) | (((key[1] >> level) & 1) << 1) |
                                                         (((key[2] >> level) & 1) << 2));
            std::int32_t next = t.nodes_[static_cast<std::size_t>(node)].child[octant];
            if (next < 0) {
                next = static_cast<std::int32_t>(t.nodes_.size());
                t.nodes_[static_cast<std::size_t>(node)].child[octant] = next;
                t.nodes_.emplace_back();
                if (level == 0) ++t.leaf_count_;
            }
            node = next;
        }
        if (t.depth_ == 0) t.leaf_count_ = 1;
    }
    return t;
}

double collision_rate(const PointCloud& model, const Pose& pose, const SceneOctree& tree) {
    std::size_t total = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < model.size(); ++i) {
        if (!model.is_valid(i)) continue;
        ++total;
        if (tree.occupied(pose.apply(model.points[i]))) ++hits;
    }
    if (total == 0) throw EmptyCloud("collision_rate: empty model cloud");
    return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace tmpose
