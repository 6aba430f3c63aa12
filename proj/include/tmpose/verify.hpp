#pragma once

#include "tmpose/geometry.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace tmpose {

/// Integer cell coordinates of an octree leaf.
using LeafKey = std::array<std::int64_t, 3>;

/// Octree over a scene cloud whose leaves are cubes of side `resolution`
/// anchored at the cloud's bounding-box minimum. Leaf intervals are half-open
/// [min, max) on every axis. Only occupied branches are stored.
class SceneOctree {
public:
    SceneOctree() = default;

    double resolution() const { return resolution_; }
    const Vec3& origin() const { return origin_; }
    /// Levels below the root; the root cube has side resolution * 2^depth.
    int depth() const { return depth_; }
    Vec3 root_center() const;
    double root_half_extent() const;

    /// Leaf cell of a point (may lie outside the root cube).
    LeafKey leaf_of(const Vec3& p) const;
    bool occupied(const Vec3& p) const;
    bool occupied(const LeafKey& key) const;
    std::size_t occupied_leaf_count() const { return leaf_count_; }
    /// Occupied leaves in depth-first octant order.
    std::vector<LeafKey> occupied_leaves() const;

private:
    friend SceneOctree build_octree(const PointCloud& scene, double resolution);

    struct Node {
        std::array<std::int32_t, 8> child{-1, -1, -1, -1, -1, -1, -1, -1};
    };

    void collect(std::int32_t node, int level, LeafKey base, std::vector<LeafKey>& out) const;

    double resolution_ = 0.0;
    Vec3 origin_ = Vec3::Zero();
    int depth_ = 0;
    std::vector<Node> nodes_;
    std::size_t leaf_count_ = 0;
};

/// Throws EmptyCloud when no valid point exists, DegenerateInput for a
/// non-positive resolution.
SceneOctree build_octree(const PointCloud& scene, double resolution);

/// Fraction of the valid model points that, moved by `pose`, fall inside an
/// occupied leaf. Throws EmptyCloud for an empty model.
double collision_rate(const PointCloud& model, const Pose& pose, const SceneOctree& tree);

/// Strict: phi > threshold.
inline bool accept(double phi, double collision_threshold) { return phi > collision_threshold; }

}  // namespace tmpose
