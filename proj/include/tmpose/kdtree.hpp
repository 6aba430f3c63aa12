#pragma once

#include "tmpose/geometry.hpp"

#include <vector>

namespace tmpose {

/// Exact 3-D k-d tree. Nearest-neighbour ties resolve to the smaller index.
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(std::vector<Vec3> points);

    struct Neighbor {
        int index = -1;
        double sq_dist = 0.0;
    };

    /// Nearest point; index -1 when the tree is empty.
    Neighbor nearest(const Vec3& query) const;

    /// Indices of all points with distance <= radius, ascending.
    std::vector<int> radius_search(const Vec3& query, double radius) const;

    const std::vector<Vec3>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }

private:
    struct Node {
        int begin = 0;  // range into order_
        int end = 0;
        int axis = -1;  // -1 for leaves
        double split = 0.0;
        int left = -1;
        int right = -1;
    };

    int build(int begin, int end);
    void nearest_rec(int node, const Vec3& q, Neighbor& best) const;
    void radius_rec(int node, const Vec3& q, double r2, std::vector<int>& out) const;

    std::vector<Vec3> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

}  // namespace tmpose
