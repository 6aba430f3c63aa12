#include "tmpose/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace tmpose {

namespace {
constexpr int kLeafSize = 8;
}

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        build(0, static_cast<int>(points_.size()));
    }
}

int KdTree::build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end, -1, 0.0, -1, -1});
    if (end - begin <= kLeafSize) return id;

    Vec3 lo = points_[order_[begin]];
    Vec3 hi = lo;
    for (int i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) return id;  // all coincident

    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
        if (points_[a][axis] != points_[b][axis]) return points_[a][axis] < points_[b][axis];
        return a < b;
    });
    const double split = points_[order_[mid]][axis];
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void KdTree::nearest_rec(int node_id, const Vec3& q, Neighbor& best) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
        for (int i = node.begin; i < node.end; ++i) {
            const int idx = order_[i];
            const double d = (points_[idx] - q).squaredNorm();
            if (d < best.sq_dist || (d == best.sq_dist && idx < best.index)) best = {idx, d};
        }
        return;
    }
    const double diff = q[node.axis] - node.split;
    const int first = diff < 0.0 ? node.left : node.right;
    const int second = diff < 0.0 ? node.right : node.left;
    nearest_rec(first, q, best);
    // Points on the far side are at least |diff| away; equality can still tie.
    if (diff * diff <= best.sq_dist) nearest_rec(second, q, best);
}

KdTree::Neighbor KdTree::nearest(const Vec3& query) const {
    Neighbor best{-1, std::numeric_limits<double>::infinity()};
    if (!nodes_.empty()) nearest_rec(0, query, best);
    return best;
}

void KdTree::radius_rec(int node_id, const Vec3& q, double r2, std::vector<int>& out) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
        for (int i = node.begin; i < node.end; ++i) {
            if ((points_[order_[i]] - q).squaredNorm() <= r2) out.push_back(order_[i]);
        }
        return;
    }
    const double diff = q[node.axis] - node.split;
    if (diff <= 0.0 || diff * diff <= r2) radius_rec(node.left, q, r2, out);
    if (diff >= 0.0 || diff * diff <= r2) radius_rec(node.right, q, r2, out);
}

std::vector<int> KdTree::radius_search(const Vec3& query, double radius) const {
    std::vector<int> out;
    if (!nodes_.empty()) radius_rec(0, query, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace tmpose
