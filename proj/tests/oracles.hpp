#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary. They follow the textbook definitions directly and make
// no use of the library's accelerated paths.

#include "tmpose/detection.hpp"
#include "tmpose/matching.hpp"
#include "tmpose/templates.hpp"
#include "tmpose/verify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <tuple>
#include <vector>

namespace oracle {

using namespace tmpose;

/// Per feature, the best response over the (2T+1)^2 window of raw scene bins
/// around the feature location; summed and divided by the feature count.
inline double similarity(const Template& tpl, const BinImage& grad, const BinImage& norm, int spread, int gbins,
                         int nbins, int row, int col) {
    double total = 0.0;
    for (const auto& f : tpl.features) {
        const BinImage& img = f.modality == Modality::Gradient ? grad : norm;
        const int bins = f.modality == Modality::Gradient ? gbins : nbins;
        double best = 0.0;
        for (int dr = -spread; dr <= spread; ++dr) {
            for (int dc = -spread; dc <= spread; ++dc) {
                const int r = row + f.row + dr;
                const int c = col + f.col + dc;
                if (!img.contains(r, c)) continue;
                const int b = img.at(r, c);
                if (b < 0) continue;
                double v = 0.0;
                if (b == f.bin) {
                    v = 1.0;
                } else if (response_level(f.modality, f.bin, b, bins) == 1) {
                    v = std::cos(M_PI / 8.0);
                }
                best = std::max(best, v);
            }
        }
        total += best;
    }
    return tpl.features.empty() ? 0.0 : total / static_cast<double>(tpl.features.size());
}

inline std::uint8_t spread_bits(const BinImage& bins, int spread, int row, int col) {
    std::uint8_t acc = 0;
    for (int r = row - spread; r <= row + spread; ++r) {
        for (int c = col - spread; c <= col + spread; ++c) {
            if (bins.contains(r, c) && bins.at(r, c) >= 0) acc |= static_cast<std::uint8_t>(1u << bins.at(r, c));
        }
    }
    return acc;
}

struct MatchFixture {
    BinImage grad;
    BinImage norm;
    int spread = 2;
    TemplateStore store;
};

/// Random 8-bin scene of the given size with sparse orientation pixels and a
/// few random templates, each planted once with mostly exact and some
/// adjacent or wrong bins so that scores straddle typical thresholds.
inline MatchFixture random_match_fixture(std::mt19937_64& rng, int size = 64, int templates = 3) {
    MatchFixture fx;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> bin(0, 7);
    std::uniform_int_distribution<int> spread(0, 4);
    fx.spread = spread(rng);
    fx.grad = BinImage(size, size, -1);
    fx.norm = BinImage(size, size, -1);
    for (std::size_t i = 0; i < fx.grad.size(); ++i) {
        if (u(rng) < 0.08) fx.grad[i] = static_cast<std::int8_t>(bin(rng));
        if (u(rng) < 0.15) fx.norm[i] = static_cast<std::int8_t>(bin(rng));
    }
    fx.store.objects.push_back({"a", {}});
    fx.store.objects.push_back({"b", {}});
    std::uniform_int_distribution<int> side(6, 24);
    std::uniform_int_distribution<int> nfeat(4, 40);
    for (int t = 0; t < templates; ++t) {
        Template tpl;
        tpl.rows = side(rng);
        tpl.cols = side(rng);
        tpl.object_id = t % 2 ? "b" : "a";
        tpl.train_distance = 0.5 + 0.1 * t;
        const int n = nfeat(rng);
        std::uniform_int_distribution<int> fr(0, tpl.rows - 1);
        std::uniform_int_distribution<int> fc(0, tpl.cols - 1);
        for (int k = 0; k < n; ++k) {
            tpl.features.push_back({k % 2 ? Modality::Normal : Modality::Gradient, fr(rng), fc(rng), bin(rng)});
        }
        std::uniform_int_distribution<int> pr(0, size - tpl.rows);
        std::uniform_int_distribution<int> pc(0, size - tpl.cols);
        const int r0 = pr(rng);
        const int c0 = pc(rng);
        for (const auto& f : tpl.features) {
            BinImage& img = f.modality == Modality::Gradient ? fx.grad : fx.norm;
            const double p = u(rng);
            int b = f.bin;
            if (p > 0.9) {
                b = bin(rng);
            } else if (p > 0.8) {
                b = (f.bin + 1) % 8;
            }
            img.at(r0 + f.row, c0 + f.col) = static_cast<std::int8_t>(b);
        }
        auto& list = fx.store.objects[t % 2].templates;
        list.push_back(std::move(tpl));
    }
    return fx;
}

/// Exhaustive scan of every stride position.
inline std::vector<Match> match_all(const MatchFixture& fx, double threshold, int stride) {
    std::vector<Match> out;
    for (const auto& obj : fx.store.objects) {
        for (std::size_t i = 0; i < obj.templates.size(); ++i) {
            const Template& t = obj.templates[i];
            for (int r = 0; r + t.rows <= fx.grad.height(); r += stride) {
                for (int c = 0; c + t.cols <= fx.grad.width(); c += stride) {
                    const double s = similarity(t, fx.grad, fx.norm, fx.spread, 8, 8, r, c);
                    if (s >= threshold) out.push_back({obj.object_id, static_cast<int>(i), r, c, s, t.train_distance});
                }
            }
        }
    }
    return out;
}

/// Clustering by explicit key with union-find over matches sharing a key.
inline std::vector<std::vector<int>> cluster_groups(const std::vector<Match>& matches, int s_im) {
    const int n = static_cast<int>(matches.size());
    std::vector<int> parent(n);
    for (int i = 0; i < n; ++i) parent[i] = i;
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto key = [&](const Match& m) {
        return std::make_tuple(m.object_id, static_cast<long>(std::floor(m.row / double(s_im))),
                               static_cast<long>(std::floor(m.col / double(s_im))), m.train_distance);
    };
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < i; ++j) {
            if (key(matches[i]) == key(matches[j])) parent[find(i)] = find(j);
        }
    }
    std::map<int, std::vector<int>> groups;
    std::vector<int> order;
    for (int i = 0; i < n; ++i) {
        const int root = find(i);
        if (!groups.count(root)) order.push_back(root);
        groups[root].push_back(i);
    }
    std::vector<std::vector<int>> out;
    for (int root : order) out.push_back(groups[root]);
    return out;
}

/// O(n^2) suppression with the documented order.
inline std::vector<int> nms_survivors(const std::vector<Hypothesis>& hyps, double radius) {
    auto better = [](const Hypothesis& a, const Hypothesis& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.train_distance != b.train_distance) return a.train_distance < b.train_distance;
        if (a.position.row != b.position.row) return a.position.row < b.position.row;
        return a.position.col < b.position.col;
    };
    std::vector<int> out;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        bool suppressed = false;
        for (std::size_t j = 0; j < hyps.size(); ++j) {
            if (i == j || hyps[i].object_id != hyps[j].object_id) continue;
            const double dr = hyps[i].position.row - hyps[j].position.row;
            const double dc = hyps[i].position.col - hyps[j].position.col;
            if (std::sqrt(dr * dr + dc * dc) <= radius && better(hyps[j], hyps[i])) suppressed = true;
        }
        if (!suppressed) out.push_back(static_cast<int>(i));
    }
    return out;
}

/// Occupied voxels of a cloud by hashing floor((p - min) / res).
inline std::set<LeafKey> voxel_keys(const PointCloud& cloud, double res) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.is_valid(i)) lo = lo.cwiseMin(cloud.points[i]);
    }
    std::set<LeafKey> keys;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!cloud.is_valid(i)) continue;
        const Vec3 q = (cloud.points[i] - lo) / res;
        keys.insert({static_cast<std::int64_t>(std::floor(q.x())), static_cast<std::int64_t>(std::floor(q.y())),
                     static_cast<std::int64_t>(std::floor(q.z()))});
    }
    return keys;
}

/// Share of model points, moved by `pose`, that land in an occupied voxel.
inline double voxel_membership(const PointCloud& model, const Pose& pose, const PointCloud& scene, double res) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (scene.is_valid(i)) lo = lo.cwiseMin(scene.points[i]);
    }
    const auto keys = voxel_keys(scene, res);
    std::size_t hit = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < model.size(); ++i) {
        if (!model.is_valid(i)) continue;
        ++total;
        const Vec3 q = (pose.apply(model.points[i]) - lo) / res;
        const LeafKey k{static_cast<std::int64_t>(std::floor(q.x())), static_cast<std::int64_t>(std::floor(q.y())),
                        static_cast<std::int64_t>(std::floor(q.z()))};
        hit += keys.count(k);
    }
    return static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace oracle
