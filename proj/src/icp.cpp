#include "tmpose/error.hpp"
#include "tmpose/kdtree.hpp"
#include "tmpose/pose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tmpose {

void RefineParams::validate() const {
    if (!(rough_weight > 0.0 && rough_weight < 1.0)) throw ConfigError("rough_weight must be in (0, 1)");
    if (!(fine_weight > 0.0 && fine_weight < 1.0)) throw ConfigError("fine_weight must be in (0, 1)");
    if (max_iter_rough < 1 || max_iter_fine < 1) throw ConfigError("ICP iteration limits must be >= 1");
    if (!(convergence_eps >= 0.0)) throw ConfigError("convergence_eps must be >= 0");
    if (!(mls_radius > 0.0)) throw ConfigError("mls_radius must be > 0");
    if (mls_order != 1 && mls_order != 2) throw ConfigError("mls_order must be 1 or 2");
    if (!(voxel_leaf > 0.0)) throw ConfigError("voxel_leaf must be > 0");
}

namespace {

struct Pairing {
    std::vector<Vec3> moved;     // model points under the current pose
    std::vector<int> nearest;    // scene index per model point
    std::vector<double> dist;    // pair distance per model point
    double max_dist = 0.0;
};

Pairing pair_up(const std::vector<Vec3>& model, const KdTree& scene, const Pose& pose) {
    Pairing p;
    p.moved.resize(model.size());
    p.nearest.resize(model.size());
    p.dist.resize(model.size());
    for (std::size_t i = 0; i < model.size(); ++i) {
        p.moved[i] = pose.apply(model[i]);
        const auto nn = scene.nearest(p.moved[i]);
        p.nearest[i] = nn.index;
        p.dist[i] = std::sqrt(nn.sq_dist);
        p.max_dist = std::max(p.max_dist, p.dist[i]);
    }
    return p;
}

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) ;
    return v[std::min(v.size() - 1, idx == 0 ? 0 : idx - 1)];
}

}  // namespace

PoseEstimate icp_refine(const PointCloud& model_cloud, const PointCloud& scene_cloud, const Pose& init,
                        const RefineParams& params) {
    params.validate();
    const std::vector<Vec3> model = model_cloud.compacted().points;
    const std::vector<Vec3> scene_pts = scene_cloud.compacted().points;
    if (model.empty() || scene_pts.empty()) throw EmptyCloud("icp_refine: empty model or scene cloud");
    const KdTree scene(scene_pts);

    PoseEstimate est;
    est.pose = init;
    double d_tau = 0.0;

    const double weights[2] = {params.rough_weight, params.fine_weight};
    const int iters[2] = {params.max_iter_rough, params.max_iter_fine};
    for (int stage = 0; stage < 2 && !est.no_correspondences; ++stage) {
        d_tau = percentile(pair_up(model, scene, est.pose).dist, 0.9);
        double prev_mse = std::numeric_limits<double>::infinity();
        for (int it = 0; it < iters[stage]; ++it) {
            const Pairing p = pair_up(model, scene, est.pose);
            std::vector<Vec3> src;
            std::vector<Vec3> dst;
            double sq = 0.0;
            for (std::size_t i = 0; i < model.size(); ++i) {
                if (p.dist[i] > d_tau) continue;
                src.push_back(p.moved[i]);
                dst.push_back(scene_pts[static_cast<std::size_t>(p.nearest[i])]);
                sq += p.dist[i] * p.dist[i];
            }
            if (src.size() < 3) {
                est.no_correspondences = true;
                break;
            }
            // The pair set changes with d_tau, so this mse may rise between
            // iterations while the alignment still improves.
            const double mse = sq / static_cast<double>(src.size());

            Pose delta;
            try {
                delta = kabsch_align(src, dst);
            } catch (const DegenerateInput&) {
                est.no_correspondences = true;
                break;
            }
            double aligned = 0.0;
            for (std::size_t i = 0; i < src.size(); ++i) aligned += (delta.apply(src[i]) - dst[i]).squaredNorm();
            est.stage_log.push_back(
                {stage, d_tau, p.max_dist, mse, aligned / static_cast<double>(src.size()), src.size()});
            est.pose = delta * est.pose;
            est.pose.rotation = project_to_rotation(est.pose.rotation);
            // Already aligned: a near-zero d_tau would only chase rounding noise.
            if (mse < params.convergence_eps) break;
            d_tau = weights[stage] * p.max_dist;
            if (std::abs(prev_mse - mse) < params.convergence_eps) break;
            prev_mse = mse;
        }
    }

    const Pairing final_pairs = pair_up(model, scene, est.pose);
    double sq = 0.0;
    std::size_t inliers = 0;
    for (double d : final_pairs.dist) {
        if (d > d_tau) continue;
        sq += d * d;
        ++inliers;
    }
    est.fitness = inliers ? sq / static_cast<double>(inliers) : 0.0;
    est.inlier_fraction = static_cast<double>(inliers) / static_cast<double>(model.size());
    return est;
}

}  // namespace tmpose
