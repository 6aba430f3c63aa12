#pragma once

#include "tmpose/detection.hpp"
#include "tmpose/geometry.hpp"
#include "tmpose/render.hpp"
#include "tmpose/templates.hpp"

#include <vector>

namespace tmpose {

// ---------------------------------------------------------------------------
// Initial orientation from the member templates' training poses

struct OrientationSample {
    Mat3 rotation;
    double similarity = 0.0;
};

struct OrientationCluster {
    /// Indices into the sample list, in processing order.
    std::vector<int> members;
    /// Rotation of the first member.
    Mat3 representative;
    double mean_similarity = 0.0;
};

/// Greedy single pass: samples are visited by descending similarity (ties by
/// index) and join the first cluster whose representative is closer than
/// `max_angle` radians, else found a new cluster.
std::vector<OrientationCluster> cluster_orientations(const std::vector<OrientationSample>& samples,
                                                     double max_angle);

/// Largest cluster; ties go to the higher mean similarity, then the earlier
/// cluster.
const OrientationCluster& largest_cluster(const std::vector<OrientationCluster>& clusters);

/// Chordal mean: principal eigenvector of the summed quaternion outer
/// products. Throws DegenerateCluster when two members are pi/2 or more apart
/// or the leading eigenvalue is not unique.
Mat3 average_orientation(const std::vector<Mat3>& rotations);

struct InitialPoseOptions {
    double orientation_threshold = 15.0 * M_PI / 180.0;
    /// Depth gate around the median scene/model depth offset (meters).
    double depth_gate = 0.03;
};

struct InitialPose {
    Pose pose;
    int cluster_size = 0;
    std::size_t segment_points = 0;
};

/// Orientation from the largest orientation cluster, corrected for the
/// viewing ray through the object; translation from the centroid offset
/// between the rendered model points and the scene points under the shifted
/// render mask. Throws EmptySegment when no scene depth falls in the mask.
InitialPose initial_pose(const Hypothesis& hyp, const TemplateStore& store, const DepthImage& scene_depth,
                         const CameraIntrinsics& cam, const TriangleMesh& mesh,
                         const InitialPoseOptions& options = {});

/// Initial poses from the `count` largest orientation clusters, largest first
/// (same ordering as largest_cluster). The first entry equals initial_pose();
/// later clusters that yield no pose are skipped.
std::vector<InitialPose> initial_pose_candidates(const Hypothesis& hyp, const TemplateStore& store,
                                                 const DepthImage& scene_depth, const CameraIntrinsics& cam,
                                                 const TriangleMesh& mesh, int count,
                                                 const InitialPoseOptions& options = {});

// ---------------------------------------------------------------------------
// Point-cloud refinement

/// Moving least squares: each valid point with >= 5 neighbours inside
/// `radius` is projected onto a Gaussian-weighted (sigma = radius / 2)
/// polynomial fit of order 1 (plane) or 2 (quadric) over its neighbourhood.
/// Normals are recomputed from the fit and oriented toward the origin.
PointCloud mls_smooth(const PointCloud& cloud, double radius, int order);

/// One centroid per occupied voxel of side `leaf`, ordered by voxel index.
PointCloud voxel_downsample(const PointCloud& cloud, double leaf);

struct RefineParams {
    double rough_weight = 0.90;
    double fine_weight = 0.45;
    int max_iter_rough = 40;
    int max_iter_fine = 60;
    double convergence_eps = 1e-10;  // m^2
    double mls_radius = 0.008;
    int mls_order = 2;
    double voxel_leaf = 0.003;

    void validate() const;
};

struct IcpLogEntry {
    int stage = 0;  // 0 rough, 1 fine
    double d_tau = 0.0;
    /// Largest pair distance at this iteration, before discarding.
    double max_pair_distance = 0.0;
    /// Mean squared distance of the kept pairs before and after this
    /// iteration's alignment step.
    double mse = 0.0;
    double aligned_mse = 0.0;
    std::size_t pairs = 0;
};

struct PoseEstimate {
    Pose pose;
    double fitness = 0.0;  // mean squared pair distance at the final d_tau
    double inlier_fraction = 0.0;
    std::vector<IcpLogEntry> stage_log;
    /// Set when some iteration had fewer than 3 pairs inside d_tau; the pose
    /// is the best one reached before that.
    bool no_correspondences = false;
};

/// Rough-to-fine point-to-point ICP. Each stage starts with d_tau at the
/// 90th percentile of the pair distances; every iteration discards pairs
/// beyond d_tau, aligns the rest, and sets d_tau = weight * (largest pair
/// distance before discarding). A stage ends when the mse or its change
/// drops below convergence_eps, or at max iterations.
PoseEstimate icp_refine(const PointCloud& model, const PointCloud& scene, const Pose& init,
                        const RefineParams& params);

}  // namespace tmpose
