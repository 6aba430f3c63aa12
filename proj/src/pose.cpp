#include "tmpose/pose.hpp"

#include "tmpose/error.hpp"
#include "tmpose/kdtree.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>

namespace tmpose {

std::vector<OrientationCluster> cluster_orientations(const std::vector<OrientationSample>& samples,
                                                     double max_angle) {
    std::vector<int> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return samples[a].similarity > samples[b].similarity; });

    std::vector<OrientationCluster> clusters;
    for (int idx : order) {
        const Mat3& r = samples[idx].rotation;
        OrientationCluster* home = nullptr;
        for (auto& c : clusters) {
            if (axis_angle_between(c.representative, r).angle < max_angle) {
                home = &c;
                break;
            }
        }
        if (!home) {
            clusters.push_back({{}, r, 0.0});
            home = &clusters.back();
        }
        home->members.push_back(idx);
    }
    for (auto& c : clusters) {
        double s = 0.0;
        for (int i : c.members) s += samples[i].similarity;
        c.mean_similarity = s / static_cast<double>(c.members.size());
    }
    return clusters;
}

const OrientationCluster& largest_cluster(const std::vector<OrientationCluster>& clusters) {
    if (clusters.empty()) throw DegenerateCluster("largest_cluster: no clusters");
    const OrientationCluster* best = &clusters.front();
    for (const auto& c : clusters) {
        if (c.members.size() > best->members.size() ||
            (c.members.size() == best->members.size() && c.mean_similarity > best->mean_similarity)) {
            best = &c;
        }
    }
    return *best;
}

Mat3 average_orientation(const std::vector<Mat3>& rotations) {
    if (rotations.empty()) throw DegenerateCluster("average_orientation: empty cluster");
    std::vector<Eigen::Vector4d> qs;
    qs.reserve(rotations.size());
    for (const auto& r : rotations) {
        const Eigen::Quaterniond q = to_quaternion(r);
        qs.emplace_back(q.w(), q.x(), q.y(), q.z());
    }
    // Sign alignment against the first member fails once two rotations are
    // pi/2 or more apart (|q_i . q_j| <= cos(pi/4)).
    const double min_dot = std::cos(M_PI / 4.0);
    Eigen::Matrix4d acc = Eigen::Matrix4d::Zero();
    for (std::size_t i = 0; i < qs.size(); ++i) {
        for (std::size_t j = i + 1; j < qs.size(); ++j) {
            if (std::abs(qs[i].dot(qs[j])) <= min_dot) {
                throw DegenerateCluster("average_orientation: members are pi/2 or more apart");
            }
        }
        const Eigen::Vector4d q = qs[i].dot(qs[0]) < 0.0 ? Eigen::Vector4d(-qs[i]) : qs[i];
        acc += q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> solver(acc);
    const Eigen::Vector4d evals = solver.eigenvalues();
    if (evals(3) - evals(2) <= 1e-12 * std::max(1.0, evals(3))) {
        throw DegenerateCluster("average_orientation: leading eigenvalue not unique");
    }
    const Eigen::Vector4d v = solver.eigenvectors().col(3);
    return from_quaternion(Eigen::Quaterniond(v(0), v(1), v(2), v(3)));
}

namespace {

InitialPose pose_from_cluster(const Hypothesis& hyp, const ObjectTemplates* obj,
                              const std::vector<OrientationSample>& samples, const OrientationCluster& best,
                              const DepthImage& scene_depth, const CameraIntrinsics& cam, const TriangleMesh& mesh,
                              const InitialPoseOptions& options) {
    std::vector<Mat3> rotations;
    double center_row = 0.0;
    double center_col = 0.0;
    for (int i : best.members) {
        rotations.push_back(samples[static_cast<std::size_t>(i)].rotation);
        const Match& m = hyp.members[static_cast<std::size_t>(i)];
        const Template& t = obj->templates[static_cast<std::size_t>(m.template_index)];
        // Pixel where the object origin lands if this template's training
        // render is placed at the match position.
        center_row += m.row - t.offset_row + cam.cy;
        center_col += m.col - t.offset_col + cam.cx;
    }
    center_row /= static_cast<double>(best.members.size());
    center_col /= static_cast<double>(best.members.size());
    const Mat3 orientation = average_orientation(rotations);

    const Pose render_pose{orientation, Vec3(0.0, 0.0, hyp.train_distance)};
    const RenderResult model = render_depth(mesh, cam, render_pose);
    const int shift_r = static_cast<int>(std::lround(center_row - cam.cy));
    const int shift_c = static_cast<int>(std::lround(center_col - cam.cx));

    struct PixelPair {
        Vec3 model;
        Vec3 scene;
        double offset;
    };
    std::vector<PixelPair> pairs;
    for (int r = 0; r < cam.height; ++r) {
        for (int c = 0; c < cam.width; ++c) {
            if (!model.mask.at(r, c)) continue;
            const int sr = r + shift_r;
            const int sc = c + shift_c;
            if (!scene_depth.contains(sr, sc)) continue;
            const double sd = scene_depth.at(sr, sc);
            if (sd <= 0.0) continue;
            const double md = model.depth.at(r, c);
            pairs.push_back({cam.backproject(c, r, md), cam.backproject(sc, sr, sd), sd - md});
        }
    }
    if (pairs.empty()) throw EmptySegment("initial_pose: render mask covers no valid scene depth");

    std::vector<double> offsets;
    offsets.reserve(pairs.size());
    for (const auto& p : pairs) offsets.push_back(p.offset);
    const auto mid = offsets.begin() + static_cast<std::ptrdiff_t>(offsets.size() / 2);
    std::nth_element(offsets.begin(), mid, offsets.end());
    const double median = *mid;

    Vec3 model_sum = Vec3::Zero();
    Vec3 scene_sum = Vec3::Zero();
    std::size_t kept = 0;
    for (const auto& p : pairs) {
        if (std::abs(p.offset - median) > options.depth_gate) continue;
        model_sum += p.model;
        scene_sum += p.scene;
        ++kept;
    }
    const double n = static_cast<double>(kept);
    const Vec3 translation = render_pose.translation + (scene_sum / n - model_sum / n);

    InitialPose out;
    // The matched view is seen along the ray through the object, not along
    // the optical axis.
    out.pose.rotation = rotation_between_vectors(Vec3::UnitZ(), translation.normalized()) * orientation;
    out.pose.translation = translation;
    out.cluster_size = static_cast<int>(best.members.size());
    out.segment_points = kept;
    return out;
}

std::vector<OrientationSample> member_samples(const Hypothesis& hyp, const ObjectTemplates*& obj,
                                              const TemplateStore& store) {
    obj = store.find(hyp.object_id);
    if (!obj) throw Error("initial_pose: unknown object " + hyp.object_id);
    if (hyp.members.empty()) throw DegenerateCluster("initial_pose: hypothesis has no members");
    std::vector<OrientationSample> samples;
    samples.reserve(hyp.members.size());
    for (const auto& m : hyp.members) {
        samples.push_back({obj->templates.at(static_cast<std::size_t>(m.template_index)).train_pose.rotation,
                           m.similarity});
    }
    return samples;
}

}  // namespace

InitialPose initial_pose(const Hypothesis& hyp, const TemplateStore& store, const DepthImage& scene_depth,
                         const CameraIntrinsics& cam, const TriangleMesh& mesh, const InitialPoseOptions& options) {
    const ObjectTemplates* obj = nullptr;
    const auto samples = member_samples(hyp, obj, store);
    const auto clusters = cluster_orientations(samples, options.orientation_threshold);
    return pose_from_cluster(hyp, obj, samples, largest_cluster(clusters), scene_depth, cam, mesh, options);
}

std::vector<InitialPose> initial_pose_candidates(const Hypothesis& hyp, const TemplateStore& store,
                                                 const DepthImage& scene_depth, const CameraIntrinsics& cam,
                                                 const TriangleMesh& mesh, int count,
                                                 const InitialPoseOptions& options) {
    if (count < 1) throw DegenerateInput("initial_pose_candidates: count must be >= 1");
    const ObjectTemplates* obj = nullptr;
    const auto samples = member_samples(hyp, obj, store);
    auto clusters = cluster_orientations(samples, options.orientation_threshold);
    std::vector<std::size_t> order(clusters.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (clusters[a].members.size() != clusters[b].members.size()) {
            return clusters[a].members.size() > clusters[b].members.size();
        }
        return clusters[a].mean_similarity > clusters[b].mean_similarity;
    });
    std::vector<InitialPose> out;
    for (std::size_t i = 0; i < order.size() && static_cast<int>(out.size()) < count; ++i) {
        try {
            out.push_back(pose_from_cluster(hyp, obj, samples, clusters[order[i]], scene_depth, cam, mesh, options));
        } catch (const EmptySegment&) {
            if (i == 0) throw;
        } catch (const DegenerateCluster&) {
            if (i == 0) throw;
        }
    }
    return out;
}

PointCloud mls_smooth(const PointCloud& cloud, double radius, int order) {
    if (!(radius > 0.0)) throw DegenerateInput("mls_smooth: radius must be > 0");
    if (order != 1 && order != 2) throw DegenerateInput("mls_smooth: order must be 1 or 2");

    std::vector<Vec3> pts;
    std::vector<std::size_t> slot;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!cloud.is_valid(i)) continue;
        pts.push_back(cloud.points[i]);
        slot.push_back(i);
    }
    PointCloud out = cloud;
    if (!out.has_normals()) out.normals.assign(out.points.size(), Vec3::Zero());
    if (pts.empty()) return out;

    const KdTree tree(pts);
    const double h = radius / 2.0;
    const double inv_2h2 = 1.0 / (2.0 * h * h);

    for (std::size_t k = 0; k < pts.size(); ++k) {
        const Vec3& p = pts[k];
        const auto nbrs = tree.radius_search(p, radius);
        if (nbrs.size() < 5) continue;

        std::vector<double> w(nbrs.size());
        double wsum = 0.0;
        Vec3 mean = Vec3::Zero();
        for (std::size_t j = 0; j < nbrs.size(); ++j) {
            w[j] = std::exp(-(pts[nbrs[j]] - p).squaredNorm() * inv_2h2);
            wsum += w[j];
            mean += w[j] * pts[nbrs[j]];
        }
        mean /= wsum;
        Mat3 cov = Mat3::Zero();
        for (std::size_t j = 0; j < nbrs.size(); ++j) {
            const Vec3 d = pts[nbrs[j]] - mean;
            cov += w[j] * d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        Vec3 normal = eig.eigenvectors().col(0);
        const Vec3 e1 = eig.eigenvectors().col(2);
        const Vec3 e2 = normal.cross(e1);

        const Vec3 rel = p - mean;
        const double pu = rel.dot(e1);
        const double pv = rel.dot(e2);
        Vec3 projected = p - rel.dot(normal) * normal;
        Vec3 fitted_normal = normal;

        if (order == 2 && nbrs.size() >= 6) {
            Eigen::Matrix<double, 6, 6> ata = Eigen::Matrix<double, 6, 6>::Zero();
            Eigen::Matrix<double, 6, 1> atb = Eigen::Matrix<double, 6, 1>::Zero();
            for (std::size_t j = 0; j < nbrs.size(); ++j) {
                const Vec3 d = pts[nbrs[j]] - mean;
                const double u = d.dot(e1);
                const double v = d.dot(e2);
                Eigen::Matrix<double, 6, 1> row;
                row << 1.0, u, v, u * u, u * v, v * v;
                ata += w[j] * row * row.transpose();
                atb += w[j] * d.dot(normal) * row;
            }
            Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(ata);
            if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
                const Eigen::Matrix<double, 6, 1> c = ldlt.solve(atb);
                if (c.allFinite()) {
                    const double height = c(0) + c(1) * pu + c(2) * pv + c(3) * pu * pu + c(4) * pu * pv +
                                          c(5) * pv * pv;
                    const double du = c(1) + 2.0 * c(3) * pu + c(4) * pv;
                    const double dv = c(2) + c(4) * pu + 2.0 * c(5) * pv;
                    projected = mean + pu * e1 + pv * e2 + height * normal;
                    fitted_normal = (normal - du * e1 - dv * e2).normalized();
                }
            }
        }
        if (fitted_normal.dot(projected) > 0.0) fitted_normal = -fitted_normal;
        out.points[slot[k]] = projected;
        out.normals[slot[k]] = fitted_normal;
    }
    return out;
}

PointCloud voxel_downsample(const PointCloud& cloud, double leaf) {
    if (!(leaf > 0.0)) throw DegenerateInput("voxel_downsample: leaf must be > 0");
    struct Acc {
        Vec3 sum = Vec3::Zero();
        Vec3 normal = Vec3::Zero();
        std::size_t n = 0;
    };
    std::map<std::array<long long, 3>, Acc> voxels;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!cloud.is_valid(i)) continue;
        const Vec3& p = cloud.points[i];
        const std::array<long long, 3> key{static_cast<long long>(std::floor(p.x() / leaf)),
                                           static_cast<long long>(std::floor(p.y() / leaf)),
                                           static_cast<long long>(std::floor(p.z() / leaf))};
        Acc& a = voxels[key];
        a.sum += p;
        if (cloud.has_normals()) a.normal += cloud.normals[i];
        ++a.n;
    }
    PointCloud out;
    out.points.reserve(voxels.size());
    for (const auto& [key, a] : voxels) {
        out.points.push_back(a.sum / static_cast<double>(a.n));
        if (cloud.has_normals()) {
            const double len = a.normal.norm();
            out.normals.push_back(len > 0.0 ? Vec3(a.normal / len) : Vec3(0.0, 0.0, -1.0));
        }
    }
    out.valid.assign(out.points.size(), 1);
    return out;
}

}  // namespace tmpose
