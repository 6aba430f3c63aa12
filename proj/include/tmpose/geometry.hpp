#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>
#include <string>
#include <vector>

namespace tmpose {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rigid transform x -> rotation * x + translation. Translation in meters.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static Pose identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    /// this * other: apply `other` first.
    Pose operator*(const Pose& other) const {
        return {rotation * other.rotation, rotation * other.translation + translation};
    }

    Pose inverse() const {
        const Mat3 rt = rotation.transpose();
        return {rt, -(rt * translation)};
    }

    /// Orthonormality and det = +1 within tol per element.
    bool is_valid(double tol = 1e-9) const;

    bool operator==(const Pose& o) const {
        return rotation == o.rotation && translation == o.translation;
    }
};

struct AxisAngle {
    Vec3 axis = Vec3::UnitZ();
    double angle = 0.0;  // radians, [0, pi]
};

/// Rows/cols of an organized cloud.
struct GridDims {
    int rows = 0;
    int cols = 0;
    bool operator==(const GridDims&) const = default;
};

/// Point cloud with optional per-point normals and optional image topology.
///
/// Invalid points (organized clouds only) keep their slot: the coordinate is
/// set to NaN and `valid[i]` is 0. `valid` always has one entry per point.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;  // empty, or same length as points
    std::vector<std::uint8_t> valid;
    std::optional<GridDims> organized;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_normals() const { return !normals.empty(); }
    bool is_valid(std::size_t i) const { return valid.empty() || valid[i] != 0; }
    std::size_t valid_count() const;

    void push_back(const Vec3& p) {
        points.push_back(p);
        valid.push_back(1);
    }
    void push_back(const Vec3& p, const Vec3& n) {
        points.push_back(p);
        normals.push_back(n);
        valid.push_back(1);
    }

    /// Unorganized copy containing only valid points.
    PointCloud compacted() const;

    static Vec3 invalid_point();
};

PointCloud make_cloud(std::vector<Vec3> points);

/// Rotation taking `a` to `b` (b = a * R(axis, angle)), angle in [0, pi].
/// Identical rotations return angle 0 with axis +z.
AxisAngle axis_angle_between(const Mat3& a, const Mat3& b);

Mat3 rotation_from_axis_angle(const AxisAngle& aa);

/// Geodesic angle between two rotations.
double rotation_angle(const Mat3& a, const Mat3& b);

/// Least-squares rigid transform T minimizing sum |T(src_i) - dst_i|^2.
/// Only valid points of both clouds are used, paired by index.
/// Throws DegenerateInput for < 3 pairs or collinear data.
Pose kabsch_align(const PointCloud& src, const PointCloud& dst);
Pose kabsch_align(const std::vector<Vec3>& src, const std::vector<Vec3>& dst);

PointCloud transform_cloud(const Pose& pose, const PointCloud& cloud);

/// Mean of the valid points. Throws EmptyCloud.
Vec3 centroid(const PointCloud& cloud);

// Quaternion conversion pair used by rotation averaging. The quaternion is
// normalized and returned with w >= 0.
Eigen::Quaterniond to_quaternion(const Mat3& r);
Mat3 from_quaternion(const Eigen::Quaterniond& q);

/// Re-orthonormalizes a near-rotation matrix (SVD projection onto SO(3)).
Mat3 project_to_rotation(const Mat3& m);

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

/// Smallest rotation taking unit vector `from` to unit vector `to`.
Mat3 rotation_between_vectors(const Vec3& from, const Vec3& to);

// PLY point cloud I/O. Reads ASCII and binary_little_endian files with a
// `vertex` element (x/y/z, optional nx/ny/nz). Only valid points are written.
enum class PlyFormat { Ascii, BinaryLittleEndian };
void write_ply(const std::string& path, const PointCloud& cloud, PlyFormat format = PlyFormat::BinaryLittleEndian);
PointCloud read_ply(const std::string& path);

}  // namespace tmpose
