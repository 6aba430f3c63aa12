#pragma once

#include "tmpose/geometry.hpp"
#include "tmpose/render.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing {

using tmpose::Mat3;
using tmpose::Pose;
using tmpose::Vec3;

inline Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    return q.toRotationMatrix();
}

/// Rotation by a uniformly random axis and an angle drawn from [0, max_angle].
inline Mat3 random_small_rotation(std::mt19937_64& rng, double max_angle) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, max_angle);
    Vec3 axis(n(rng), n(rng), n(rng));
    return Eigen::AngleAxisd(u(rng), axis.normalized()).toRotationMatrix();
}

inline Vec3 random_vec(std::mt19937_64& rng, double half_range) {
    std::uniform_real_distribution<double> u(-half_range, half_range);
    return {u(rng), u(rng), u(rng)};
}

inline Pose random_pose(std::mt19937_64& rng, double half_range = 1.0) {
    return {random_rotation(rng), random_vec(rng, half_range)};
}

inline tmpose::CameraIntrinsics small_camera() {
    tmpose::CameraIntrinsics cam;
    cam.fx = cam.fy = 143.0;
    cam.cx = 80.0;
    cam.cy = 60.0;
    cam.width = 160;
    cam.height = 120;
    return cam;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("tmpose_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
