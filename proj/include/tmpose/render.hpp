#pragma once

#include "tmpose/geometry.hpp"
#include "tmpose/image.hpp"
#include "tmpose/mesh.hpp"

#include <vector>

namespace tmpose {

struct CameraIntrinsics {
    double fx = 572.0;
    double fy = 572.0;
    double cx = 320.0;
    double cy = 240.0;
    int width = 640;
    int height = 480;

    bool is_valid() const {
        return fx > 0 && fy > 0 && cx >= 0 && cx < width && cy >= 0 && cy < height;
    }
    /// Pixel (col, row) of a camera-frame point; z must be > 0.
    Eigen::Vector2d project(const Vec3& p) const {
        return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
    }
    Vec3 backproject(double col, double row, double depth) const {
        return {(col - cx) * depth / fx, (row - cy) * depth / fy, depth};
    }
    bool operator==(const CameraIntrinsics&) const = default;
};

/// Camera-z depth in meters; 0 marks an invalid pixel.
using DepthImage = Image<double>;

/// Per-pixel unit normals in the camera frame.
struct NormalMap {
    int width = 0;
    int height = 0;
    std::vector<Vec3> normals;
    std::vector<std::uint8_t> valid;

    NormalMap() = default;
    NormalMap(int w, int h)
        : width(w), height(h),
          normals(static_cast<std::size_t>(w) * h, Vec3::Zero()),
          valid(static_cast<std::size_t>(w) * h, 0) {}

    std::size_t index(int row, int col) const { return static_cast<std::size_t>(row) * width + col; }
    bool is_valid(int row, int col) const { return valid[index(row, col)] != 0; }
    const Vec3& at(int row, int col) const { return normals[index(row, col)]; }
    void set(int row, int col, const Vec3& n) {
        normals[index(row, col)] = n;
        valid[index(row, col)] = 1;
    }
};

struct RenderResult {
    DepthImage depth;
    Mask mask;
    /// Flat-shaded triangle normals, oriented toward the camera.
    NormalMap face_normals;
};

/// In-plane rotation sweep in degrees: min, min+step, ... <= max.
struct InplaneRange {
    double min_deg = 0.0;
    double max_deg = 0.0;
    double step_deg = 10.0;

    std::vector<double> angles_deg() const;
};

/// Unit directions on a Fibonacci spiral.
std::vector<Vec3> fibonacci_sphere(int count);

/// Object-in-camera poses for a camera on each sphere looking at the object
/// origin. Order: viewpoint, then in-plane angle, then radius.
std::vector<Pose> sample_viewpoints(int viewpoint_count, const InplaneRange& inplane,
                                    const std::vector<double>& radii);

/// Object-in-camera rotation for a camera at direction `view_dir` (unit,
/// object frame) rotated by `inplane_rad` about its optical axis.
Mat3 look_at_rotation(const Vec3& view_dir, double inplane_rad);

/// Z-buffer rasterization with the top-left fill rule. Triangles with any
/// vertex closer than 1 mm to the camera plane are skipped.
RenderResult render_depth(const TriangleMesh& mesh, const CameraIntrinsics& cam, const Pose& pose);

/// Renders into an existing buffer, keeping the nearest surface per pixel.
void render_into(const TriangleMesh& mesh, const CameraIntrinsics& cam, const Pose& pose, RenderResult& target);

RenderResult make_empty_render(const CameraIntrinsics& cam);

struct NormalOptions {
    /// Neighbor depth jump (meters) that invalidates a normal.
    double discontinuity_threshold = 0.02;
    /// Pixel offset of the central differences.
    int step = 1;
    /// Half-width of the box pre-filter on depth; 0 disables it.
    int smoothing_radius = 0;
};

NormalMap normals_from_depth(const DepthImage& depth, const CameraIntrinsics& cam,
                             const NormalOptions& options = {});

/// Organized cloud; invalid or unmasked pixels become invalid points.
PointCloud backproject(const DepthImage& depth, const CameraIntrinsics& cam, const Mask* mask = nullptr);

/// Lambertian shading, 255 * max(0, n . light), invalid pixels 0.
GrayImage shade_intensity(const NormalMap& normals, const Vec3& light_dir);

/// Default headlight used for synthetic intensity images.
inline Vec3 default_light() { return Vec3(0.0, 0.0, -1.0); }

// PNG codecs. Depth PNGs are 16-bit millimeters with 0 = invalid.
void write_depth_png(const std::string& path, const DepthImage& depth);
DepthImage read_depth_png(const std::string& path);
void write_gray_png(const std::string& path, const GrayImage& image);
GrayImage read_gray_png(const std::string& path);
/// Masks are written as 0/255 and read back as 0/1.
void write_mask_png(const std::string& path, const Mask& mask);
Mask read_mask_png(const std::string& path);

/// Rounds depth to whole millimeters, the precision of the PNG codec.
DepthImage quantize_depth_mm(const DepthImage& depth);

}  // namespace tmpose
