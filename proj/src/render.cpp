#include "tmpose/render.hpp"

#include <algorithm>
#include <cmath>

namespace tmpose {

std::vector<double> InplaneRange::angles_deg() const {
    std::vector<double> out;
    if (step_deg <= 0.0) {
        out.push_back(min_deg);
        return out;
    }
    for (int k = 0;; ++k) {
        const double a = min_deg + k * step_deg;
        if (a > max_deg + 1e-9) break;
        out.push_back(a);
    }
    return out;
}

std::vector<Vec3> fibonacci_sphere(int count) {
    std::vector<Vec3> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden_angle * i;
        out.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
    }
    return out;
}

Mat3 look_at_rotation(const Vec3& view_dir, double inplane_rad) {
    const Vec3 z_cam = -view_dir.normalized();
    Vec3 up = Vec3::UnitZ();
    if (std::abs(z_cam.dot(up)) > 0.999) up = Vec3::UnitY();
    const Vec3 x_cam = z_cam.cross(up).normalized();
    const Vec3 y_cam = z_cam.cross(x_cam);
    Mat3 world_to_cam;
    world_to_cam.row(0) = x_cam.transpose();
    world_to_cam.row(1) = y_cam.transpose();
    world_to_cam.row(2) = z_cam.transpose();
    return rot_z(inplane_rad) * world_to_cam;
}

std::vector<Pose> sample_viewpoints(int viewpoint_count, const InplaneRange& inplane,
                                    const std::vector<double>& radii) {
    const auto dirs = fibonacci_sphere(viewpoint_count);
    const auto angles = inplane.angles_deg();
    std::vector<Pose> out;
    out.reserve(dirs.size() * angles.size() * radii.size());
    for (const auto& d : dirs) {
        for (double deg : angles) {
            const Mat3 r = look_at_rotation(d, deg * M_PI / 180.0);
            for (double radius : radii) {
                out.push_back({r, Vec3(0.0, 0.0, radius)});
            }
        }
    }
    return out;
}

RenderResult make_empty_render(const CameraIntrinsics& cam) {
    RenderResult r;
    r.depth = DepthImage(cam.width, cam.height, 0.0);
    r.mask = Mask(cam.width, cam.height, 0);
    r.face_normals = NormalMap(cam.width, cam.height);
    return r;
}

namespace {

constexpr double kNearPlane = 1e-3;

double edge_fn(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double px, double py) {
    return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
}

bool is_top_left(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    const double dx = b.x() - a.x();
    const double dy = b.y() - a.y();
    return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

}  // namespace

void render_into(const TriangleMesh& mesh, const CameraIntrinsics& cam, const Pose& pose, RenderResult& target) {
    std::vector<Vec3> cam_pts(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) cam_pts[i] = pose.apply(mesh.vertices[i]);

    for (const auto& tri : mesh.triangles) {
        Vec3 p[3] = {cam_pts[tri[0]], cam_pts[tri[1]], cam_pts[tri[2]]};
        if (p[0].z() < kNearPlane || p[1].z() < kNearPlane || p[2].z() < kNearPlane) continue;

        Vec3 normal = (p[1] - p[0]).cross(p[2] - p[0]);
        const double nn = normal.norm();
        if (nn == 0.0) continue;
        normal /= nn;
        if (normal.dot(p[0]) > 0.0) normal = -normal;

        Eigen::Vector2d s[3] = {cam.project(p[0]), cam.project(p[1]), cam.project(p[2])};
        double area = edge_fn(s[0], s[1], s[2].x(), s[2].y());
        if (area == 0.0) continue;
        if (area < 0.0) {
            std::swap(s[1], s[2]);
            std::swap(p[1], p[2]);
            area = -area;
        }
        const double inv_z[3] = {1.0 / p[0].z(), 1.0 / p[1].z(), 1.0 / p[2].z()};

        const double min_x = std::min({s[0].x(), s[1].x(), s[2].x()});
        const double max_x = std::max({s[0].x(), s[1].x(), s[2].x()});
        const double min_y = std::min({s[0].y(), s[1].y(), s[2].y()});
        const double max_y = std::max({s[0].y(), s[1].y(), s[2].y()});
        const int c0 = std::max(0, static_cast<int>(std::ceil(min_x)));
        const int c1 = std::min(cam.width - 1, static_cast<int>(std::floor(max_x)));
        const int r0 = std::max(0, static_cast<int>(std::ceil(min_y)));
        const int r1 = std::min(cam.height - 1, static_cast<int>(std::floor(max_y)));
        if (c0 > c1 || r0 > r1) continue;

        // Edge k is opposite vertex k.
        const bool tl[3] = {is_top_left(s[1], s[2]), is_top_left(s[2], s[0]), is_top_left(s[0], s[1])};

        for (int row = r0; row <= r1; ++row) {
            for (int col = c0; col <= c1; ++col) {
                const double w0 = edge_fn(s[1], s[2], col, row);
                const double w1 = edge_fn(s[2], s[0], col, row);
                const double w2 = edge_fn(s[0], s[1], col, row);
                if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
                if ((w0 == 0.0 && !tl[0]) || (w1 == 0.0 && !tl[1]) || (w2 == 0.0 && !tl[2])) continue;
                const double z = area / (w0 * inv_z[0] + w1 * inv_z[1] + w2 * inv_z[2]);
                double& cur = target.depth.at(row, col);
                if (cur != 0.0 && cur <= z) continue;
                cur = z;
                target.mask.at(row, col) = 1;
                target.face_normals.set(row, col, normal);
            }
        }
    }
}

RenderResult render_depth(const TriangleMesh& mesh, const CameraIntrinsics& cam, const Pose& pose) {
    RenderResult r = make_empty_render(cam);
    render_into(mesh, cam, pose, r);
    return r;
}

namespace {

DepthImage smooth_depth(const DepthImage& depth, int radius, double threshold) {
    DepthImage out(depth.width(), depth.height(), 0.0);
    for (int row = 0; row < depth.height(); ++row) {
        for (int col = 0; col < depth.width(); ++col) {
            const double center = depth.at(row, col);
            if (center <= 0.0) continue;
            double sum = 0.0;
            int n = 0;
            for (int dr = -radius; dr <= radius; ++dr) {
                for (int dc = -radius; dc <= radius; ++dc) {
                    const int r = row + dr;
                    const int c = col + dc;
                    if (!depth.contains(r, c)) continue;
                    const double d = depth.at(r, c);
                    if (d <= 0.0 || std::abs(d - center) > threshold) continue;
                    sum += d;
                    ++n;
                }
            }
            out.at(row, col) = sum / n;
        }
    }
    return out;
}

}  // namespace

NormalMap normals_from_depth(const DepthImage& raw, const CameraIntrinsics& cam, const NormalOptions& opt) {
    const DepthImage smoothed =
        opt.smoothing_radius > 0 ? smooth_depth(raw, opt.smoothing_radius, opt.discontinuity_threshold) : DepthImage{};
    const DepthImage& depth = opt.smoothing_radius > 0 ? smoothed : raw;
    const int s = std::max(1, opt.step);
    const double thr = opt.discontinuity_threshold;

    NormalMap out(depth.width(), depth.height());
    for (int row = s; row < depth.height() - s; ++row) {
        for (int col = s; col < depth.width() - s; ++col) {
            const double d = depth.at(row, col);
            if (d <= 0.0) continue;
            const double dl = depth.at(row, col - s);
            const double dr = depth.at(row, col + s);
            const double du = depth.at(row - s, col);
            const double dd = depth.at(row + s, col);
            if (dl <= 0.0 || dr <= 0.0 || du <= 0.0 || dd <= 0.0) continue;
            if (std::abs(dl - d) > thr || std::abs(dr - d) > thr || std::abs(du - d) > thr ||
                std::abs(dd - d) > thr) {
                continue;
            }
            const Vec3 horiz = cam.backproject(col + s, row, dr) - cam.backproject(col - s, row, dl);
            const Vec3 vert = cam.backproject(col, row + s, dd) - cam.backproject(col, row - s, du);
            Vec3 n = horiz.cross(vert);
            const double len = n.norm();
            if (len == 0.0) continue;
            n /= len;
            if (n.dot(cam.backproject(col, row, d)) > 0.0) n = -n;
            out.set(row, col, n);
        }
    }
    return out;
}

PointCloud backproject(const DepthImage& depth, const CameraIntrinsics& cam, const Mask* mask) {
    PointCloud cloud;
    const std::size_t n = depth.size();
    cloud.points.assign(n, PointCloud::invalid_point());
    cloud.valid.assign(n, 0);
    cloud.organized = GridDims{depth.height(), depth.width()};
    for (int row = 0; row < depth.height(); ++row) {
        for (int col = 0; col < depth.width(); ++col) {
            const double d = depth.at(row, col);
            if (d <= 0.0) continue;
            if (mask && mask->at(row, col) == 0) continue;
            const std::size_t i = static_cast<std::size_t>(row) * depth.width() + col;
            cloud.points[i] = cam.backproject(col, row, d);
            cloud.valid[i] = 1;
        }
    }
    return cloud;
}

GrayImage shade_intensity(const NormalMap& normals, const Vec3& light_dir) {
    GrayImage out(normals.width, normals.height, 0);
    for (std::size_t i = 0; i < normals.normals.size(); ++i) {
        if (!normals.valid[i]) continue;
        const double c = std::clamp(normals.normals[i].dot(light_dir), 0.0, 1.0);
        out[i] = static_cast<std::uint8_t>(std::lround(255.0 * c));
    }
    return out;
}

DepthImage quantize_depth_mm(const DepthImage& depth) {
    DepthImage out(depth.width(), depth.height(), 0.0);
    for (std::size_t i = 0; i < depth.size(); ++i) {
        if (depth[i] <= 0.0) continue;
        const double mm = std::min(65535.0, std::round(depth[i] * 1000.0));
        out[i] = mm / 1000.0;
    }
    return out;
}

}  // namespace tmpose
