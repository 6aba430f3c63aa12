#include "tmpose/geometry.hpp"

#include "tmpose/error.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace tmpose {

bool Pose::is_valid(double tol) const {
    const Mat3 should_be_identity = rotation.transpose() * rotation;
    if ((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(rotation.determinant() - 1.0) <= tol && translation.allFinite();
}

std::size_t PointCloud::valid_count() const {
    if (valid.empty()) return points.size();
    std::size_t n = 0;
    for (auto v : valid) n += v != 0;
    return n;
}

PointCloud PointCloud::compacted() const {
    PointCloud out;
    out.points.reserve(valid_count());
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!is_valid(i)) continue;
        out.points.push_back(points[i]);
        if (has_normals()) out.normals.push_back(normals[i]);
    }
    out.valid.assign(out.points.size(), 1);
    return out;
}

Vec3 PointCloud::invalid_point() {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan};
}

PointCloud make_cloud(std::vector<Vec3> points) {
    PointCloud c;
    c.points = std::move(points);
    c.valid.assign(c.points.size(), 1);
    return c;
}

AxisAngle axis_angle_between(const Mat3& a, const Mat3& b) {
    const Mat3 rel = a.transpose() * b;
    const Eigen::AngleAxisd aa(Eigen::Quaterniond(rel).normalized());
    AxisAngle out;
    out.angle = aa.angle();
    if (out.angle > M_PI) {
        out.angle = 2.0 * M_PI - out.angle;
        out.axis = -aa.axis();
    } else {
        out.axis = aa.axis();
    }
    if (out.angle == 0.0 || !out.axis.allFinite()) {
        out.angle = 0.0;
        out.axis = Vec3::UnitZ();
    }
    return out;
}

Mat3 rotation_from_axis_angle(const AxisAngle& aa) {
    return Eigen::AngleAxisd(aa.angle, aa.axis.normalized()).toRotationMatrix();
}

double rotation_angle(const Mat3& a, const Mat3& b) {
    return axis_angle_between(a, b).angle;
}

namespace {

Pose kabsch_core(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
    const std::size_t n = src.size();
    if (n < 3 || dst.size() != n) {
        throw DegenerateInput("kabsch_align needs >= 3 paired points");
    }
    Vec3 cs = Vec3::Zero();
    Vec3 cd = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        cs += src[i];
        cd += dst[i];
    }
    cs /= static_cast<double>(n);
    cd /= static_cast<double>(n);

    Mat3 h = Mat3::Zero();
    double spread = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 a = src[i] - cs;
        h += a * (dst[i] - cd).transpose();
        spread += a.squaredNorm();
    }
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sv = svd.singularValues();
    // Collinear (or coincident) data leaves at most one non-zero singular value.
    if (spread <= 0.0 || sv(1) <= 1e-12 * std::max(sv(0), 1e-300)) {
        throw DegenerateInput("kabsch_align: rank-deficient covariance");
    }
    Mat3 v = svd.matrixV();
    const Mat3 u = svd.matrixU();
    if ((v * u.transpose()).determinant() < 0.0) v.col(2) *= -1.0;

    Pose out;
    out.rotation = v * u.transpose();
    out.translation = cd - out.rotation * cs;
    return out;
}

}  // namespace

Pose kabsch_align(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
    return kabsch_core(src, dst);
}

Pose kabsch_align(const PointCloud& src, const PointCloud& dst) {
    if (src.size() != dst.size()) throw DegenerateInput("kabsch_align: point counts differ");
    std::vector<Vec3> a;
    std::vector<Vec3> b;
    a.reserve(src.size());
    b.reserve(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (!src.is_valid(i) || !dst.is_valid(i)) continue;
        a.push_back(src.points[i]);
        b.push_back(dst.points[i]);
    }
    return kabsch_core(a, b);
}

PointCloud transform_cloud(const Pose& pose, const PointCloud& cloud) {
    PointCloud out = cloud;
    for (std::size_t i = 0; i < out.points.size(); ++i) {
        if (!out.is_valid(i)) continue;
        out.points[i] = pose.apply(cloud.points[i]);
        if (out.has_normals()) out.normals[i] = pose.rotation * cloud.normals[i];
    }
    return out;
}

Vec3 centroid(const PointCloud& cloud) {
    Vec3 sum = Vec3::Zero();
    std::size_t n = 0;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        if (!cloud.is_valid(i)) continue;
        sum += cloud.points[i];
        ++n;
    }
    if (n == 0) throw EmptyCloud("centroid of a cloud without valid points");
    return sum / static_cast<double>(n);
}

Eigen::Quaterniond to_quaternion(const Mat3& r) {
    Eigen::Quaterniond q(r);
    q.normalize();
    if (q.w() < 0.0) q.coeffs() *= -1.0;
    return q;
}

Mat3 from_quaternion(const Eigen::Quaterniond& q) {
    return q.normalized().toRotationMatrix();
}

Mat3 project_to_rotation(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    const Mat3 v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
    return u * v.transpose();
}

Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

Mat3 rotation_between_vectors(const Vec3& from, const Vec3& to) {
    return Eigen::Quaterniond::FromTwoVectors(from, to).toRotationMatrix();
}

// ---------------------------------------------------------------------------
// PLY

void write_ply(const std::string& path, const PointCloud& cloud, PlyFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    const std::size_t n = cloud.valid_count();
    const bool normals = cloud.has_normals();
    out << "ply\n"
        << (format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
        << "element vertex " << n << "\n"
        << "property float x\nproperty float y\nproperty float z\n";
    if (normals) out << "property float nx\nproperty float ny\nproperty float nz\n";
    out << "end_header\n";
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!cloud.is_valid(i)) continue;
        float v[6];
        for (int k = 0; k < 3; ++k) v[k] = static_cast<float>(cloud.points[i][k]);
        if (normals) {
            for (int k = 0; k < 3; ++k) v[3 + k] = static_cast<float>(cloud.normals[i][k]);
        }
        const int count = normals ? 6 : 3;
        if (format == PlyFormat::Ascii) {
            for (int k = 0; k < count; ++k) out << (k ? " " : "") << v[k];
            out << "\n";
        } else {
            static_assert(sizeof(float) == 4);
            for (int k = 0; k < count; ++k) {
                unsigned char bytes[4];
                std::memcpy(bytes, &v[k], 4);
                out.write(reinterpret_cast<const char*>(bytes), 4);
            }
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

namespace {

struct PlyProperty {
    std::string name;
    std::string type;
    bool is_list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
};

int ply_type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    throw CorruptFile("PLY: unknown property type " + t);
}

double ply_read_binary(std::istream& in, const std::string& t) {
    unsigned char buf[8];
    const int size = ply_type_size(t);
    in.read(reinterpret_cast<char*>(buf), size);
    if (!in) throw CorruptFile("PLY: truncated binary data");
    if (t == "float" || t == "float32") {
        float f;
        std::memcpy(&f, buf, 4);
        return f;
    }
    if (t == "double" || t == "float64") {
        double d;
        std::memcpy(&d, buf, 8);
        return d;
    }
    if (t == "char" || t == "int8") return static_cast<std::int8_t>(buf[0]);
    if (t == "uchar" || t == "uint8") return buf[0];
    if (t == "short" || t == "int16") {
        std::int16_t v;
        std::memcpy(&v, buf, 2);
        return v;
    }
    if (t == "ushort" || t == "uint16") {
        std::uint16_t v;
        std::memcpy(&v, buf, 2);
        return v;
    }
    if (t == "int" || t == "int32") {
        std::int32_t v;
        std::memcpy(&v, buf, 4);
        return v;
    }
    std::uint32_t v;
    std::memcpy(&v, buf, 4);
    return v;
}

}  // namespace

PointCloud read_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    std::getline(in, line);
    if (line.rfind("ply", 0) != 0) throw CorruptFile("not a PLY file: " + path);

    bool ascii = false;
    std::vector<PlyElement> elements;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii") {
                ascii = true;
            } else if (fmt != "binary_little_endian") {
                throw CorruptFile("PLY: unsupported format " + fmt);
            }
        } else if (word == "element") {
            PlyElement e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (word == "property") {
            if (elements.empty()) throw CorruptFile("PLY: property before element");
            PlyProperty p;
            ls >> p.type;
            if (p.type == "list") {
                p.is_list = true;
                ls >> p.count_type >> p.type;
            }
            ls >> p.name;
            elements.back().props.push_back(p);
        } else if (word == "end_header") {
            break;
        }
    }
    if (!in) throw CorruptFile("PLY: missing end_header");

    PointCloud cloud;
    for (const auto& e : elements) {
        const bool is_vertex = e.name == "vertex";
        int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
        for (int k = 0; k < static_cast<int>(e.props.size()); ++k) {
            const auto& n = e.props[k].name;
            if (n == "x") ix = k;
            if (n == "y") iy = k;
            if (n == "z") iz = k;
            if (n == "nx") inx = k;
            if (n == "ny") iny = k;
            if (n == "nz") inz = k;
        }
        if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) throw CorruptFile("PLY: vertex lacks x/y/z");
        const bool has_n = inx >= 0 && iny >= 0 && inz >= 0;
        std::vector<double> values(e.props.size());
        for (std::size_t i = 0; i < e.count; ++i) {
            if (ascii) {
                if (!std::getline(in, line)) throw CorruptFile("PLY: truncated ascii data");
                std::istringstream ls(line);
                for (std::size_t k = 0; k < e.props.size(); ++k) {
                    if (e.props[k].is_list) {
                        std::size_t cnt = 0;
                        ls >> cnt;
                        double skip;
                        for (std::size_t j = 0; j < cnt; ++j) ls >> skip;
                    } else {
                        ls >> values[k];
                    }
                }
                if (!ls && !ls.eof()) throw CorruptFile("PLY: bad ascii row");
            } else {
                for (std::size_t k = 0; k < e.props.size(); ++k) {
                    if (e.props[k].is_list) {
                        const auto cnt = static_cast<std::size_t>(ply_read_binary(in, e.props[k].count_type));
                        for (std::size_t j = 0; j < cnt; ++j) ply_read_binary(in, e.props[k].type);
                    } else {
                        values[k] = ply_read_binary(in, e.props[k].type);
                    }
                }
            }
            if (!is_vertex) continue;
            const Vec3 p(values[ix], values[iy], values[iz]);
            if (has_n) {
                cloud.push_back(p, Vec3(values[inx], values[iny], values[inz]));
            } else {
                cloud.push_back(p);
            }
        }
    }
    return cloud;
}

}  // namespace tmpose
