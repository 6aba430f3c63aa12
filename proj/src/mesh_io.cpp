#include "tmpose/mesh.hpp"

#include "tmpose/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace tmpose {

bool TriangleMesh::is_valid() const {
    if (triangles.empty()) return false;
    const int n = static_cast<int>(vertices.size());
    for (const auto& t : triangles) {
        for (int i : t) {
            if (i < 0 || i >= n) return false;
        }
    }
    return true;
}

TriangleMesh read_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    TriangleMesh mesh;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            Vec3 v;
            ls >> v.x() >> v.y() >> v.z();
            if (!ls) throw CorruptFile("OBJ: bad vertex line in " + path);
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ls >> tok) {
                const int raw = std::stoi(tok.substr(0, tok.find('/')));
                const int n = static_cast<int>(mesh.vertices.size());
                idx.push_back(raw < 0 ? n + raw : raw - 1);
            }
            for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
                mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
            }
        }
    }
    if (!mesh.is_valid()) throw CorruptFile("OBJ: invalid or empty mesh in " + path);
    return mesh;
}

void write_obj(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << std::setprecision(17);
    for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    if (!out) throw IoError("write failed: " + path);
}

double mesh_diameter(const TriangleMesh& mesh) {
    double best = 0.0;
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        for (std::size_t j = i + 1; j < mesh.vertices.size(); ++j) {
            best = std::max(best, (mesh.vertices[i] - mesh.vertices[j]).squaredNorm());
        }
    }
    return std::sqrt(best);
}

std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
    std::vector<double> cumulative;
    cumulative.reserve(mesh.triangles.size());
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t[0]];
        total += 0.5 * (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).norm();
        cumulative.push_back(total);
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<Vec3> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double pick = uni(rng) * total;
        auto it = std::lower_bound(cumulative.begin(), cumulative.end(), pick);
        if (it == cumulative.end()) --it;
        const auto& t = mesh.triangles[static_cast<std::size_t>(it - cumulative.begin())];
        double u = uni(rng);
        double v = uni(rng);
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        const Vec3& a = mesh.vertices[t[0]];
        out.push_back(a + u * (mesh.vertices[t[1]] - a) + v * (mesh.vertices[t[2]] - a));
    }
    return out;
}

namespace {

// Adds a parallelogram corner + s*e1 + t*e2, s,t in [0,1], as an n x n grid.
void add_quad(TriangleMesh& m, const Vec3& corner, const Vec3& e1, const Vec3& e2, int n1, int n2) {
    const int base = static_cast<int>(m.vertices.size());
    for (int j = 0; j <= n2; ++j) {
        for (int i = 0; i <= n1; ++i) {
            m.vertices.push_back(corner + e1 * (static_cast<double>(i) / n1) + e2 * (static_cast<double>(j) / n2));
        }
    }
    for (int j = 0; j < n2; ++j) {
        for (int i = 0; i < n1; ++i) {
            const int a = base + j * (n1 + 1) + i;
            const int b = a + 1;
            const int c = a + (n1 + 1);
            const int d = c + 1;
            m.triangles.push_back({a, b, d});
            m.triangles.push_back({a, d, c});
        }
    }
}

void center_on_bbox(TriangleMesh& m) {
    Vec3 lo = m.vertices.front();
    Vec3 hi = lo;
    for (const auto& v : m.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const Vec3 c = 0.5 * (lo + hi);
    for (auto& v : m.vertices) v -= c;
}

int grid_steps(double length, double reference, int subdivisions) {
    return std::max(1, static_cast<int>(std::lround(subdivisions * length / reference)));
}

}  // namespace

TriangleMesh make_box(const Vec3& s, int sub) {
    TriangleMesh m;
    const Vec3 o(0, 0, 0);
    const Vec3 ex(s.x(), 0, 0), ey(0, s.y(), 0), ez(0, 0, s.z());
    add_quad(m, o, ex, ey, sub, sub);
    add_quad(m, o + ez, ex, ey, sub, sub);
    add_quad(m, o, ex, ez, sub, sub);
    add_quad(m, o + ey, ex, ez, sub, sub);
    add_quad(m, o, ey, ez, sub, sub);
    add_quad(m, o + ex, ey, ez, sub, sub);
    center_on_bbox(m);
    return m;
}

TriangleMesh make_square(double side) {
    TriangleMesh m;
    add_quad(m, Vec3(-side / 2, -side / 2, 0), Vec3(side, 0, 0), Vec3(0, side, 0), 1, 1);
    return m;
}

TriangleMesh make_cylinder(double radius, double height, int segments, int hsub) {
    TriangleMesh m;
    const double h2 = height / 2;
    auto ring = [&](int k) {
        const double a = 2.0 * M_PI * k / segments;
        return Vec3(radius * std::cos(a), radius * std::sin(a), 0.0);
    };
    for (int k = 0; k < segments; ++k) {
        const Vec3 p0 = ring(k);
        const Vec3 p1 = ring(k + 1);
        add_quad(m, p0 + Vec3(0, 0, -h2), p1 - p0, Vec3(0, 0, height), 1, hsub);
    }
    for (const double z : {-h2, h2}) {
        const int c = static_cast<int>(m.vertices.size());
        m.vertices.emplace_back(0, 0, z);
        for (int k = 0; k < segments; ++k) m.vertices.push_back(ring(k) + Vec3(0, 0, z));
        for (int k = 0; k < segments; ++k) {
            m.triangles.push_back({c, c + 1 + k, c + 1 + (k + 1) % segments});
        }
    }
    return m;
}

TriangleMesh make_uv_sphere(double radius, int stacks, int slices) {
    if (stacks < 2 || slices < 3) throw DegenerateInput("make_uv_sphere: needs stacks >= 2 and slices >= 3");
    TriangleMesh m;
    // One vertex per pole; ring k (1..stacks-1) starts at 1 + (k-1)*slices.
    m.vertices.emplace_back(0.0, 0.0, radius);
    for (int i = 1; i < stacks; ++i) {
        const double theta = M_PI * i / stacks;
        for (int j = 0; j < slices; ++j) {
            const double phi = 2.0 * M_PI * j / slices;
            m.vertices.emplace_back(radius * std::sin(theta) * std::cos(phi),
                                    radius * std::sin(theta) * std::sin(phi),
                                    radius * std::cos(theta));
        }
    }
    const int bottom = static_cast<int>(m.vertices.size());
    m.vertices.emplace_back(0.0, 0.0, -radius);
    auto ring = [&](int i, int j) { return 1 + (i - 1) * slices + (j % slices); };
    for (int j = 0; j < slices; ++j) {
        m.triangles.push_back({0, ring(1, j + 1), ring(1, j)});
        for (int i = 1; i + 1 < stacks; ++i) {
            m.triangles.push_back({ring(i, j), ring(i, j + 1), ring(i + 1, j + 1)});
            m.triangles.push_back({ring(i, j), ring(i + 1, j + 1), ring(i + 1, j)});
        }
        m.triangles.push_back({ring(stacks - 1, j), ring(stacks - 1, j + 1), bottom});
    }
    return m;
}

TriangleMesh make_bracket(double long_leg, double short_leg, double wall, double depth, int sub) {
    TriangleMesh m;
    const double ref = std::max(long_leg, short_leg);
    // Profile corners (counter-clockwise) in the xy plane.
    const std::vector<Vec3> profile = {
        {0, 0, 0}, {long_leg, 0, 0}, {long_leg, wall, 0},
        {wall, wall, 0}, {wall, short_leg, 0}, {0, short_leg, 0},
    };
    const Vec3 ez(0, 0, depth);
    const int nz = grid_steps(depth, ref, sub);
    for (std::size_t k = 0; k < profile.size(); ++k) {
        const Vec3& a = profile[k];
        const Vec3& b = profile[(k + 1) % profile.size()];
        add_quad(m, a, b - a, ez, grid_steps((b - a).norm(), ref, sub), nz);
    }
    // Caps: the L splits into a long bar and the remaining short bar.
    for (const double z : {0.0, depth}) {
        const Vec3 off(0, 0, z);
        add_quad(m, off, Vec3(long_leg, 0, 0), Vec3(0, wall, 0), grid_steps(long_leg, ref, sub),
                 grid_steps(wall, ref, sub));
        add_quad(m, off + Vec3(0, wall, 0), Vec3(wall, 0, 0), Vec3(0, short_leg - wall, 0),
                 grid_steps(wall, ref, sub), grid_steps(short_leg - wall, ref, sub));
    }
    center_on_bbox(m);
    return m;
}

}  // namespace tmpose
