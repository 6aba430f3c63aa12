#pragma once

#include "tmpose/geometry.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace tmpose {

/// Triangle mesh in the object frame (meters).
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    /// Indices in range and at least one triangle.
    bool is_valid() const;
};

/// Reads `v x y z` and `f a b c ...` lines; polygons are fan-triangulated and
/// `a/b/c` index forms and negative indices are accepted.
TriangleMesh read_obj(const std::string& path);
void write_obj(const std::string& path, const TriangleMesh& mesh);

/// Largest vertex-to-vertex distance.
double mesh_diameter(const TriangleMesh& mesh);

/// Area-weighted uniform surface samples.
std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);

// Procedural meshes. All are centered on their bounding-box center and each
// planar face is split into a grid so vertex sets are dense enough for the
// vertex-averaged pose metrics.
TriangleMesh make_box(const Vec3& size, int subdivisions = 1);
TriangleMesh make_cylinder(double radius, double height, int segments, int height_subdivisions = 1);
TriangleMesh make_uv_sphere(double radius, int stacks, int slices);
/// Axis-aligned square in the z = 0 plane, side length `side`.
TriangleMesh make_square(double side);
/// L-shaped extruded profile: legs of length `long_leg` (x) and `short_leg`
/// (y), wall thickness `wall`, extrusion depth `depth` (z).
TriangleMesh make_bracket(double long_leg, double short_leg, double wall, double depth, int subdivisions = 4);

}  // namespace tmpose
