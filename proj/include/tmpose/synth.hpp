#pragma once

#include "tmpose/geometry.hpp"
#include "tmpose/mesh.hpp"
#include "tmpose/render.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace tmpose {

struct SceneInstance {
    std::string object_id;
    Pose pose;
    bool operator==(const SceneInstance&) const = default;
};

struct NoiseParams {
    double depth_sigma = 0.002;  // meters
    double dropout = 0.05;       // fraction of object pixels invalidated
    /// Round depth to whole millimeters, as stored in 16-bit depth PNGs.
    bool quantize_mm = true;
    bool operator==(const NoiseParams&) const = default;
};

/// A rendered scene together with the poses that produced it.
struct GroundTruthScene {
    CameraIntrinsics camera;
    DepthImage depth;
    GrayImage intensity;
    NormalMap normals;
    std::vector<SceneInstance> instances;
    /// Mesh diameter per object id (meters).
    std::map<std::string, double> diameters;
    NoiseParams noise;
    std::uint64_t seed = 0;
};

using MeshMap = std::map<std::string, const TriangleMesh*>;

/// Composite z-buffer render of every instance. Intensity is shaded from the
/// noise-free surface normals; depth then receives Gaussian noise, dropout
/// over covered pixels and optional millimeter rounding, in that order.
/// Normals are recomputed from the final depth.
GroundTruthScene synth_scene(const MeshMap& meshes, const std::vector<SceneInstance>& instances,
                             const NoiseParams& noise, const CameraIntrinsics& cam, std::uint64_t seed,
                             const NormalOptions& normal_options = {});

struct InstanceSampler {
    int min_instances = 2;
    int max_instances = 5;
    double min_distance = 0.45;  // camera-z of the object center, meters
    double max_distance = 0.65;
    /// In-plane rotation about the viewing ray, degrees.
    double inplane_min_deg = -60.0;
    double inplane_max_deg = 60.0;
    /// Keep object centers this many pixels inside the image.
    int border = 40;
    /// Smallest visible share of an instance's solo render.
    double min_visible_fraction = 0.6;
    int max_attempts = 200;
};

/// Draws instances one at a time, rejecting candidates whose bounding spheres
/// overlap an earlier instance or that leave any instance less visible than
/// `min_visible_fraction`. Object ids are drawn uniformly from `meshes`.
std::vector<SceneInstance> sample_instances(const MeshMap& meshes, const InstanceSampler& sampler,
                                            const CameraIntrinsics& cam, std::mt19937_64& rng);

/// Radius of the smallest origin-centered sphere containing the mesh.
double bounding_radius(const TriangleMesh& mesh);

// Scene directories hold depth.png (16-bit mm), intensity.png and gt.json.
void save_scene(const std::string& dir, const GroundTruthScene& scene);
/// Normals are recomputed from the stored depth with `normal_options`.
GroundTruthScene load_scene(const std::string& dir, const NormalOptions& normal_options = {});

}  // namespace tmpose
