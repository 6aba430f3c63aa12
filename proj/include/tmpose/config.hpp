#pragma once

#include "tmpose/pose.hpp"
#include "tmpose/render.hpp"
#include "tmpose/synth.hpp"
#include "tmpose/templates.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tmpose {

struct ObjectConfig {
    std::string mesh;  // path, resolved against the config file's directory
    int min_cluster_size = 3;
    double collision_threshold = 0.7;
    bool symmetric = false;
    bool operator==(const ObjectConfig&) const = default;
};

struct TrainingConfig {
    int viewpoints = 216;
    InplaneRange inplane{-60.0, 60.0, 10.0};
    std::vector<double> radii{0.6, 0.7, 0.8, 0.9, 1.0};
};

struct MatchingConfig {
    double threshold = 0.8;
    int spread = 4;  // T, half-width of the spreading neighbourhood
    int stride = 2;
};

/// Every tunable of the pipeline. Each key has a default, so an empty file is
/// a valid config (apart from needing at least one object to do anything).
struct PipelineConfig {
    CameraIntrinsics camera;
    TrainingConfig training;
    QuantizationConfig quantization;
    NormalOptions normals;
    MatchingConfig matching;
    int s_im = 16;
    /// 0 picks half the mean template side of the store.
    double nms_radius = 0.0;
    double orientation_threshold_deg = 15.0;
    double depth_gate = 0.03;
    /// Orientation clusters refined per hypothesis; the pose with the highest
    /// collision rate is kept.
    int orientation_candidates = 1;
    /// Render/segment/ICP passes per candidate.
    int refine_rounds = 1;
    RefineParams refine;
    double octree_resolution = 0.006;
    /// Model points whose pixel shows scene depth at least this much closer
    /// are treated as occluded and left out of the collision rate.
    double occlusion_margin = 0.02;
    double k_m = 0.15;
    NoiseParams noise;
    InstanceSampler sampler;
    int threads = 1;
    std::uint64_t seed = 1;
    std::map<std::string, ObjectConfig> objects;

    InitialPoseOptions initial_options() const {
        return {orientation_threshold_deg * M_PI / 180.0, depth_gate};
    }

    /// Throws ConfigError on out-of-range values or missing mesh files.
    void validate() const;
};

/// Parses the TOML-style config text. `base_dir` resolves relative mesh
/// paths. `overrides` are "dotted.key=value" strings applied on top of the
/// file, for example "matching.threshold=0.85" or "objects.cup.symmetric=true".
PipelineConfig parse_config(const std::string& text, const std::string& base_dir = ".",
                            const std::vector<std::string>& overrides = {});

/// Reads and parses a config file; throws IoError if it cannot be read.
PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Canonical text form; parse_config(dump_config(c)) reproduces c exactly.
std::string dump_config(const PipelineConfig& config);

}  // namespace tmpose
