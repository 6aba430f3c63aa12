#pragma once

#include "tmpose/config.hpp"
#include "tmpose/detection.hpp"
#include "tmpose/pose.hpp"
#include "tmpose/synth.hpp"
#include "tmpose/templates.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace tmpose {

/// Meshes of every configured object, loaded from their config paths.
struct ObjectLibrary {
    std::map<std::string, TriangleMesh> meshes;

    MeshMap view() const;
    const TriangleMesh& mesh(const std::string& id) const;
};

ObjectLibrary load_objects(const PipelineConfig& config);

struct TrainReport {
    /// Templates kept per object.
    std::map<std::string, std::size_t> templates;
    /// Views rejected for too few features or an empty mask, per object.
    std::map<std::string, std::size_t> skipped;
};

/// Training views (sample_viewpoints order) rendered under `config.camera`.
std::vector<Pose> training_poses(const PipelineConfig& config);

/// Renders one training view and extracts its template.
Template train_view(const TriangleMesh& mesh, const std::string& object_id, const Pose& pose,
                    const PipelineConfig& config);

/// Builds a store holding every object in `object_ids`, in that order.
TemplateStore train_store(const PipelineConfig& config, const ObjectLibrary& objects,
                          const std::vector<std::string>& object_ids, TrainReport* report = nullptr);

enum class Stage { Match, Cluster, Filter, Score, Nms, Full };

/// Parses "match", "cluster", "filter", "score", "nms" or "full".
Stage parse_stage(const std::string& name);

struct DetectionRecord {
    std::string object_id;
    /// Mean top-left template position of the hypothesis (pixels).
    PixelPos position;
    double distance = 0.0;
    double gamma = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    int member_count = 0;
    /// Set once the hypothesis went through pose estimation.
    bool refined = false;
    Pose initial_pose;
    Pose pose;
    double fitness = 0.0;
    double inlier_fraction = 0.0;
    double phi = 0.0;
    bool accepted = false;
    bool no_correspondences = false;
};

struct StageCounts {
    std::size_t matches = 0;
    std::size_t clusters = 0;
    std::size_t filtered = 0;
    std::size_t scored = 0;
    std::size_t after_nms = 0;
    std::size_t refined = 0;
    std::size_t accepted = 0;
};

struct DetectResult {
    /// Accepted detections for a full run; every hypothesis alive after the
    /// last executed stage when stopped early.
    std::vector<DetectionRecord> detections;
    StageCounts counts;
    double nms_radius = 0.0;
};

using StageLogger = std::function<void(const std::string& stage, double seconds, std::size_t count)>;

struct SceneInput {
    const DepthImage* depth = nullptr;
    const GrayImage* intensity = nullptr;
    const NormalMap* normals = nullptr;
};

DetectResult detect(const PipelineConfig& config, const TemplateStore& store, const ObjectLibrary& objects,
                    const SceneInput& scene, Stage stop_after = Stage::Full, const StageLogger& log = {});

/// Model points for verification: the visible surface of the mesh rendered at
/// `pose`, expressed in the object frame, minus points the scene depth shows
/// to be hidden behind something closer than `occlusion_margin`.
PointCloud visible_model_points(const TriangleMesh& mesh, const CameraIntrinsics& cam, const Pose& pose,
                                const DepthImage& scene_depth, double occlusion_margin);

}  // namespace tmpose
