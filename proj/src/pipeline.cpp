#include "tmpose/pipeline.hpp"

#include "tmpose/error.hpp"
#include "tmpose/matching.hpp"
#include "tmpose/parallel.hpp"
#include "tmpose/verify.hpp"

#include <chrono>
#include <optional>

namespace tmpose {

MeshMap ObjectLibrary::view() const {
    MeshMap out;
    for (const auto& [id, mesh] : meshes) out[id] = &mesh;
    return out;
}

const TriangleMesh& ObjectLibrary::mesh(const std::string& id) const {
    auto it = meshes.find(id);
    if (it == meshes.end()) throw ConfigError("object not configured: " + id);
    return it->second;
}

ObjectLibrary load_objects(const PipelineConfig& config) {
    ObjectLibrary lib;
    for (const auto& [id, obj] : config.objects) {
        TriangleMesh mesh = read_obj(obj.mesh);
        if (!mesh.is_valid()) throw ConfigError("mesh for " + id + " has no valid triangles: " + obj.mesh);
        lib.meshes.emplace(id, std::move(mesh));
    }
    return lib;
}

std::vector<Pose> training_poses(const PipelineConfig& config) {
    return sample_viewpoints(config.training.viewpoints, config.training.inplane, config.training.radii);
}

Template train_view(const TriangleMesh& mesh, const std::string& object_id, const Pose& pose,
                    const PipelineConfig& config) {
    const RenderResult r = render_depth(mesh, config.camera, pose);
    const NormalMap normals = normals_from_depth(r.depth, config.camera, config.normals);
    const GrayImage intensity = shade_intensity(r.face_normals, default_light());
    return extract_template(intensity, r.depth, normals, r.mask, pose, object_id, config.quantization);
}

TemplateStore train_store(const PipelineConfig& config, const ObjectLibrary& objects,
                          const std::vector<std::string>& object_ids, TrainReport* report) {
    config.quantization.validate();
    TemplateStore store;
    store.config = config.quantization;
    store.camera = config.camera;
    const std::vector<Pose> poses = training_poses(config);
    for (const auto& id : object_ids) {
        const TriangleMesh& mesh = objects.mesh(id);
        std::vector<std::optional<Template>> slots(poses.size());
        parallel_for(poses.size(), config.threads, [&](std::size_t i) {
            try {
                slots[i] = train_view(mesh, id, poses[i], config);
            } catch (const TooFewFeatures&) {
            } catch (const EmptyMask&) {
            }
        });
        ObjectTemplates obj;
        obj.object_id = id;
        std::size_t skipped = 0;
        for (auto& s : slots) {
            if (s) {
                obj.templates.push_back(std::move(*s));
            } else {
                ++skipped;
            }
        }
        if (report) {
            report->templates[id] = obj.templates.size();
            report->skipped[id] = skipped;
        }
        store.objects.push_back(std::move(obj));
    }
    return store;
}

Stage parse_stage(const std::string& name) {
    if (name == "match") return Stage::Match;
    if (name == "cluster") return Stage::Cluster;
    if (name == "filter") return Stage::Filter;
    if (name == "score") return Stage::Score;
    if (name == "nms") return Stage::Nms;
    if (name == "full" || name.empty()) return Stage::Full;
    throw ConfigError("unknown stage: " + name);
}

PointCloud visible_model_points(const TriangleMesh& mesh, const CameraIntrinsics& cam, const Pose& pose,
                                const DepthImage& scene_depth, double occlusion_margin) {
    const RenderResult r = render_depth(mesh, cam, pose);
    const Pose to_object = pose.inverse();
    PointCloud out;
    for (int row = 0; row < cam.height; ++row) {
        for (int col = 0; col < cam.width; ++col) {
            if (!r.mask.at(row, col)) continue;
            const double md = r.depth.at(row, col);
            const double sd = scene_depth.contains(row, col) ? scene_depth.at(row, col) : 0.0;
            if (sd > 0.0 && sd < md - occlusion_margin) continue;
            out.push_back(to_object.apply(cam.backproject(col, row, md)));
        }
    }
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
}

DetectionRecord record_of(const Hypothesis& h) {
    DetectionRecord d;
    d.object_id = h.object_id;
    d.position = h.position;
    d.distance = h.train_distance;
    d.gamma = h.score;
    d.alpha = h.alpha;
    d.beta = h.beta;
    d.member_count = static_cast<int>(h.members.size());
    return d;
}

Mask dilate(const Mask& m, int radius) {
    Mask rows(m.width(), m.height(), 0);
    for (int r = 0; r < m.height(); ++r) {
        for (int c = 0; c < m.width(); ++c) {
            for (int dc = -radius; dc <= radius && !rows.at(r, c); ++dc) {
                if (m.contains(r, c + dc) && m.at(r, c + dc)) rows.at(r, c) = 1;
            }
        }
    }
    Mask out(m.width(), m.height(), 0);
    for (int r = 0; r < m.height(); ++r) {
        for (int c = 0; c < m.width(); ++c) {
            for (int dr = -radius; dr <= radius && !out.at(r, c); ++dr) {
                if (rows.contains(r + dr, c) && rows.at(r + dr, c)) out.at(r, c) = 1;
            }
        }
    }
    return out;
}

constexpr int kSegmentDilation = 3;
// Visible-model share that must survive the occlusion test for phi to count.
constexpr double kMinUnoccluded = 0.3;
constexpr std::size_t kMinSegment = 10;

struct Refiner {
    const PipelineConfig& config;
    const TemplateStore& store;
    const ObjectLibrary& objects;
    const DepthImage& depth;

    // Scene points under the dilated render mask, limited to a ball around
    // the object center.
    PointCloud segment_scene(const Mask& mask, const Pose& pose, const TriangleMesh& mesh) const {
        const CameraIntrinsics& cam = config.camera;
        const Mask grown = dilate(mask, kSegmentDilation);
        const double reach = 1.25 * bounding_radius(mesh);
        PointCloud segment;
        for (int r = 0; r < cam.height; ++r) {
            for (int c = 0; c < cam.width; ++c) {
                const double d = depth.at(r, c);
                if (!grown.at(r, c) || d <= 0.0) continue;
                const Vec3 p = cam.backproject(c, r, d);
                if ((p - pose.translation).norm() <= reach) segment.push_back(p);
            }
        }
        return segment;
    }

    // Refines one initial pose into `rec` and fills in the verification.
    void refine(DetectionRecord& rec, const TriangleMesh& mesh) const {
        const CameraIntrinsics& cam = config.camera;
        // Each round re-renders the model and re-segments the scene at the
        // current pose before aligning.
        for (int round = 0; round < config.refine_rounds; ++round) {
            const RenderResult at_pose = render_depth(mesh, cam, rec.pose);
            const PointCloud segment = segment_scene(at_pose.mask, rec.pose, mesh);
            if (segment.size() < kMinSegment) return;
            const PointCloud smoothed = mls_smooth(segment, config.refine.mls_radius, config.refine.mls_order);
            const PointCloud scene_cloud = voxel_downsample(smoothed, config.refine.voxel_leaf);

            PointCloud model;
            const Pose to_object = rec.pose.inverse();
            for (int r = 0; r < cam.height; ++r) {
                for (int c = 0; c < cam.width; ++c) {
                    if (at_pose.mask.at(r, c)) {
                        model.push_back(to_object.apply(cam.backproject(c, r, at_pose.depth.at(r, c))));
                    }
                }
            }
            const PointCloud model_cloud = voxel_downsample(model, config.refine.voxel_leaf);
            if (model_cloud.size() < 3 || scene_cloud.size() < 3) return;

            const PoseEstimate est = icp_refine(model_cloud, scene_cloud, rec.pose, config.refine);
            rec.pose = est.pose;
            rec.fitness = est.fitness;
            rec.inlier_fraction = est.inlier_fraction;
            rec.no_correspondences = est.no_correspondences;
            if (est.no_correspondences) break;
        }

        // Verification runs against the smoothed scene segment under the
        // refined pose.
        const RenderResult at_final = render_depth(mesh, cam, rec.pose);
        std::size_t rendered = 0;
        for (std::size_t i = 0; i < at_final.mask.size(); ++i) rendered += at_final.mask[i];
        const PointCloud visible = visible_model_points(mesh, cam, rec.pose, depth, config.occlusion_margin);
        const PointCloud final_segment = segment_scene(at_final.mask, rec.pose, mesh);
        if (rendered > 0 && final_segment.size() >= kMinSegment &&
            static_cast<double>(visible.size()) >= kMinUnoccluded * static_cast<double>(rendered)) {
            const PointCloud verify_cloud = mls_smooth(final_segment, config.refine.mls_radius, config.refine.mls_order);
            rec.phi = collision_rate(visible, rec.pose, build_octree(verify_cloud, config.octree_resolution));
        }
    }

    DetectionRecord run(const Hypothesis& hyp) const {
        const DetectionRecord base = record_of(hyp);
        const TriangleMesh& mesh = objects.mesh(hyp.object_id);

        std::vector<InitialPose> inits;
        try {
            inits = initial_pose_candidates(hyp, store, depth, config.camera, mesh, config.orientation_candidates,
                                            config.initial_options());
        } catch (const EmptySegment&) {
            return base;
        } catch (const DegenerateCluster&) {
            return base;
        }

        DetectionRecord best;
        for (std::size_t i = 0; i < inits.size(); ++i) {
            DetectionRecord rec = base;
            rec.refined = true;
            rec.initial_pose = inits[i].pose;
            rec.pose = inits[i].pose;
            refine(rec, mesh);
            if (i == 0 || rec.phi > best.phi) best = std::move(rec);
        }
        best.accepted = accept(best.phi, config.objects.at(hyp.object_id).collision_threshold);
        return best;
    }
};

}  // namespace

DetectResult detect(const PipelineConfig& config, const TemplateStore& store, const ObjectLibrary& objects,
                    const SceneInput& scene, Stage stop_after, const StageLogger& log) {
    if (!scene.depth || !scene.intensity || !scene.normals) throw DegenerateInput("detect: incomplete scene input");
    if (!(store.camera == config.camera)) {
        throw ConfigError("template store was trained with a different camera than the config");
    }
    for (const auto& obj : store.objects) {
        if (!config.objects.count(obj.object_id)) throw ConfigError("store object not in config: " + obj.object_id);
    }
    const DepthImage& depth = *scene.depth;
    if (depth.width() != config.camera.width || depth.height() != config.camera.height) {
        throw ConfigError("scene size does not match the camera");
    }
    auto note = [&](const char* stage, Clock::time_point t, std::size_t n) {
        if (log) log(stage, seconds_since(t), n);
    };

    DetectResult result;
    auto t = Clock::now();
    const QuantizedScene q = quantize_scene(*scene.intensity, depth, *scene.normals, config.matching.spread, store.config);
    const std::vector<Match> matches =
        match_templates(q, store, config.matching.threshold, config.matching.stride, config.threads);
    result.counts.matches = matches.size();
    note("match", t, matches.size());
    if (stop_after == Stage::Match) {
        for (const auto& m : matches) {
            DetectionRecord d;
            d.object_id = m.object_id;
            d.position = {static_cast<double>(m.row), static_cast<double>(m.col)};
            d.distance = m.train_distance;
            d.gamma = m.similarity;
            d.member_count = 1;
            result.detections.push_back(d);
        }
        return result;
    }

    t = Clock::now();
    std::vector<Hypothesis> hyps = cluster_matches(matches, config.s_im);
    result.counts.clusters = hyps.size();
    note("cluster", t, hyps.size());
    auto emit = [&](const std::vector<Hypothesis>& hs) {
        for (const auto& h : hs) result.detections.push_back(record_of(h));
        return result;
    };
    if (stop_after == Stage::Cluster) return emit(hyps);

    std::vector<Hypothesis> kept;
    for (auto& h : hyps) {
        if (static_cast<int>(h.members.size()) >= config.objects.at(h.object_id).min_cluster_size) {
            kept.push_back(std::move(h));
        }
    }
    hyps = std::move(kept);
    result.counts.filtered = hyps.size();
    if (stop_after == Stage::Filter) return emit(hyps);

    t = Clock::now();
    const MeshTemplateRenderer views(objects.view(), config.camera, config.normals);
    std::vector<Hypothesis> scored(hyps.size());
    parallel_for(hyps.size(), config.threads, [&](std::size_t i) {
        scored[i] = score_hypothesis(hyps[i], depth, *scene.normals, store, views);
    });
    hyps.clear();
    for (auto& h : scored) {
        if (!h.no_valid_pairs) hyps.push_back(std::move(h));
    }
    result.counts.scored = hyps.size();
    note("score", t, hyps.size());
    if (stop_after == Stage::Score) return emit(hyps);

    t = Clock::now();
    double radius = config.nms_radius;
    if (radius <= 0.0) {
        double side = 0.0;
        std::size_t n = 0;
        for (const auto& obj : store.objects) {
            for (const auto& tpl : obj.templates) {
                side += 0.5 * (tpl.rows + tpl.cols);
                ++n;
            }
        }
        radius = n ? 0.5 * side / static_cast<double>(n) : 1.0;
    }
    result.nms_radius = radius;
    hyps = nms(hyps, radius);
    result.counts.after_nms = hyps.size();
    note("nms", t, hyps.size());
    if (stop_after == Stage::Nms) return emit(hyps);

    t = Clock::now();
    std::vector<DetectionRecord> records(hyps.size());
    const Refiner refiner{config, store, objects, depth};
    parallel_for(hyps.size(), config.threads, [&](std::size_t i) { records[i] = refiner.run(hyps[i]); });
    for (auto& r : records) {
        if (r.refined) ++result.counts.refined;
        if (r.accepted) result.detections.push_back(std::move(r));
    }
    result.counts.accepted = result.detections.size();
    note("refine+verify", t, result.detections.size());
    return result;
}

}  // namespace tmpose
