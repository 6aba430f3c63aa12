// tmpose: train templates, synthesize scenes, detect and evaluate.
//
// Exit codes: 0 ok, 1 config or schema error, 2 I/O error.

#include "tmpose/config.hpp"
#include "tmpose/error.hpp"
#include "tmpose/eval.hpp"
#include "tmpose/pipeline.hpp"
#include "tmpose/report.hpp"
#include "tmpose/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace tmpose;

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    bool verbose = false;

    PipelineConfig load() const {
        PipelineConfig c = config_path.empty() ? parse_config("", ".", overrides) : load_config(config_path, overrides);
        c.validate();
        return c;
    }
};

void add_common(CLI::App* app, Common& c, bool config_required = true) {
    auto* opt = app->add_option("-c,--config", c.config_path, "Pipeline config file");
    if (config_required) opt->required();
    app->add_option("--set", c.overrides, "Override a config key, e.g. --set matching.threshold=0.85");
    app->add_flag("-v,--verbose", c.verbose, "Stage timings and counts on standard error");
}

StageLogger stderr_logger(bool verbose) {
    if (!verbose) return {};
    return [](const std::string& stage, double seconds, std::size_t count) {
        std::fprintf(stderr, "[%-13s] %8.3f s  %zu\n", stage.c_str(), seconds, count);
    };
}

std::vector<std::string> object_ids(const PipelineConfig& config, const std::vector<std::string>& requested) {
    if (requested.empty()) {
        std::vector<std::string> all;
        for (const auto& [id, o] : config.objects) all.push_back(id);
        return all;
    }
    for (const auto& id : requested) {
        if (!config.objects.count(id)) throw ConfigError("object not in config: " + id);
    }
    return requested;
}

int cmd_train(const Common& common, const std::vector<std::string>& requested, const std::string& out) {
    const PipelineConfig config = common.load();
    const auto ids = object_ids(config, requested);
    if (ids.empty()) throw ConfigError("no objects to train");
    const ObjectLibrary lib = load_objects(config);
    TrainReport report;
    const TemplateStore store = train_store(config, lib, ids, &report);
    store_save(store, out);
    for (const auto& id : ids) {
        std::printf("%s: %zu templates (%zu views skipped)\n", id.c_str(), report.templates[id], report.skipped[id]);
    }
    std::printf("total: %zu templates\n", store.template_count());
    return 0;
}

int cmd_synth(const Common& common, const std::string& out, int count, std::int64_t seed_override) {
    PipelineConfig config = common.load();
    if (seed_override >= 0) config.seed = static_cast<std::uint64_t>(seed_override);
    const ObjectLibrary lib = load_objects(config);
    if (lib.meshes.empty()) throw ConfigError("no objects configured");
    const MeshMap meshes = lib.view();
    for (int i = 0; i < count; ++i) {
        const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(i);
        std::mt19937_64 rng(seed);
        const auto instances = sample_instances(meshes, config.sampler, config.camera, rng);
        const GroundTruthScene scene = synth_scene(meshes, instances, config.noise, config.camera, seed, config.normals);
        char name[32];
        std::snprintf(name, sizeof name, "scene_%03d", i);
        const std::string dir = count == 1 ? out : (fs::path(out) / name).string();
        save_scene(dir, scene);
        std::printf("%s: %zu instances\n", dir.c_str(), instances.size());
    }
    return 0;
}

int cmd_detect(const Common& common, const std::string& store_path, const std::string& scene_dir,
               const std::string& out, const std::string& stop_after, const std::string& ply_dir) {
    const PipelineConfig config = common.load();
    const Stage stage = parse_stage(stop_after);
    const TemplateStore store = store_load(store_path);
    const ObjectLibrary lib = load_objects(config);
    const GroundTruthScene scene = load_scene(scene_dir, config.normals);
    if (!(scene.camera == config.camera)) throw ConfigError("scene camera differs from the config camera");
    const SceneInput input{&scene.depth, &scene.intensity, &scene.normals};
    const DetectResult result = detect(config, store, lib, input, stage, stderr_logger(common.verbose));
    write_text(out, detections_to_json(result, stage));
    if (!ply_dir.empty() && stage == Stage::Full) {
        fs::create_directories(ply_dir);
        for (std::size_t i = 0; i < result.detections.size(); ++i) {
            const auto& d = result.detections[i];
            PointCloud cloud;
            for (const auto& v : lib.mesh(d.object_id).vertices) cloud.push_back(d.pose.apply(v));
            write_ply((fs::path(ply_dir) / ("detection_" + std::to_string(i) + "_" + d.object_id + ".ply")).string(),
                      cloud);
        }
    }
    return 0;
}

int cmd_evaluate(const Common& common, const std::string& detections_path, const std::string& gt_dir,
                 const std::string& out) {
    const PipelineConfig config = common.load();
    const ObjectLibrary lib = load_objects(config);
    const auto detections = detections_from_json(read_text(detections_path));
    const GroundTruthScene gt = load_scene(gt_dir, config.normals);
    std::map<std::string, EvalObject> objects;
    for (const auto& [id, o] : config.objects) {
        const TriangleMesh& mesh = lib.mesh(id);
        objects[id] = {&mesh, mesh_diameter(mesh), o.symmetric};
    }
    for (const auto& d : detections) {
        if (!objects.count(d.object_id)) throw ConfigError("detection of unknown object " + d.object_id);
    }
    for (const auto& inst : gt.instances) {
        if (!objects.count(inst.object_id)) throw ConfigError("ground truth of unknown object " + inst.object_id);
    }
    const EvalReport report = evaluate(detections, gt.instances, objects, config.k_m);
    write_text(out, report_to_json(report));
    std::cout << report_to_table(report);
    return 0;
}

int cmd_viz(const Common& common, const std::string& detections_path, const std::string& scene_dir,
            const std::string& out_dir) {
    const PipelineConfig config = common.load();
    const ObjectLibrary lib = load_objects(config);
    const auto detections = detections_from_json(read_text(detections_path));
    const GroundTruthScene scene = load_scene(scene_dir, config.normals);
    fs::create_directories(out_dir);

    // Dimmed intensity with each detection's silhouette outline drawn white.
    GrayImage overlay = scene.intensity;
    for (auto& px : overlay.data()) px = static_cast<std::uint8_t>(px / 2);
    for (std::size_t i = 0; i < detections.size(); ++i) {
        const auto& d = detections[i];
        const TriangleMesh& mesh = lib.mesh(d.object_id);
        const RenderResult r = render_depth(mesh, config.camera, d.pose);
        for (int row = 0; row < r.mask.height(); ++row) {
            for (int col = 0; col < r.mask.width(); ++col) {
                if (!r.mask.at(row, col)) continue;
                const bool edge = !r.mask.contains(row - 1, col) || !r.mask.at(row - 1, col) ||
                                  !r.mask.contains(row + 1, col) || !r.mask.at(row + 1, col) ||
                                  !r.mask.contains(row, col - 1) || !r.mask.at(row, col - 1) ||
                                  !r.mask.contains(row, col + 1) || !r.mask.at(row, col + 1);
                if (edge) overlay.at(row, col) = 255;
            }
        }
        PointCloud cloud;
        for (const auto& v : mesh.vertices) cloud.push_back(d.pose.apply(v));
        write_ply((fs::path(out_dir) / ("detection_" + std::to_string(i) + "_" + d.object_id + ".ply")).string(),
                  cloud);
    }
    write_gray_png((fs::path(out_dir) / "overlay.png").string(), overlay);
    write_ply((fs::path(out_dir) / "scene.ply").string(), backproject(scene.depth, scene.camera).compacted());
    std::printf("%zu detections drawn to %s\n", detections.size(), out_dir.c_str());
    return 0;
}

int cmd_make_mesh(const std::string& shape, const std::vector<double>& dims, const std::string& out) {
    auto need = [&](std::size_t n) {
        if (dims.size() != n) throw ConfigError(shape + " needs " + std::to_string(n) + " dimensions");
    };
    TriangleMesh mesh;
    if (shape == "box") {
        need(3);
        mesh = make_box(Vec3(dims[0], dims[1], dims[2]), 4);
    } else if (shape == "cylinder") {
        need(2);
        mesh = make_cylinder(dims[0], dims[1], 48, 6);
    } else if (shape == "sphere") {
        need(1);
        mesh = make_uv_sphere(dims[0], 24, 48);
    } else if (shape == "bracket") {
        need(4);
        mesh = make_bracket(dims[0], dims[1], dims[2], dims[3]);
    } else {
        throw ConfigError("unknown shape " + shape + " (box, cylinder, sphere, bracket)");
    }
    write_obj(out, mesh);
    std::printf("%s: %zu vertices, %zu triangles, diameter %.4f m\n", out.c_str(), mesh.vertices.size(),
                mesh.triangles.size(), mesh_diameter(mesh));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-instance object detection and pose estimation from RGB-D images"};
    app.require_subcommand(1);

    Common common;
    std::vector<std::string> objects;
    std::string out;
    std::string store_path;
    std::string scene_dir;
    std::string detections_path;
    std::string stop_after = "full";
    std::string ply_dir;
    int count = 1;
    std::int64_t seed = -1;
    std::string shape;
    std::vector<double> dims;

    auto* train = app.add_subcommand("train", "Render training views and write a template store");
    add_common(train, common);
    train->add_option("--objects", objects, "Object ids to train (default: all)")->delimiter(',');
    train->add_option("-o,--out", out, "Output .tmstore")->required();

    auto* synth = app.add_subcommand("synth", "Generate synthetic scenes with ground truth");
    add_common(synth, common);
    synth->add_option("-o,--out", out, "Output scene directory")->required();
    synth->add_option("-n,--count", count, "Number of scenes (subdirectories scene_NNN when > 1)")
        ->check(CLI::PositiveNumber);
    synth->add_option("--seed", seed, "Seed (default: config seed)");

    auto* det = app.add_subcommand("detect", "Detect objects and estimate their poses");
    add_common(det, common);
    det->add_option("-s,--store", store_path, "Template store")->required();
    det->add_option("--scene", scene_dir, "Scene directory")->required();
    det->add_option("-o,--out", out, "Output JSON ('-' for standard output)")->required();
    det->add_option("--stop-after", stop_after, "match, cluster, filter, score, nms or full");
    det->add_option("--ply", ply_dir, "Write posed model clouds here");

    auto* ev = app.add_subcommand("evaluate", "Score detections against ground truth");
    add_common(ev, common);
    ev->add_option("-d,--detections", detections_path, "Detections JSON")->required();
    ev->add_option("--gt", scene_dir, "Ground-truth scene directory")->required();
    ev->add_option("-o,--out", out, "Report JSON ('-' for standard output)")->required();

    auto* viz = app.add_subcommand("viz", "Render detection overlays and clouds");
    add_common(viz, common);
    viz->add_option("-d,--detections", detections_path, "Detections JSON")->required();
    viz->add_option("--scene", scene_dir, "Scene directory")->required();
    viz->add_option("-o,--out", out, "Output directory")->required();

    auto* dump = app.add_subcommand("config", "Print the effective config in canonical form");
    add_common(dump, common, false);

    auto* mk = app.add_subcommand("make-mesh", "Write a procedural mesh as OBJ (meters)");
    mk->add_option("shape", shape, "box, cylinder, sphere or bracket")->required();
    mk->add_option("dims", dims, "box: x y z; cylinder: radius height; sphere: radius; bracket: long short wall depth")
        ->required();
    mk->add_option("-o,--out", out, "Output OBJ")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*train) return cmd_train(common, objects, out);
        if (*synth) return cmd_synth(common, out, count, seed);
        if (*det) return cmd_detect(common, store_path, scene_dir, out, stop_after, ply_dir);
        if (*ev) return cmd_evaluate(common, detections_path, scene_dir, out);
        if (*viz) return cmd_viz(common, detections_path, scene_dir, out);
        if (*dump) {
            std::cout << dump_config(common.load());
            return 0;
        }
        if (*mk) return cmd_make_mesh(shape, dims, out);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const CorruptFile& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const VersionMismatch& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
