#include "tmpose/synth.hpp"

#include "tmpose/error.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace tmpose {

namespace {

const TriangleMesh& mesh_for(const MeshMap& meshes, const std::string& id) {
    auto it = meshes.find(id);
    if (it == meshes.end() || it->second == nullptr) throw Error("no mesh for object " + id);
    return *it->second;
}

}  // namespace

double bounding_radius(const TriangleMesh& mesh) {
    double r = 0.0;
    for (const auto& v : mesh.vertices) r = std::max(r, v.norm());
    return r;
}

GroundTruthScene synth_scene(const MeshMap& meshes, const std::vector<SceneInstance>& instances,
                             const NoiseParams& noise, const CameraIntrinsics& cam, std::uint64_t seed,
                             const NormalOptions& normal_options) {
    if (!(noise.depth_sigma >= 0.0)) throw DegenerateInput("synth_scene: depth sigma must be >= 0");
    if (!(noise.dropout >= 0.0 && noise.dropout <= 1.0)) throw DegenerateInput("synth_scene: dropout must be in [0, 1]");

    RenderResult composite = make_empty_render(cam);
    GroundTruthScene scene;
    scene.camera = cam;
    scene.instances = instances;
    scene.noise = noise;
    scene.seed = seed;
    for (const auto& inst : instances) {
        const TriangleMesh& mesh = mesh_for(meshes, inst.object_id);
        render_into(mesh, cam, inst.pose, composite);
        if (!scene.diameters.count(inst.object_id)) scene.diameters[inst.object_id] = mesh_diameter(mesh);
    }
    scene.intensity = shade_intensity(composite.face_normals, default_light());

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    DepthImage depth = composite.depth;
    for (std::size_t i = 0; i < depth.size(); ++i) {
        if (!composite.mask[i]) continue;
        const double jitter = gauss(rng) * noise.depth_sigma;
        const bool drop = unit(rng) < noise.dropout;
        depth[i] = drop ? 0.0 : std::max(0.0, depth[i] + jitter);
    }
    scene.depth = noise.quantize_mm ? quantize_depth_mm(depth) : depth;
    scene.normals = normals_from_depth(scene.depth, cam, normal_options);
    return scene;
}

std::vector<SceneInstance> sample_instances(const MeshMap& meshes, const InstanceSampler& s,
                                            const CameraIntrinsics& cam, std::mt19937_64& rng) {
    if (meshes.empty()) throw DegenerateInput("sample_instances: no meshes");
    if (s.min_instances < 0 || s.max_instances < s.min_instances) {
        throw DegenerateInput("sample_instances: bad instance count range");
    }
    std::vector<std::string> ids;
    for (const auto& [id, mesh] : meshes) ids.push_back(id);

    std::uniform_int_distribution<int> count_dist(s.min_instances, s.max_instances);
    const int target = count_dist(rng);
    std::uniform_int_distribution<std::size_t> id_dist(0, ids.size() - 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> inplane(s.inplane_min_deg, s.inplane_max_deg);
    std::uniform_real_distribution<double> dist(s.min_distance, s.max_distance);
    std::uniform_real_distribution<double> col(s.border, cam.width - 1 - s.border);
    std::uniform_real_distribution<double> row(s.border, cam.height - 1 - s.border);

    std::vector<SceneInstance> out;
    std::vector<RenderResult> solos;
    std::vector<std::size_t> solo_counts;
    for (int attempt = 0; attempt < s.max_attempts && static_cast<int>(out.size()) < target; ++attempt) {
        SceneInstance cand;
        cand.object_id = ids[id_dist(rng)];
        Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
        if (dir.norm() < 1e-9) continue;
        dir.normalize();
        const double angle = inplane(rng) * M_PI / 180.0;
        const double z = dist(rng);
        const double u = col(rng);
        const double v = row(rng);
        cand.pose.translation = cam.backproject(u, v, z);
        cand.pose.rotation =
            rotation_between_vectors(Vec3::UnitZ(), cand.pose.translation.normalized()) * look_at_rotation(dir, angle);

        const TriangleMesh& mesh = mesh_for(meshes, cand.object_id);
        const double radius = bounding_radius(mesh);
        bool overlaps = false;
        for (const auto& o : out) {
            const double gap = (o.pose.translation - cand.pose.translation).norm();
            if (gap <= radius + bounding_radius(mesh_for(meshes, o.object_id))) overlaps = true;
        }
        if (overlaps) continue;

        RenderResult solo = render_depth(mesh, cam, cand.pose);
        std::size_t count = 0;
        bool clipped = false;
        for (int r = 0; r < cam.height; ++r) {
            for (int c = 0; c < cam.width; ++c) {
                if (!solo.mask.at(r, c)) continue;
                ++count;
                if (r == 0 || c == 0 || r == cam.height - 1 || c == cam.width - 1) clipped = true;
            }
        }
        if (count == 0 || clipped) continue;

        RenderResult composite = make_empty_render(cam);
        for (std::size_t i = 0; i < out.size(); ++i) render_into(mesh_for(meshes, out[i].object_id), cam, out[i].pose, composite);
        render_into(mesh, cam, cand.pose, composite);

        auto visible_fraction = [&](const RenderResult& r, std::size_t total) {
            std::size_t seen = 0;
            for (std::size_t p = 0; p < r.depth.size(); ++p) {
                if (r.mask[p] && composite.depth[p] == r.depth[p]) ++seen;
            }
            return static_cast<double>(seen) / static_cast<double>(total);
        };
        bool visible = visible_fraction(solo, count) >= s.min_visible_fraction;
        for (std::size_t i = 0; i < solos.size() && visible; ++i) {
            visible = visible_fraction(solos[i], solo_counts[i]) >= s.min_visible_fraction;
        }
        if (!visible) continue;

        out.push_back(cand);
        solos.push_back(std::move(solo));
        solo_counts.push_back(count);
    }
    return out;
}

void save_scene(const std::string& dir, const GroundTruthScene& scene) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
    write_depth_png(dir + "/depth.png", scene.depth);
    write_gray_png(dir + "/intensity.png", scene.intensity);

    nlohmann::json instances = nlohmann::json::array();
    for (const auto& inst : scene.instances) {
        std::vector<double> r;
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) r.push_back(inst.pose.rotation(a, b));
        }
        const Vec3& t = inst.pose.translation;
        instances.push_back({{"object_id", inst.object_id}, {"R", r}, {"t", {t.x(), t.y(), t.z()}}});
    }
    const CameraIntrinsics& c = scene.camera;
    const nlohmann::json gt = {
        {"instances", instances},
        {"camera", {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width}, {"height", c.height}}},
        {"noise",
         {{"depth_sigma", scene.noise.depth_sigma},
          {"dropout", scene.noise.dropout},
          {"quantize_mm", scene.noise.quantize_mm}}},
        {"diameters", scene.diameters},
        {"seed", scene.seed},
    };
    std::ofstream out(dir + "/gt.json");
    if (!out) throw IoError("cannot write " + dir + "/gt.json");
    out << gt.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + dir + "/gt.json");
}

GroundTruthScene load_scene(const std::string& dir, const NormalOptions& normal_options) {
    std::ifstream in(dir + "/gt.json");
    if (!in) throw IoError("cannot open " + dir + "/gt.json");
    GroundTruthScene scene;
    try {
        const nlohmann::json gt = nlohmann::json::parse(in);
        const auto& c = gt.at("camera");
        scene.camera.fx = c.at("fx").get<double>();
        scene.camera.fy = c.at("fy").get<double>();
        scene.camera.cx = c.at("cx").get<double>();
        scene.camera.cy = c.at("cy").get<double>();
        scene.camera.width = c.at("width").get<int>();
        scene.camera.height = c.at("height").get<int>();
        for (const auto& j : gt.at("instances")) {
            SceneInstance inst;
            inst.object_id = j.at("object_id").get<std::string>();
            const auto r = j.at("R").get<std::vector<double>>();
            const auto t = j.at("t").get<std::vector<double>>();
            if (r.size() != 9 || t.size() != 3) throw ConfigError("gt.json: R needs 9 values and t needs 3");
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) inst.pose.rotation(a, b) = r[static_cast<std::size_t>(3 * a + b)];
            }
            inst.pose.translation = Vec3(t[0], t[1], t[2]);
            scene.instances.push_back(std::move(inst));
        }
        if (gt.contains("noise")) {
            const auto& n = gt.at("noise");
            scene.noise.depth_sigma = n.value("depth_sigma", scene.noise.depth_sigma);
            scene.noise.dropout = n.value("dropout", scene.noise.dropout);
            scene.noise.quantize_mm = n.value("quantize_mm", scene.noise.quantize_mm);
        }
        if (gt.contains("diameters")) scene.diameters = gt.at("diameters").get<std::map<std::string, double>>();
        scene.seed = gt.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("gt.json: ") + e.what());
    }
    scene.depth = read_depth_png(dir + "/depth.png");
    if (scene.depth.width() != scene.camera.width || scene.depth.height() != scene.camera.height) {
        throw ConfigError("scene depth size does not match the camera in gt.json");
    }
    if (std::filesystem::exists(dir + "/intensity.png")) {
        scene.intensity = read_gray_png(dir + "/intensity.png");
    } else {
        scene.intensity = GrayImage(scene.camera.width, scene.camera.height, 0);
    }
    scene.normals = normals_from_depth(scene.depth, scene.camera, normal_options);
    return scene;
}

}  // namespace tmpose
