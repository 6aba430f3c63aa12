#include "support.hpp"
#include "tmpose/config.hpp"
#include "tmpose/mesh.hpp"
#include "tmpose/pipeline.hpp"
#include "tmpose/synth.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace tmpose;

namespace {

int run(const std::string& args, const std::string& log) {
    const std::string cmd = std::string(TMPOSE_CLI) + " " + args + " > " + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Scratch directory with a bracket mesh and a small one-object config.
struct Fixture {
    std::string dir;
    std::string config;
    PipelineConfig parsed;

    explicit Fixture(const std::string& name, const std::string& training) {
        dir = testing::scratch_dir(name).string();
        write_obj(dir + "/bracket.obj", make_bracket(0.08, 0.06, 0.02, 0.04));
        config = dir + "/fixture.toml";
        std::ofstream(config) << "[camera]\nfx = 143.0\nfy = 143.0\ncx = 80.0\ncy = 60.0\nwidth = 160\nheight = 120\n"
                              << training
                              << "[objects.bracket]\nmesh = \"bracket.obj\"\nmin_cluster_size = 1\n";
        parsed = load_config(config);
    }
};

const char* kOneView = "[training]\nviewpoints = 1\ninplane_min_deg = 0.0\ninplane_max_deg = 0.0\n"
                       "inplane_step_deg = 10.0\nradii = [0.5]\n";

}  // namespace

TEST_CASE("cli exit codes") {
    const Fixture fx("cli_codes", kOneView);
    const std::string log = fx.dir + "/log.txt";
    CHECK(run("config -c " + fx.config, log) == 0);
    CHECK(run("", log) == 1);
    CHECK(run("train -c " + fx.config, log) == 1);
    CHECK(run("config -c " + fx.config + " --set nonsense=1", log) == 1);
    CHECK(run("config -c " + fx.config + " --set matching.threshold=2", log) == 1);
    CHECK(run("config -c " + fx.dir + "/missing.toml", log) == 2);
    CHECK(run("detect -c " + fx.config + " -s " + fx.dir + "/missing.tmstore --scene " + fx.dir + " -o -", log) == 2);

    std::ofstream(fx.dir + "/junk.tmstore") << "not a store";
    CHECK(run("detect -c " + fx.config + " -s " + fx.dir + "/junk.tmstore --scene " + fx.dir + " -o -", log) == 2);
}

TEST_CASE("cli config dump round trips") {
    const Fixture fx("cli_dump", kOneView);
    const std::string out = fx.dir + "/dump.toml";
    REQUIRE(run("config -c " + fx.config + " --set seed=42", out) == 0);
    const PipelineConfig back = load_config(out);
    CHECK(back.seed == 42);
    CHECK(dump_config(back) == slurp(out));
}

TEST_CASE("cli train, detect and evaluate") {
    const Fixture fx("cli_e2e", kOneView);
    const std::string log = fx.dir + "/log.txt";
    const std::string store = fx.dir + "/a.tmstore";
    REQUIRE(run("train -c " + fx.config + " -o " + store, log) == 0);
    CHECK(slurp(log).find("total: 1 templates") != std::string::npos);
    REQUIRE(run("train -c " + fx.config + " -o " + fx.dir + "/b.tmstore", log) == 0);
    CHECK(slurp(store) == slurp(fx.dir + "/b.tmstore"));

    // One instance at the trained view.
    const ObjectLibrary lib = load_objects(fx.parsed);
    const Pose pose = training_poses(fx.parsed).at(0);
    const std::string scene = fx.dir + "/scene";
    save_scene(scene, synth_scene(lib.view(), {{"bracket", pose}}, NoiseParams{}, fx.parsed.camera, 5));
    const std::string dets = fx.dir + "/dets.json";
    REQUIRE(run("detect -c " + fx.config + " -s " + store + " --scene " + scene + " -o " + dets, log) == 0);
    const auto j = nlohmann::json::parse(slurp(dets));
    REQUIRE(j.at("detections").size() == 1);
    CHECK(j.at("detections")[0].at("object_id") == "bracket");

    // Same run again: identical bytes.
    REQUIRE(run("detect -c " + fx.config + " -s " + store + " --scene " + scene + " -o " + fx.dir + "/again.json",
                log) == 0);
    CHECK(slurp(dets) == slurp(fx.dir + "/again.json"));

    const std::string report = fx.dir + "/report.json";
    REQUIRE(run("evaluate -c " + fx.config + " -d " + dets + " --gt " + scene + " -o " + report, log) == 0);
    CHECK(nlohmann::json::parse(slurp(report)).at("micro").at("f1").get<double>() == 1.0);

    const std::string nms = fx.dir + "/nms.json";
    REQUIRE(run("detect -c " + fx.config + " -s " + store + " --scene " + scene + " -o " + nms + " --stop-after nms",
                log) == 0);
    const auto early = nlohmann::json::parse(slurp(nms));
    CHECK(early.at("stage") == "nms");
    REQUIRE_FALSE(early.at("detections").empty());
    CHECK_FALSE(early.at("detections")[0].contains("R"));
    CHECK(run("evaluate -c " + fx.config + " -d " + nms + " --gt " + scene + " -o -", log) == 1);

    const std::string empty = fx.dir + "/empty";
    save_scene(empty, synth_scene(lib.view(), {}, NoiseParams{}, fx.parsed.camera, 5));
    const std::string none = fx.dir + "/none.json";
    REQUIRE(run("detect -c " + fx.config + " -s " + store + " --scene " + empty + " -o " + none, log) == 0);
    CHECK(nlohmann::json::parse(slurp(none)).at("detections").empty());

    const std::string viz = fx.dir + "/viz";
    CHECK(run("viz -c " + fx.config + " -d " + dets + " --scene " + scene + " -o " + viz, log) == 0);
}

TEST_CASE("cli evaluate on a three-instance fixture") {
    const Fixture fx("cli_eval", kOneView);
    const ObjectLibrary lib = load_objects(fx.parsed);
    const std::vector<SceneInstance> gt{{"bracket", Pose{Mat3::Identity(), Vec3(-0.1, 0, 0.6)}},
                                        {"bracket", Pose{rot_x(0.4), Vec3(0.0, 0.05, 0.6)}},
                                        {"bracket", Pose{rot_y(0.4), Vec3(0.1, 0, 0.6)}}};
    const std::string scene = fx.dir + "/scene";
    save_scene(scene, synth_scene(lib.view(), gt, NoiseParams{}, fx.parsed.camera, 1));

    // Two exact hits, one detection far from everything, one instance missed.
    auto det = [](const Pose& p) {
        nlohmann::json r = nlohmann::json::array();
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) r.push_back(p.rotation(a, b));
        }
        return nlohmann::json{{"object_id", "bracket"},
                              {"R", r},
                              {"t", {p.translation.x(), p.translation.y(), p.translation.z()}}};
    };
    const nlohmann::json dets = {
        {"detections", {det(gt[0].pose), det(gt[2].pose), det(Pose{Mat3::Identity(), Vec3(0, -0.3, 0.9)})}}};
    std::ofstream(fx.dir + "/dets.json") << dets.dump();
    const std::string report = fx.dir + "/report.json";
    REQUIRE(run("evaluate -c " + fx.config + " -d " + fx.dir + "/dets.json --gt " + scene + " -o " + report,
                fx.dir + "/log.txt") == 0);
    const auto micro = nlohmann::json::parse(slurp(report)).at("micro");
    // P = 2/3, R = 2/3, so F1 = 2PR/(P+R) = 2/3.
    CHECK(micro.at("tp") == 2);
    CHECK(micro.at("fp") == 1);
    CHECK(micro.at("fn") == 1);
    CHECK(micro.at("f1").get<double>() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}
