#include "support.hpp"
#include "tmpose/error.hpp"
#include "tmpose/eval.hpp"
#include "tmpose/mesh.hpp"
#include "tmpose/synth.hpp"

#include <doctest.h>

#include <algorithm>
#include <functional>

using namespace tmpose;

namespace {

double add_loop(const TriangleMesh& mesh, const Pose& est, const Pose& gt) {
    double s = 0.0;
    for (const auto& v : mesh.vertices) s += (gt.apply(v) - est.apply(v)).norm();
    return s / static_cast<double>(mesh.vertices.size());
}

/// Most true positives over every one-to-one assignment, by exhaustive search.
int best_tp(const std::vector<Detection>& dets, const std::vector<SceneInstance>& gt,
            const std::map<std::string, EvalObject>& objects, double k_m) {
    std::vector<bool> used(gt.size(), false);
    std::function<int(std::size_t)> go = [&](std::size_t i) -> int {
        if (i == dets.size()) return 0;
        int best = go(i + 1);
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (used[g] || gt[g].object_id != dets[i].object_id) continue;
            const EvalObject& o = objects.at(gt[g].object_id);
            const double m = o.symmetric ? adi_error(*o.mesh, dets[i].pose, gt[g].pose)
                                         : add_error(*o.mesh, dets[i].pose, gt[g].pose);
            used[g] = true;
            best = std::max(best, go(i + 1) + (is_correct(m, o.diameter, k_m) ? 1 : 0));
            used[g] = false;
        }
        return best;
    };
    return go(0);
}

}  // namespace

TEST_CASE("add and adi closed forms") {
    const TriangleMesh mesh = make_bracket(0.08, 0.06, 0.02, 0.04);
    std::mt19937_64 rng(70);
    const Pose gt = testing::random_pose(rng, 0.3);
    CHECK(add_error(mesh, gt, gt) == 0.0);
    CHECK(adi_error(mesh, gt, gt) == 0.0);
    const Vec3 delta(0.003, -0.004, 0.0);
    CHECK(add_error(mesh, Pose{gt.rotation, gt.translation + delta}, gt) == doctest::Approx(0.005).epsilon(1e-12));

    for (int i = 0; i < 1000; ++i) {
        const Pose a = testing::random_pose(rng, 0.2);
        const Pose b = testing::random_pose(rng, 0.2);
        const double add = add_error(mesh, a, b);
        CHECK(std::abs(add - add_loop(mesh, a, b)) < 1e-12);
        CHECK(adi_error(mesh, a, b) <= add + 1e-15);
    }

    const TriangleMesh cyl = make_cylinder(0.03, 0.08, 64);
    const Pose base{Mat3::Identity(), Vec3(0, 0, 0.5)};
    // One segment step about the axis maps the vertex set onto itself.
    const Pose turned{rot_z(2.0 * M_PI / 64.0 * 20.0), base.translation};
    CHECK(adi_error(cyl, turned, base) < 1e-3);
    CHECK(add_error(cyl, turned, base) > 0.03);
    const Pose half{rot_z(M_PI), base.translation};
    CHECK(adi_error(cyl, half, base) < 1e-3);
    CHECK(add_error(cyl, half, base) > 0.05);
}

TEST_CASE("is_correct is strict") {
    CHECK(is_correct(0.0, 0.1));
    CHECK_FALSE(is_correct(0.15 * 0.1, 0.1));
    CHECK(is_correct(std::nextafter(0.15 * 0.1, 0.0), 0.1));
    bool was = true;
    for (int i = 0; i <= 100; ++i) {
        const bool now = is_correct(i * 0.001, 0.1);
        CHECK((was || !now));
        was = now;
    }
}

TEST_CASE("evaluate counts") {
    const TriangleMesh mesh = make_bracket(0.08, 0.06, 0.02, 0.04);
    const double diam = mesh_diameter(mesh);
    const std::map<std::string, EvalObject> objects{{"b", {&mesh, diam, false}}};
    const Pose p1{Mat3::Identity(), Vec3(-0.1, 0, 0.5)};
    const Pose p2{rot_x(0.5), Vec3(0.1, 0, 0.5)};
    const std::vector<SceneInstance> gt{{"b", p1}, {"b", p2}};

    const EvalReport perfect = evaluate({{"b", p1}, {"b", p2}}, gt, objects);
    CHECK(perfect.micro.tp == 2);
    CHECK(perfect.micro.f1 == 1.0);
    CHECK(perfect.per_object.at("b").precision == 1.0);

    // One hit and one miss: P = R = F1 = 0.5.
    const EvalReport half = evaluate({{"b", p1}, {"b", Pose{rot_y(1.0), Vec3(0.3, 0.2, 0.6)}}}, gt, objects);
    CHECK(half.micro.tp == 1);
    CHECK(half.micro.fp == 1);
    CHECK(half.micro.fn == 1);
    CHECK(half.micro.precision == 0.5);
    CHECK(half.micro.recall == 0.5);
    CHECK(half.micro.f1 == 0.5);
    REQUIRE(half.detections.size() == 2);
    CHECK(half.detections[0].matched_gt == 0);
    CHECK(half.detections[0].correct);
    CHECK_FALSE(half.detections[1].correct);

    // A duplicate detection of the same instance is a false positive.
    const EvalReport dup = evaluate({{"b", p1}, {"b", p1}}, {{"b", p1}}, objects);
    CHECK(dup.micro.tp == 1);
    CHECK(dup.micro.fp == 1);
    CHECK(dup.micro.fn == 0);

    const EvalReport none = evaluate({}, {}, objects);
    CHECK(none.micro.f1 == 0.0);
    CHECK(none.micro.precision == 0.0);
    const EvalReport missed = evaluate({}, gt, objects);
    CHECK(missed.micro.fn == 2);
    CHECK(missed.micro.f1 == 0.0);
    const EvalReport spurious = evaluate({{"b", p1}}, {}, objects);
    CHECK(spurious.micro.fp == 1);
    CHECK(spurious.micro.recall == 0.0);

    CHECK_THROWS_AS(evaluate({{"nope", p1}}, gt, objects), Error);
}

TEST_CASE("evaluate finds the best assignment on small scenes") {
    const TriangleMesh bracket = make_bracket(0.08, 0.06, 0.02, 0.04);
    const TriangleMesh cyl = make_cylinder(0.03, 0.08, 32);
    const std::map<std::string, EvalObject> objects{{"b", {&bracket, mesh_diameter(bracket), false}},
                                                    {"c", {&cyl, mesh_diameter(cyl), true}}};
    std::mt19937_64 rng(71);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<SceneInstance> gt;
        const int n = 1 + trial % 3;
        for (int i = 0; i < n; ++i) {
            gt.push_back({coin(rng) ? "b" : "c",
                          Pose{testing::random_rotation(rng), Vec3(-0.2 + 0.2 * i, 0.0, 0.5)}});
        }
        std::vector<Detection> dets;
        for (const auto& g : gt) {
            if (!coin(rng)) continue;
            // Small or large error, so some matches are correct and some not.
            const double scale = coin(rng) ? 0.005 : 0.03;
            dets.push_back({g.object_id, Pose{g.pose.rotation * testing::random_small_rotation(rng, scale),
                                              g.pose.translation + testing::random_vec(rng, scale)}});
        }
        if (coin(rng)) dets.push_back({coin(rng) ? "b" : "c", testing::random_pose(rng, 0.3)});
        std::shuffle(dets.begin(), dets.end(), rng);

        const EvalReport r = evaluate(dets, gt, objects);
        CHECK(r.micro.tp == best_tp(dets, gt, objects, 0.15));
        CHECK(r.micro.fp == static_cast<int>(dets.size()) - r.micro.tp);
        CHECK(r.micro.fn == n - r.micro.tp);

        auto reversed = dets;
        std::reverse(reversed.begin(), reversed.end());
        const EvalReport back = evaluate(reversed, gt, objects);
        CHECK(back.micro.tp == r.micro.tp);
        CHECK(back.micro.f1 == r.micro.f1);
    }
}

TEST_CASE("synthetic scenes") {
    const CameraIntrinsics cam = testing::small_camera();
    const TriangleMesh bracket = make_bracket(0.08, 0.06, 0.02, 0.04);
    const TriangleMesh cyl = make_cylinder(0.03, 0.08, 32);
    const MeshMap meshes{{"b", &bracket}, {"c", &cyl}};
    const NoiseParams clean{0.0, 0.0, false};

    const Pose pb{look_at_rotation(Vec3(0.1, 0.2, 1.0).normalized(), 0.2), Vec3(0.0, 0.0, 0.5)};
    const GroundTruthScene solo = synth_scene(meshes, {{"b", pb}}, clean, cam, 1);
    const RenderResult r = render_depth(bracket, cam, pb);
    CHECK(solo.depth.data() == r.depth.data());
    CHECK(solo.diameters.at("b") == mesh_diameter(bracket));

    const Pose pc{Mat3::Identity(), Vec3(0.02, 0.01, 0.45)};
    const GroundTruthScene both = synth_scene(meshes, {{"b", pb}, {"c", pc}}, clean, cam, 1);
    const RenderResult rc = render_depth(cyl, cam, pc);
    int contested = 0;
    for (int row = 0; row < cam.height; ++row) {
        for (int col = 0; col < cam.width; ++col) {
            const double a = r.depth.at(row, col);
            const double b = rc.depth.at(row, col);
            if (a > 0 && b > 0) {
                ++contested;
                CHECK(both.depth.at(row, col) == std::min(a, b));
            }
        }
    }
    CHECK(contested > 50);

    const GroundTruthScene dropped = synth_scene(meshes, {{"b", pb}}, NoiseParams{0.0, 0.1, false}, cam, 7);
    int covered = 0, lost = 0;
    for (std::size_t i = 0; i < r.depth.size(); ++i) {
        if (r.depth.data()[i] <= 0) continue;
        ++covered;
        lost += dropped.depth.data()[i] == 0.0;
    }
    CHECK(std::abs(static_cast<double>(lost) / covered - 0.10) <= 0.01);

    const GroundTruthScene noisy = synth_scene(meshes, {{"b", pb}, {"c", pc}}, NoiseParams{}, cam, 3);
    for (double d : noisy.depth.data()) CHECK(std::abs(d * 1000.0 - std::round(d * 1000.0)) < 1e-9);
    const auto dir = testing::scratch_dir("synth");
    save_scene(dir.string(), noisy);
    const GroundTruthScene back = load_scene(dir.string());
    CHECK(back.depth.data() == noisy.depth.data());
    CHECK(back.intensity.data() == noisy.intensity.data());
    CHECK(back.instances == noisy.instances);
    CHECK(back.diameters == noisy.diameters);
    CHECK(back.noise == noisy.noise);
    CHECK(back.seed == 3);

    // Same seed, same scene.
    CHECK(synth_scene(meshes, {{"b", pb}}, NoiseParams{}, cam, 9).depth.data() ==
          synth_scene(meshes, {{"b", pb}}, NoiseParams{}, cam, 9).depth.data());
}

TEST_CASE("instance sampler keeps its promises") {
    const CameraIntrinsics cam = testing::small_camera();
    const TriangleMesh bracket = make_bracket(0.08, 0.06, 0.02, 0.04);
    const TriangleMesh cyl = make_cylinder(0.03, 0.08, 32);
    const MeshMap meshes{{"b", &bracket}, {"c", &cyl}};
    InstanceSampler s;
    s.border = 20;
    std::mt19937_64 rng(72);
    for (int trial = 0; trial < 10; ++trial) {
        const auto inst = sample_instances(meshes, s, cam, rng);
        CHECK(static_cast<int>(inst.size()) <= s.max_instances);
        for (const auto& i : inst) {
            CHECK(i.pose.is_valid());
            CHECK(i.pose.translation.z() >= s.min_distance);
            CHECK(i.pose.translation.z() <= s.max_distance);
            const auto mask = render_depth(*meshes.at(i.object_id), cam, i.pose).mask.data();
            CHECK(std::count(mask.begin(), mask.end(), 1) > 0);
        }
    }
}
