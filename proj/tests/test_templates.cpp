#include "support.hpp"
#include "tmpose/error.hpp"
#include "tmpose/mesh.hpp"
#include "tmpose/templates.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

using namespace tmpose;

namespace {

struct View {
    RenderResult render;
    NormalMap normals;
    GrayImage intensity;
};

View render_view(const TriangleMesh& mesh, const CameraIntrinsics& cam, const Pose& pose) {
    View v;
    v.render = render_depth(mesh, cam, pose);
    v.normals = normals_from_depth(v.render.depth, cam);
    v.intensity = shade_intensity(v.render.face_normals, default_light());
    return v;
}

Template extract(const View& v, const Pose& pose, const QuantizationConfig& cfg = {}) {
    return extract_template(v.intensity, v.render.depth, v.normals, v.render.mask, pose, "obj", cfg);
}

// Direct interval oracle: bin k holds [k*pi/bins, (k+1)*pi/bins).
int gradient_oracle(double folded, int bins) {
    int k = 0;
    for (int j = 1; j < bins; ++j) {
        if (folded >= j * M_PI / bins) k = j;
    }
    return k;
}

std::vector<char> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::string& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TemplateStore random_store(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pos(0, 40);
    std::uniform_int_distribution<int> bin(0, 7);
    TemplateStore store;
    store.objects.push_back({"a", {}});
    for (std::size_t i = 0; i < count; ++i) {
        Template t;
        t.rows = 41;
        t.cols = 41;
        t.offset_row = pos(rng);
        t.offset_col = pos(rng);
        t.train_pose = testing::random_pose(rng);
        t.train_distance = t.train_pose.translation.norm();
        t.object_id = "a";
        const int n = 1 + static_cast<int>(i % 20);
        for (int f = 0; f < n; ++f) {
            t.features.push_back({f % 2 ? Modality::Normal : Modality::Gradient, pos(rng), pos(rng), bin(rng)});
        }
        store.objects[0].templates.push_back(std::move(t));
    }
    return store;
}

}  // namespace

TEST_CASE("gradient quantization examples") {
    CHECK(quantize_gradient(0.0) == 0);
    CHECK(quantize_gradient(M_PI + 0.01) == 0);
    CHECK(quantize_gradient(-0.01) == 7);
    CHECK(quantize_gradient(M_PI) == 0);
    for (int k = 0; k < 8; ++k) CHECK(quantize_gradient(k * M_PI / 8) == k);
}

TEST_CASE("gradient quantization matches the interval oracle") {
    std::vector<double> angles;
    for (int k = 0; k < 8; ++k) {
        const double edge = k * M_PI / 8;
        angles.push_back(edge);
        angles.push_back(std::nextafter(edge, 10.0));
        if (k > 0) angles.push_back(std::nextafter(edge, -10.0));
    }
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, M_PI);
    while (angles.size() < 10000) angles.push_back(u(rng));
    for (double a : angles) {
        CHECK(quantize_gradient(a, 8) == gradient_oracle(a, 8));
    }
    for (int bins : {2, 4, 6}) {
        for (int i = 0; i < 1000; ++i) {
            const double a = u(rng);
            CHECK(quantize_gradient(a, bins) == gradient_oracle(a, bins));
        }
    }
}

TEST_CASE("normal cones") {
    const auto& axes = normal_cone_axes(8);
    REQUIRE(axes.size() == 8);
    for (int k = 0; k < 8; ++k) {
        CHECK(std::abs(axes[k].norm() - 1.0) < 1e-12);
        CHECK(axes[k].z() < 0.0);  // camera-facing hemisphere
        CHECK(quantize_normal(axes[k]) == k);
    }
    CHECK(quantize_normal(Vec3(0, 0, -1)) == 0);
    // Nearest axis by brute force.
    std::mt19937_64 rng(4);
    for (int i = 0; i < 2000; ++i) {
        Vec3 n = testing::random_vec(rng, 1.0).normalized();
        if (n.z() > 0) n.z() = -n.z();
        int best = 0;
        for (int k = 1; k < 8; ++k) {
            if (n.dot(axes[k]) > n.dot(axes[best])) best = k;
        }
        CHECK(quantize_normal(n) == best);
    }
}

TEST_CASE("response levels") {
    CHECK(response_level(Modality::Gradient, 3, 3, 8) == 2);
    CHECK(response_level(Modality::Gradient, 3, 4, 8) == 1);
    CHECK(response_level(Modality::Gradient, 0, 7, 8) == 1);  // orientation wraps
    CHECK(response_level(Modality::Gradient, 0, 4, 8) == 0);
    CHECK(response_level(Modality::Gradient, 0, -1, 8) == 0);
    CHECK(response_level(Modality::Normal, 0, 5, 8) == 1);
    CHECK(response_level(Modality::Normal, 1, 7, 8) == 1);
    CHECK(response_level(Modality::Normal, 1, 4, 8) == 0);
    CHECK(kResponseWeight[2] == 1.0);
    CHECK(kResponseWeight[1] == doctest::Approx(std::cos(M_PI / 8)).epsilon(1e-15));
    for (Modality m : {Modality::Gradient, Modality::Normal}) {
        for (int a = 0; a < 8; ++a) {
            for (int b = 0; b < 8; ++b) CHECK(response_level(m, a, b, 8) == response_level(m, b, a, 8));
        }
    }
}

TEST_CASE("fronto-parallel square template") {
    const CameraIntrinsics cam = testing::small_camera();
    const Pose pose{Mat3::Identity(), Vec3(0, 0, 0.8)};
    const View v = render_view(make_square(0.2), cam, pose);
    const Template t = extract(v, pose);

    int grads = 0;
    int norms = 0;
    for (const auto& f : t.features) {
        CHECK(f.row >= 0);
        CHECK(f.col >= 0);
        CHECK(f.row < t.rows);
        CHECK(f.col < t.cols);
        const int sr = f.row + t.offset_row;
        const int sc = f.col + t.offset_col;
        if (f.modality == Modality::Normal) {
            ++norms;
            CHECK(f.bin == 0);
            CHECK(v.render.mask.at(sr, sc) == 1);
        } else {
            ++grads;
            // Silhouette only: some pixel within one step is outside the mask.
            bool near_edge = false;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (!v.render.mask.contains(sr + dr, sc + dc) || !v.render.mask.at(sr + dr, sc + dc)) {
                        near_edge = true;
                    }
                }
            }
            CHECK(near_edge);
        }
    }
    CHECK(grads <= 63);
    CHECK(norms <= 63);
    CHECK(grads >= 8);
    CHECK(norms >= 8);
    CHECK(t.train_distance == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(t.object_id == "obj");
}

TEST_CASE("feature budget and spacing") {
    const CameraIntrinsics cam = testing::small_camera();
    std::mt19937_64 rng(6);
    QuantizationConfig cfg;
    cfg.feature_budget = 20;
    cfg.min_features = 4;
    cfg.min_spacing = 3;
    for (int i = 0; i < 5; ++i) {
        const Pose pose{testing::random_rotation(rng), Vec3(0, 0, 0.5)};
        const View v = render_view(make_box({0.1, 0.07, 0.05}, 2), cam, pose);
        const Template t = extract(v, pose, cfg);
        for (Modality m : {Modality::Gradient, Modality::Normal}) {
            std::vector<Feature> fs;
            for (const auto& f : t.features) {
                if (f.modality == m) fs.push_back(f);
            }
            CHECK(fs.size() <= 20);
            for (std::size_t a = 0; a < fs.size(); ++a) {
                for (std::size_t b = a + 1; b < fs.size(); ++b) {
                    const int dr = fs[a].row - fs[b].row;
                    const int dc = fs[a].col - fs[b].col;
                    CHECK(dr * dr + dc * dc >= 9);
                }
            }
        }
        CHECK(std::abs(t.train_distance - pose.translation.norm()) < 1e-6);
    }
}

TEST_CASE("extraction is deterministic") {
    const CameraIntrinsics cam = testing::small_camera();
    const Pose pose{look_at_rotation(Vec3(0.3, -0.5, 0.8).normalized(), 0.4), Vec3(0, 0, 0.5)};
    const TriangleMesh mesh = make_bracket(0.08, 0.06, 0.02, 0.04);
    const Template a = extract(render_view(mesh, cam, pose), pose);
    const Template b = extract(render_view(mesh, cam, pose), pose);
    CHECK(a == b);
}

TEST_CASE("extraction errors") {
    const CameraIntrinsics cam = testing::small_camera();
    const View empty = render_view(make_square(0.2), cam, {Mat3::Identity(), Vec3(0, 0, -1)});
    CHECK_THROWS_AS(extract(empty, Pose::identity()), EmptyMask);

    // A square a few pixels wide has almost no interior normals.
    const Pose far{Mat3::Identity(), Vec3(0, 0, 3.0)};
    const View tiny = render_view(make_square(0.06), cam, far);
    CHECK_THROWS_AS(extract(tiny, far), TooFewFeatures);

    GrayImage wrong(3, 3, 0);
    CHECK_THROWS_AS(extract_template(wrong, empty.render.depth, empty.normals, empty.render.mask, far, "x"),
                    DegenerateInput);
}

TEST_CASE("quantization config validation") {
    QuantizationConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.gradient_bins = 9;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.min_features = 100;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("store round trip") {
    const auto dir = testing::scratch_dir("store");
    const std::string path = (dir / "s.tmstore").string();
    TemplateStore store = random_store(50, 3);
    store.objects.push_back({"b", random_store(7, 4).objects[0].templates});
    for (auto& t : store.objects[1].templates) t.object_id = "b";
    store.camera = testing::small_camera();
    store_save(store, path);
    const TemplateStore back = store_load(path);
    CHECK(back == store);

    // Saving twice gives the same bytes.
    const std::string again = (dir / "s2.tmstore").string();
    store_save(back, again);
    CHECK(read_bytes(path) == read_bytes(again));
}

TEST_CASE("12960-template store keeps every pose bit for bit") {
    const auto dir = testing::scratch_dir("store_big");
    const std::string path = (dir / "big.tmstore").string();
    const TemplateStore store = random_store(12960, 9);
    store_save(store, path);
    const TemplateStore back = store_load(path);
    REQUIRE(back.template_count() == 12960);
    for (std::size_t i = 0; i < 12960; ++i) {
        const Pose& a = store.objects[0].templates[i].train_pose;
        const Pose& b = back.objects[0].templates[i].train_pose;
        CHECK(std::memcmp(a.rotation.data(), b.rotation.data(), sizeof(double) * 9) == 0);
        CHECK(std::memcmp(a.translation.data(), b.translation.data(), sizeof(double) * 3) == 0);
    }
    CHECK(back == store);
}

TEST_CASE("store load errors") {
    const auto dir = testing::scratch_dir("store_bad");
    const std::string path = (dir / "s.tmstore").string();
    store_save(random_store(10, 1), path);
    const auto bytes = read_bytes(path);

    const std::string cut = (dir / "cut.tmstore").string();
    write_bytes(cut, {bytes.begin(), bytes.end() - 7});
    CHECK_THROWS_AS(store_load(cut), CorruptFile);
    write_bytes(cut, {bytes.begin(), bytes.begin() + 10});
    CHECK_THROWS_AS(store_load(cut), CorruptFile);

    auto flipped = bytes;
    flipped[flipped.size() - 3] ^= 0x40;
    const std::string flip = (dir / "flip.tmstore").string();
    write_bytes(flip, flipped);
    CHECK_THROWS_AS(store_load(flip), CorruptFile);

    auto versioned = bytes;
    versioned[8] = 7;  // u32 version right after the 8-byte magic
    const std::string ver = (dir / "ver.tmstore").string();
    write_bytes(ver, versioned);
    CHECK_THROWS_AS(store_load(ver), VersionMismatch);

    auto magic = bytes;
    magic[0] = 'X';
    const std::string mg = (dir / "magic.tmstore").string();
    write_bytes(mg, magic);
    CHECK_THROWS_AS(store_load(mg), CorruptFile);

    CHECK_THROWS_AS(store_load((dir / "missing.tmstore").string()), IoError);
}
