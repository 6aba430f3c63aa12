#include "support.hpp"
#include "tmpose/error.hpp"
#include "tmpose/geometry.hpp"
#include "tmpose/kdtree.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace tmpose;
using testing::random_pose;
using testing::random_rotation;

TEST_CASE("axis_angle_between simple cases") {
    const AxisAngle same = axis_angle_between(Mat3::Identity(), Mat3::Identity());
    CHECK(same.angle == 0.0);
    CHECK(same.axis == Vec3::UnitZ());

    const AxisAngle quarter = axis_angle_between(Mat3::Identity(), rot_z(M_PI / 2));
    CHECK(quarter.angle == doctest::Approx(M_PI / 2).epsilon(1e-12));
    CHECK((quarter.axis - Vec3::UnitZ()).norm() < 1e-12);
}

TEST_CASE("axis_angle_between reconstructs b = a * R(k, angle)") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const Mat3 a = random_rotation(rng);
        const Mat3 b = random_rotation(rng);
        const AxisAngle aa = axis_angle_between(a, b);
        CHECK(aa.angle >= 0.0);
        CHECK(aa.angle <= M_PI);
        CHECK(std::abs(aa.axis.norm() - 1.0) < 1e-9);
        const Mat3 rebuilt = a * rotation_from_axis_angle(aa);
        CHECK((rebuilt - b).cwiseAbs().maxCoeff() < 1e-9);

        // Swapping the arguments keeps the angle and negates the axis.
        const AxisAngle back = axis_angle_between(b, a);
        CHECK(std::abs(back.angle - aa.angle) < 1e-9);
        CHECK((back.axis + aa.axis).norm() < 1e-8);
    }
}

TEST_CASE("kabsch_align closed cases") {
    const std::vector<Vec3> src{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}};
    const Pose same = kabsch_align(src, src);
    CHECK((same.rotation - Mat3::Identity()).norm() < 1e-12);
    CHECK(same.translation.norm() < 1e-12);

    std::vector<Vec3> shifted;
    for (const auto& p : src) shifted.push_back(p + Vec3(0.1, 0, 0));
    const Pose t = kabsch_align(src, shifted);
    CHECK((t.rotation - Mat3::Identity()).norm() < 1e-12);
    CHECK((t.translation - Vec3(0.1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("kabsch_align recovers random transforms") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const Pose truth = random_pose(rng);
        std::vector<Vec3> src;
        for (int i = 0; i < 10; ++i) src.push_back(testing::random_vec(rng, 1.0));
        const PointCloud a = make_cloud(src);
        const Pose got = kabsch_align(a, transform_cloud(truth, a));
        CHECK((got.rotation - truth.rotation).norm() < 1e-9);
        CHECK((got.translation - truth.translation).norm() < 1e-9);
        CHECK(got.is_valid());
    }
}

TEST_CASE("kabsch_align handles a reflected covariance") {
    // A planar cloud mirrored through its plane: the best proper rotation is
    // still a rotation, never the reflection.
    std::vector<Vec3> src{{1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0.2}};
    std::vector<Vec3> dst;
    for (const auto& p : src) dst.push_back({p.x(), p.y(), -p.z()});
    const Pose got = kabsch_align(src, dst);
    CHECK(got.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("kabsch_align rejects degenerate input") {
    const std::vector<Vec3> two{{0, 0, 0}, {1, 0, 0}};
    CHECK_THROWS_AS(kabsch_align(two, two), DegenerateInput);
    const std::vector<Vec3> line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    CHECK_THROWS_AS(kabsch_align(line, line), DegenerateInput);
}

TEST_CASE("transform_cloud") {
    std::mt19937_64 rng(3);
    PointCloud c;
    for (int i = 0; i < 50; ++i) c.push_back(testing::random_vec(rng, 1.0), testing::random_rotation(rng).col(0));
    c.organized = GridDims{5, 10};

    const PointCloud same = transform_cloud(Pose::identity(), c);
    CHECK(same.points == c.points);
    CHECK(same.normals == c.normals);
    CHECK(same.organized == c.organized);

    const PointCloud one = transform_cloud({Mat3::Identity(), Vec3(0, 0, 1)}, make_cloud({Vec3::Zero()}));
    CHECK(one.points[0] == Vec3(0, 0, 1));

    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    const PointCloud twice = transform_cloud(a, transform_cloud(b, c));
    const PointCloud once = transform_cloud(a * b, c);
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK((twice.points[i] - once.points[i]).norm() < 1e-12);
        CHECK((twice.normals[i] - a.rotation * b.rotation * c.normals[i]).norm() < 1e-12);
    }
}

TEST_CASE("transform_cloud keeps invalid slots invalid") {
    PointCloud c;
    c.points = {Vec3(1, 2, 3), PointCloud::invalid_point()};
    c.valid = {1, 0};
    c.organized = GridDims{1, 2};
    const PointCloud t = transform_cloud({Mat3::Identity(), Vec3(1, 0, 0)}, c);
    CHECK(t.valid == c.valid);
    CHECK(t.points[0] == Vec3(2, 2, 3));
    CHECK(t.valid_count() == 1);
}

TEST_CASE("centroid") {
    CHECK(centroid(make_cloud({Vec3(0, 0, 0), Vec3(2, 0, 0)})) == Vec3(1, 0, 0));
    CHECK(centroid(make_cloud({Vec3(0.3, -1, 2)})) == Vec3(0.3, -1, 2));
    CHECK_THROWS_AS(centroid(PointCloud{}), EmptyCloud);

    PointCloud with_invalid;
    with_invalid.points = {Vec3(1, 1, 1), PointCloud::invalid_point(), Vec3(3, 1, 1)};
    with_invalid.valid = {1, 0, 1};
    CHECK(centroid(with_invalid) == Vec3(2, 1, 1));

    PointCloud none;
    none.points = {PointCloud::invalid_point()};
    none.valid = {0};
    CHECK_THROWS_AS(centroid(none), EmptyCloud);

    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> pts;
    for (int i = 0; i < 1000; ++i) pts.push_back({u(rng), u(rng), u(rng)});
    const Vec3 c = centroid(make_cloud(pts));
    CHECK((c - Vec3(0.5, 0.5, 0.5)).cwiseAbs().maxCoeff() < 0.05);

    // Translation equivariance.
    const Vec3 v(0.25, -3.0, 7.0);
    std::vector<Vec3> moved;
    for (const auto& p : pts) moved.push_back(p + v);
    CHECK((centroid(make_cloud(moved)) - (c + v)).norm() < 1e-12);
}

TEST_CASE("quaternion conversion pair") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 100; ++i) {
        const Mat3 r = random_rotation(rng);
        const Eigen::Quaterniond q = to_quaternion(r);
        CHECK(q.w() >= 0.0);
        CHECK(std::abs(q.norm() - 1.0) < 1e-12);
        CHECK((from_quaternion(q) - r).norm() < 1e-12);
    }
}

TEST_CASE("rotation_between_vectors") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 100; ++i) {
        const Vec3 a = testing::random_vec(rng, 1.0).normalized();
        const Vec3 b = testing::random_vec(rng, 1.0).normalized();
        const Mat3 r = rotation_between_vectors(a, b);
        CHECK((r * a - b).norm() < 1e-9);
        CHECK(Pose{r, Vec3::Zero()}.is_valid());
    }
    const Mat3 flip = rotation_between_vectors(Vec3::UnitZ(), -Vec3::UnitZ());
    CHECK((flip * Vec3::UnitZ() + Vec3::UnitZ()).norm() < 1e-12);
}

TEST_CASE("pose validity") {
    CHECK(Pose::identity().is_valid());
    Pose bad;
    bad.rotation(0, 0) = -1.0;  // reflection
    CHECK_FALSE(bad.is_valid());
    Pose skew;
    skew.rotation(0, 1) = 1e-6;
    CHECK_FALSE(skew.is_valid());
}

TEST_CASE("kd tree matches brute force") {
    std::mt19937_64 rng(21);
    std::vector<Vec3> pts;
    for (int i = 0; i < 400; ++i) pts.push_back(testing::random_vec(rng, 1.0));
    pts.push_back(pts[7]);  // duplicate: ties go to the smaller index
    const KdTree tree(pts);
    for (int q = 0; q < 200; ++q) {
        const Vec3 query = q == 0 ? pts[7] : testing::random_vec(rng, 1.2);
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double d = (pts[i] - query).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(i);
            }
        }
        const auto nn = tree.nearest(query);
        CHECK(nn.index == best);
        CHECK(nn.sq_dist == best_d);

        std::vector<int> expect;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if ((pts[i] - query).norm() <= 0.3) expect.push_back(static_cast<int>(i));
        }
        CHECK(tree.radius_search(query, 0.3) == expect);
    }
    CHECK(KdTree().nearest(Vec3::Zero()).index == -1);
}

TEST_CASE("ply round trip") {
    const auto dir = testing::scratch_dir("ply");
    std::mt19937_64 rng(2);
    PointCloud c;
    for (int i = 0; i < 20; ++i) c.push_back(testing::random_vec(rng, 1.0), Vec3::UnitZ());
    for (PlyFormat f : {PlyFormat::Ascii, PlyFormat::BinaryLittleEndian}) {
        const std::string path = (dir / "c.ply").string();
        write_ply(path, c, f);
        const PointCloud back = read_ply(path);
        REQUIRE(back.size() == c.size());
        REQUIRE(back.has_normals());
        for (std::size_t i = 0; i < c.size(); ++i) {
            // Stored as float32.
            CHECK((back.points[i] - c.points[i]).norm() < 1e-6);
            CHECK((back.normals[i] - c.normals[i]).norm() < 1e-6);
        }
    }
    CHECK_THROWS_AS(read_ply((dir / "missing.ply").string()), IoError);
}
