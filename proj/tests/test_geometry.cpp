#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "fitrec/geometry.hpp"
#include "fitrec/rng.hpp"
#include "test_util.hpp"

using namespace fitrec;
using testutil::random_cloud;

TEST_CASE("normalize: two-point symmetric case") {
    PointCloud c;
    c.points = {{0, 0, 0}, {2, 0, 0}};
    auto [out, rec] = normalize_unit_sphere(c);
    CHECK(out.points[0].x == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(out.points[1].x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out.points[0].y == 0.0);
    CHECK(rec.center.x == doctest::Approx(1.0));
    CHECK(rec.radius == doctest::Approx(1.0));
}

TEST_CASE("normalize: degenerate and empty inputs throw") {
    PointCloud same;
    same.points = {{5, 5, 5}, {5, 5, 5}};
    CHECK_THROWS_AS(normalize_unit_sphere(same), DegenerateCloud);
    CHECK_THROWS_AS(normalize_unit_sphere(PointCloud{}), EmptyCloud);
    CHECK_THROWS_AS(centroid(PointCloud{}), EmptyCloud);
}

TEST_CASE("normalize: centroid at origin, max norm exactly 1") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        const PointCloud c = random_cloud(seed, 1000, 3.0, {10, -4, 2});
        auto [out, rec] = normalize_unit_sphere(c);
        const Vec3 cen = centroid(out);
        CHECK(std::abs(cen.x) < 1e-9);
        CHECK(std::abs(cen.y) < 1e-9);
        CHECK(std::abs(cen.z) < 1e-9);
        double max_norm = 0.0;
        for (const Vec3& p : out.points) max_norm = std::max(max_norm, p.norm());
        CHECK(max_norm == doctest::Approx(1.0).epsilon(1e-9));
        for (const Vec3& p : out.points) CHECK(p.norm() <= 1.0 + 1e-9);
    }
}

TEST_CASE("normalize: idempotent and scale/translation invariant") {
    const PointCloud c = random_cloud(77, 500);
    auto [once, rec1] = normalize_unit_sphere(c);
    auto [twice, rec2] = normalize_unit_sphere(once);

    PointCloud moved;
    for (const Vec3& p : c.points)
        moved.points.push_back(p * 3.7 + Vec3{100, -50, 8});
    auto [from_moved, rec3] = normalize_unit_sphere(moved);

    for (std::size_t i = 0; i < c.points.size(); ++i) {
        CHECK(std::abs(twice.points[i].x - once.points[i].x) < 1e-9);
        CHECK(std::abs(twice.points[i].y - once.points[i].y) < 1e-9);
        CHECK(std::abs(twice.points[i].z - once.points[i].z) < 1e-9);
        CHECK(std::abs(from_moved.points[i].x - once.points[i].x) < 1e-9);
        CHECK(std::abs(from_moved.points[i].y - once.points[i].y) < 1e-9);
        CHECK(std::abs(from_moved.points[i].z - once.points[i].z) < 1e-9);
    }
}

TEST_CASE("normalize: record inverts the transform") {
    const PointCloud c = random_cloud(5, 200, 2.5, {-3, 7, 1});
    auto [out, rec] = normalize_unit_sphere(c);
    const PointCloud back = denormalize(out, rec);
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        CHECK(std::abs(back.points[i].x - c.points[i].x) < 1e-9);
        CHECK(std::abs(back.points[i].y - c.points[i].y) < 1e-9);
        CHECK(std::abs(back.points[i].z - c.points[i].z) < 1e-9);
    }
}

TEST_CASE("normalize: id and label carried through") {
    PointCloud c = random_cloud(9, 10);
    c.id = "sample_1";
    c.label = 7;
    auto [out, rec] = normalize_unit_sphere(c);
    CHECK(out.id == "sample_1");
    CHECK(out.label == 7);
}

namespace {
std::set<std::array<double, 3>> as_set(const PointCloud& c) {
    std::set<std::array<double, 3>> s;
    for (const Vec3& p : c.points) s.insert({p.x, p.y, p.z});
    return s;
}
}  // namespace

TEST_CASE("downsample: subset without replacement when enough points") {
    const PointCloud c = random_cloud(11, 5000);
    const PointCloud d = downsample_points(c, 2048, 42);
    REQUIRE(d.points.size() == 2048);
    const auto orig = as_set(c);
    const auto got = as_set(d);
    CHECK(got.size() == 2048);  // all distinct
    for (const auto& p : got) CHECK(orig.count(p) == 1);
}

TEST_CASE("downsample: n equal to cloud size returns the same multiset") {
    const PointCloud c = random_cloud(13, 10);
    const PointCloud d = downsample_points(c, 10, 99);
    REQUIRE(d.points.size() == 10);
    CHECK(as_set(d) == as_set(c));
}

TEST_CASE("downsample: with replacement keeps every original") {
    const PointCloud c = random_cloud(17, 100);
    const PointCloud d = downsample_points(c, 2048, 3);
    REQUIRE(d.points.size() == 2048);
    const auto orig = as_set(c);
    const auto got = as_set(d);
    CHECK(got == orig);  // every original present, nothing new
}

TEST_CASE("downsample: deterministic per seed, varies across seeds") {
    const PointCloud c = random_cloud(19, 300);
    const PointCloud a = downsample_points(c, 64, 7);
    const PointCloud b = downsample_points(c, 64, 7);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(a.points[i].x == b.points[i].x);
        CHECK(a.points[i].y == b.points[i].y);
        CHECK(a.points[i].z == b.points[i].z);
    }
    const PointCloud other = downsample_points(c, 64, 8);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.points.size(); ++i)
        if (a.points[i].x != other.points[i].x) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("downsample: empty cloud throws") {
    CHECK_THROWS_AS(downsample_points(PointCloud{}, 5, 0), EmptyCloud);
}

TEST_CASE("bounding sphere encloses every point") {
    const PointCloud c = random_cloud(23, 400, 2.0, {1, 2, 3});
    const BoundingSphere bs = bounding_sphere(c);
    double max_d = 0.0;
    for (const Vec3& p : c.points) max_d = std::max(max_d, (p - bs.center).norm());
    CHECK(max_d == doctest::Approx(bs.radius).epsilon(1e-12));
}
