#include "fractalsea/error.hpp"
#include "fractalsea/rng.hpp"
#include "fractalsea/terrain.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace fractalsea;

TEST_SUITE("terrain") {

TEST_CASE("depth to height") {
    RgbdPatch m(1, 1);
    m.at(3, 0, 0) = 1.0f;
    CHECK(to_pointcloud(m, 1, 5.0).points[0].position[2] == 0.0);
    m.at(3, 0, 0) = 0.0f;
    const auto p = to_pointcloud(m, 1, 2.0).points[0];
    CHECK(p.position == std::array<double, 3>{0, 0, 2.0});
    m.at(3, 0, 0) = 0.25f;
    CHECK(to_pointcloud(m, 1, 4.0).points[0].position[2] == doctest::Approx(3.0));
}

TEST_CASE("stride subsampling") {
    RgbdPatch m(4, 4, 0.5f);
    const PointCloud pc = to_pointcloud(m, 2, 1.0, 0.5);
    REQUIRE(pc.points.size() == 4);
    CHECK(pc.points[0].position[0] == 0.0);
    CHECK(pc.points[1].position[0] == 1.0);
    CHECK(pc.points[2].position[1] == 1.0);
    CHECK(to_pointcloud(RgbdPatch(5, 3), 2, 1.0).points.size() == 6);
    CHECK_THROWS_AS(to_pointcloud(m, 0, 1.0), DomainError);
}

TEST_CASE("elevation") {
    RgbdPatch m(2, 1);
    m.at(3, 0, 0) = 0.0f;
    m.at(3, 1, 0) = 0.75f;
    const ElevationMap e = elevation(m, 3.0);
    CHECK(e.width == 2);
    CHECK(e.height == 1);
    CHECK(e.cell_size == 3.0);
    CHECK(e.heights[0] == 1.0f);
    CHECK(e.heights[1] == 0.25f);
}

TEST_CASE("PLY layout") {
    PointCloud empty;
    std::ostringstream a;
    write_ply(empty, a);
    CHECK(a.str().find("element vertex 0\n") != std::string::npos);
    CHECK(a.str().substr(a.str().size() - 11) == "end_header\n");

    PointCloud one;
    one.points.push_back({{1.5, -2, 0.25}, {1, 1, 1}});
    std::ostringstream b;
    write_ply(one, b);
    const std::string s = b.str();
    CHECK(s.rfind("ply\nformat ascii 1.0\n", 0) == 0);
    CHECK(s.find("property double x\nproperty double y\nproperty double z\n"
                 "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n") != std::string::npos);
    CHECK(s.substr(s.find("end_header\n") + 11) == "1.5 -2 0.25 255 255 255\n");

    PointCloud half;
    half.points.push_back({{0, 0, 0}, {0.5, 0.0, 2.0 / 255.0}});
    std::ostringstream c;
    write_ply(half, c);
    CHECK(c.str().substr(c.str().find("end_header\n") + 11) == "0 0 0 128 0 2\n"); // 127.5 rounds up
}

TEST_CASE("PLY round trip") {
    const auto dir = testutil::scratch("terrain_ply");
    PointCloud pc;
    pc.stride = 3;
    for (int i = 0; i < 100; ++i) {
        ColoredPoint p;
        for (int k = 0; k < 3; ++k) {
            p.position[k] = 100.0 * (rng::uniform(5, static_cast<std::uint64_t>(i), k) - 0.5);
            p.color[k] = std::floor(256.0 * rng::uniform(6, static_cast<std::uint64_t>(i), k)) / 255.0;
        }
        pc.points.push_back(p);
    }
    const auto path = (dir / "c.ply").string();
    export_ply(pc, path);
    const PointCloud back = import_ply(path);
    CHECK(back.stride == 3);
    CHECK(back.points == pc.points);
}

TEST_CASE("orthographic points land on their pixel") {
    RgbdPatch m(6, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x) m.at(3, x, y) = static_cast<float>((x + y) % 3) / 2.0f;
    const PointCloud pc = to_pointcloud(m, 1, 10.0, 2.0);
    REQUIRE(pc.points.size() == 30);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x) {
            const auto &p = pc.points[static_cast<std::size_t>(y) * 6 + x];
            CHECK(p.position[0] / 2.0 == x);
            CHECK(p.position[1] / 2.0 == y);
            CHECK(1.0 - p.position[2] / 10.0 == doctest::Approx(m.at(3, x, y)).epsilon(1e-7));
        }
}

TEST_CASE("pinhole un-projection") {
    RgbdPatch m(3, 3, 0.0f);
    PinholeIntrinsics k;
    k.fx = k.fy = 2.0;
    k.cx = k.cy = 1.0;
    k.near = 1.0;
    k.far = 3.0;
    m.at(3, 2, 1) = 0.5f;
    const PointCloud pc = to_pointcloud_pinhole(m, 1, k);
    const auto &p = pc.points[1 * 3 + 2];
    CHECK(p.position[2] == doctest::Approx(2.0));
    CHECK(p.position[0] == doctest::Approx(1.0)); // (u - cx) z / fx
    CHECK(p.position[1] == doctest::Approx(0.0));
    k.far = 0.5;
    CHECK_THROWS_AS(to_pointcloud_pinhole(m, 1, k), DomainError);
}

} // TEST_SUITE
