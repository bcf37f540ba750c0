#pragma once

#include "fractalsea/stitcher.hpp"

#include <array>
#include <string>
#include <vector>

namespace fractalsea {

struct ColoredPoint {
    std::array<double, 3> position{}; // relative units
    std::array<double, 3> color{};    // RGB in [0, 1]
    bool operator==(const ColoredPoint &) const = default;
};

struct PointCloud {
    std::vector<ColoredPoint> points;
    int stride = 1;
};

struct ElevationMap {
    int width = 0, height = 0;
    double cell_size = 1.0;
    std::vector<float> heights; // row-major, in [0, 1]
};

// Explicit intrinsics for the optional pinhole un-projection. Camera depth is
// near + depth * (far - near) along +z.
struct PinholeIntrinsics {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
    double near = 1.0, far = 2.0;
};

// Orthographic top-down un-projection: pixel (u, v) with depth D maps to
// (u * cell_size, v * cell_size, height_scale * (1 - D)).
PointCloud to_pointcloud(const RgbdPatch &map, int stride, double height_scale, double cell_size = 1.0);
PointCloud to_pointcloud(const TerrainMap &map, int stride, double height_scale, double cell_size = 1.0);
PointCloud to_pointcloud_pinhole(const RgbdPatch &map, int stride, const PinholeIntrinsics &k);

// height = 1 - depth.
ElevationMap elevation(const RgbdPatch &map, double cell_size = 1.0);
ElevationMap elevation(const TerrainMap &map, double cell_size = 1.0);

// ASCII PLY: double x y z, uchar red green blue (round half up of 255 * c).
void export_ply(const PointCloud &pc, const std::string &path);
void write_ply(const PointCloud &pc, std::ostream &out);
PointCloud import_ply(const std::string &path);
PointCloud read_ply(std::istream &in);

void export_elevation_png(const ElevationMap &em, const std::string &path);

} // namespace fractalsea
