#include "fractalsea/terrain.hpp"

#include "fractalsea/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fractalsea {

namespace {

int quantize_color(double c) { return static_cast<int>(std::clamp(std::floor(c * 255.0 + 0.5), 0.0, 255.0)); }

} // namespace

PointCloud to_pointcloud(const RgbdPatch &map, int stride, double height_scale, double cell_size) {
    if (stride < 1) throw DomainError("stride must be >= 1");
    PointCloud pc;
    pc.stride = stride;
    for (int v = 0; v < map.height(); v += stride)
        for (int u = 0; u < map.width(); u += stride) {
            ColoredPoint p;
            p.position = {u * cell_size, v * cell_size, height_scale * (1.0 - map.at(RgbdPatch::kDepth, u, v))};
            p.color = {map.at(0, u, v), map.at(1, u, v), map.at(2, u, v)};
            pc.points.push_back(p);
        }
    return pc;
}

PointCloud to_pointcloud(const TerrainMap &map, int stride, double height_scale, double cell_size) {
    return to_pointcloud(map.raster, stride, height_scale, cell_size);
}

PointCloud to_pointcloud_pinhole(const RgbdPatch &map, int stride, const PinholeIntrinsics &k) {
    if (stride < 1) throw DomainError("stride must be >= 1");
    if (!(k.fx > 0 && k.fy > 0 && k.near > 0 && k.far > k.near)) throw DomainError("invalid pinhole intrinsics");
    PointCloud pc;
    pc.stride = stride;
    for (int v = 0; v < map.height(); v += stride)
        for (int u = 0; u < map.width(); u += stride) {
            const double z = k.near + map.at(RgbdPatch::kDepth, u, v) * (k.far - k.near);
            ColoredPoint p;
            p.position = {(u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z};
            p.color = {map.at(0, u, v), map.at(1, u, v), map.at(2, u, v)};
            pc.points.push_back(p);
        }
    return pc;
}

ElevationMap elevation(const RgbdPatch &map, double cell_size) {
    ElevationMap em;
    em.width = map.width();
    em.height = map.height();
    em.cell_size = cell_size;
    const float *d = map.plane(RgbdPatch::kDepth);
    em.heights.resize(map.pixel_count());
    for (std::size_t i = 0; i < em.heights.size(); ++i) em.heights[i] = 1.0f - d[i];
    return em;
}

ElevationMap elevation(const TerrainMap &map, double cell_size) { return elevation(map.raster, cell_size); }

void write_ply(const PointCloud &pc, std::ostream &out) {
    out << "ply\n"
        << "format ascii 1.0\n"
        << "comment stride " << pc.stride << "\n"
        << "element vertex " << pc.points.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n"
        << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        << "end_header\n";
    out << std::setprecision(17);
    for (const auto &p : pc.points)
        out << p.position[0] << " " << p.position[1] << " " << p.position[2] << " " << quantize_color(p.color[0]) << " "
            << quantize_color(p.color[1]) << " " << quantize_color(p.color[2]) << "\n";
}

void export_ply(const PointCloud &pc, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_ply(pc, out);
    if (!out) throw IoError("write failed for '" + path + "'");
}

PointCloud read_ply(std::istream &in) {
    std::string line;
    if (!std::getline(in, line) || line != "ply") throw IoError("not a PLY file");
    std::size_t count = 0;
    PointCloud pc;
    bool ascii = false;
    while (std::getline(in, line)) {
        if (line == "end_header") break;
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = fmt == "ascii";
        } else if (word == "element") {
            std::string name;
            ls >> name >> count;
        } else if (word == "comment") {
            std::string key;
            if (ls >> key && key == "stride") ls >> pc.stride;
        }
    }
    if (!ascii) throw IoError("only ASCII PLY is supported");
    pc.points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        ColoredPoint p;
        int r, g, b;
        if (!(in >> p.position[0] >> p.position[1] >> p.position[2] >> r >> g >> b))
            throw IoError("PLY vertex list truncated at element " + std::to_string(i));
        p.color = {r / 255.0, g / 255.0, b / 255.0};
        pc.points.push_back(p);
    }
    return pc;
}

PointCloud import_ply(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    try {
        return read_ply(in);
    } catch (const IoError &e) {
        throw IoError(path + ": " + e.what());
    }
}

void export_elevation_png(const ElevationMap &em, const std::string &path) {
    write_gray16_png(em.heights, em.width, em.height, path);
}

} // namespace fractalsea
