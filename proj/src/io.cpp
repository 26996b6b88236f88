#include "permaloc/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace permaloc {

namespace {

[[noreturn]] void fail_open(const std::string& path) {
    throw std::runtime_error("cannot open file: " + path);
}

[[noreturn]] void fail_format(const std::string& path, const std::string& what) {
    throw std::runtime_error("malformed file " + path + ": " + what);
}

} // namespace

PointCloud read_scan(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_open(path);
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    if (bytes % (4 * sizeof(float)) != 0) fail_format(path, "size not a multiple of 16 bytes");
    PointCloud cloud;
    cloud.points.resize(bytes / (4 * sizeof(float)));
    if (!cloud.points.empty()) {
        in.read(reinterpret_cast<char*>(cloud.points.data()), static_cast<std::streamsize>(bytes));
        if (!in) fail_format(path, "short read");
    }
    return cloud;
}

void write_scan(const std::string& path, const PointCloud& cloud) {
    static_assert(sizeof(Point) == 4 * sizeof(float));
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_open(path);
    out.write(reinterpret_cast<const char*>(cloud.points.data()),
              static_cast<std::streamsize>(cloud.points.size() * sizeof(Point)));
    if (!out) fail_format(path, "short write");
}

std::vector<Pose> read_poses(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_open(path);
    std::vector<Pose> poses;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        double v[12];
        for (double& x : v) {
            if (!(ss >> x)) fail_format(path, "line " + std::to_string(line_no) + " has fewer than 12 values");
        }
        Pose p;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) p.rotation(r, c) = v[r * 4 + c];
            p.translation(r) = v[r * 4 + 3];
        }
        poses.push_back(p);
    }
    return poses;
}

void write_poses(const std::string& path, const std::vector<Pose>& poses) {
    std::ofstream out(path);
    if (!out) fail_open(path);
    char buf[32];
    for (const Pose& p : poses) {
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 4; ++c) {
                const double v = c < 3 ? p.rotation(r, c) : p.translation(r);
                std::snprintf(buf, sizeof(buf), "%.9g", v);
                out << buf << (r == 2 && c == 3 ? "\n" : " ");
            }
        }
    }
    if (!out) fail_format(path, "short write");
}

Raster read_raster(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_open(path);
    Raster r;
    uint32_t hw[2];
    in.read(reinterpret_cast<char*>(hw), sizeof(hw));
    if (!in) fail_format(path, "truncated header");
    r.h = hw[0];
    r.w = hw[1];
    r.data.resize(static_cast<size_t>(r.h) * r.w);
    in.read(reinterpret_cast<char*>(r.data.data()),
            static_cast<std::streamsize>(r.data.size() * sizeof(float)));
    if (!in) fail_format(path, "truncated payload");
    return r;
}

void write_raster(const std::string& path, const Raster& raster) {
    if (raster.data.size() != static_cast<size_t>(raster.h) * raster.w)
        throw std::invalid_argument("raster payload does not match header dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_open(path);
    const uint32_t hw[2] = {raster.h, raster.w};
    out.write(reinterpret_cast<const char*>(hw), sizeof(hw));
    out.write(reinterpret_cast<const char*>(raster.data.data()),
              static_cast<std::streamsize>(raster.data.size() * sizeof(float)));
    if (!out) fail_format(path, "short write");
}

std::vector<uint8_t> read_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_open(path);
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<uint8_t> labels(bytes);
    if (bytes > 0) {
        in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(bytes));
        if (!in) fail_format(path, "short read");
    }
    return labels;
}

void write_labels(const std::string& path, const std::vector<uint8_t>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_open(path);
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
    if (!out) fail_format(path, "short write");
}

} // namespace permaloc
