#pragma once

#include "permaloc/geometry.hpp"

#include <string>
#include <vector>

namespace permaloc {

// Scan file: little-endian binary, N records of 4 float32 (x, y, z, reflectivity).
PointCloud read_scan(const std::string& path);
void write_scan(const std::string& path, const PointCloud& cloud);

// Pose file: one line per frame, 12 floats = row-major 3x4 [R | t].
std::vector<Pose> read_poses(const std::string& path);
void write_poses(const std::string& path, const std::vector<Pose>& poses);

// Raster file: u32 H, u32 W, then H*W float32 row-major, little-endian.
struct Raster {
    uint32_t h = 0;
    uint32_t w = 0;
    std::vector<float> data;

    float at(uint32_t r, uint32_t c) const { return data[r * w + c]; }
    float& at(uint32_t r, uint32_t c) { return data[r * w + c]; }
};
Raster read_raster(const std::string& path);
void write_raster(const std::string& path, const Raster& raster);

// Per-point label sidecar: u8 per point, 1 = movable-removed, 0 = kept.
std::vector<uint8_t> read_labels(const std::string& path);
void write_labels(const std::string& path, const std::vector<uint8_t>& labels);

} // namespace permaloc
