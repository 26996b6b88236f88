#include "permaloc/mapping.hpp"

#include "permaloc/fusion_filter.hpp"
#include "permaloc/loam_features.hpp"
#include "permaloc/projection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <unordered_set>

namespace permaloc {

namespace {

constexpr double kVoxel = 0.2;

// 21 bits per axis around the origin; covers +-100 km at 0.2 m.
uint64_t voxel_key(const Eigen::Vector3d& p) {
    const auto cell = [](double v) {
        return static_cast<uint64_t>(static_cast<int64_t>(std::floor(v / kVoxel)) + (1 << 20)) &
               0x1fffff;
    };
    return (cell(p.x()) << 42) | (cell(p.y()) << 21) | cell(p.z());
}

FeatureSet preprocess_frame(const SessionFrame& frame, bool filter, const Segmenter& segmenter) {
    PointCloud cropped = crop_to_coverage(frame.cloud);
    if (filter) {
        const SegmentationResult seg = segmenter(cropped, frame.movable_boxes);
        cropped = filter_movable(cropped, seg).filtered;
    }
    return extract_frame_features(cropped);
}

void append_points(MapStore& map, const PointCloud& cloud, const Pose& pose, uint8_t type,
                   uint32_t source) {
    for (const Point& p : cloud.points) {
        const Eigen::Vector3d w = pose.apply(p.position());
        Point out(static_cast<float>(w.x()), static_cast<float>(w.y()),
                  static_cast<float>(w.z()), p.reflectivity);
        map.points.points.push_back(out);
        map.type.push_back(type);
        map.source.push_back(source);
    }
}

} // namespace

MapStore build_gt_map(const std::vector<SessionFrame>& frames, const std::vector<Pose>& poses,
                      bool filter, const Segmenter& segmenter, int threads) {
    if (frames.size() != poses.size())
        throw std::invalid_argument("build_gt_map: frame and pose counts differ");

    std::vector<FeatureSet> features(frames.size());
    if (!frames.empty()) {
        int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
        workers = std::max(1, std::min<int>(workers, static_cast<int>(frames.size())));

        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto run = [&] {
            for (std::size_t i = next.fetch_add(1); i < frames.size(); i = next.fetch_add(1)) {
                try {
                    features[i] = preprocess_frame(frames[i], filter, segmenter);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        for (int w = 1; w < workers; ++w) pool.emplace_back(run);
        run();
        for (std::thread& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    MapStore map;
    map.filtered = filter;
    map.poses = poses;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        append_points(map, features[i].edge, poses[i], kEdgePoint, static_cast<uint32_t>(i));
        append_points(map, features[i].planar, poses[i], kPlanarPoint, static_cast<uint32_t>(i));
    }

    std::unordered_set<uint64_t> seen;
    seen.reserve(map.size());
    std::size_t kept = 0;
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (!seen.insert(voxel_key(map.points.points[i].position())).second) continue;
        map.points.points[kept] = map.points.points[i];
        map.type[kept] = map.type[i];
        map.source[kept] = map.source[i];
        ++kept;
    }
    map.points.points.resize(kept);
    map.type.resize(kept);
    map.source.resize(kept);

    map.index = KdTree(map.points);
    return map;
}

std::optional<IndexedCloud> extract_submap(const MapStore& map, const Eigen::Vector3d& center,
                                           double radius) {
    if (radius <= 0.0) throw std::invalid_argument("extract_submap: radius must be positive");
    PointCloud out;
    const double r2 = radius * radius;
    for (const Point& p : map.points.points) {
        const double dx = p.x - center.x();
        const double dy = p.y - center.y();
        if (dx * dx + dy * dy <= r2) out.points.push_back(p);
    }
    if (out.points.empty()) return std::nullopt;
    return IndexedCloud(std::move(out));
}

namespace {

void put_u32(std::string& buf, uint32_t v) { buf.append(reinterpret_cast<char*>(&v), 4); }
void put_f32(std::string& buf, float v) { buf.append(reinterpret_cast<char*>(&v), 4); }

uint32_t take_u32(const std::string& buf, std::size_t& at) {
    if (at + 4 > buf.size()) throw std::runtime_error("truncated map file");
    uint32_t v;
    std::memcpy(&v, buf.data() + at, 4);
    at += 4;
    return v;
}

float take_f32(const std::string& buf, std::size_t& at) {
    if (at + 4 > buf.size()) throw std::runtime_error("truncated map file");
    float v;
    std::memcpy(&v, buf.data() + at, 4);
    at += 4;
    return v;
}

} // namespace

void save_map(const MapStore& map, const std::string& path) {
    std::string buf;
    buf.reserve(16 + map.size() * 17 + map.poses.size() * 48);
    buf.append("DMAP", 4);
    put_u32(buf, 1);
    buf.push_back(map.filtered ? 1 : 0);
    put_u32(buf, static_cast<uint32_t>(map.size()));
    for (std::size_t i = 0; i < map.size(); ++i) {
        const Point& p = map.points.points[i];
        put_f32(buf, p.x);
        put_f32(buf, p.y);
        put_f32(buf, p.z);
        buf.push_back(static_cast<char>(map.type[i]));
        put_u32(buf, map.source[i]);
    }
    put_u32(buf, static_cast<uint32_t>(map.poses.size()));
    for (const Pose& pose : map.poses)
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) put_f32(buf, static_cast<float>(pose.rotation(r, c)));
            put_f32(buf, static_cast<float>(pose.translation(r)));
        }

    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open map file for writing: " + path);
    const std::size_t written = std::fwrite(buf.data(), 1, buf.size(), f);
    const int closed = std::fclose(f);
    if (written != buf.size() || closed != 0)
        throw std::runtime_error("short write to map file: " + path);
}

MapStore load_map(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open map file: " + path);
    std::string buf;
    char chunk[1 << 16];
    std::size_t got;
    while ((got = std::fread(chunk, 1, sizeof chunk, f)) > 0) buf.append(chunk, got);
    std::fclose(f);

    std::size_t at = 0;
    if (buf.size() < 4 || buf.compare(0, 4, "DMAP") != 0)
        throw std::runtime_error("not a map file: " + path);
    at = 4;
    const uint32_t version = take_u32(buf, at);
    if (version != 1) throw std::runtime_error("unsupported map file version");
    if (at + 1 > buf.size()) throw std::runtime_error("truncated map file");
    MapStore map;
    map.filtered = buf[at++] != 0;

    const uint32_t count = take_u32(buf, at);
    map.points.points.reserve(count);
    map.type.reserve(count);
    map.source.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        Point p;
        p.x = take_f32(buf, at);
        p.y = take_f32(buf, at);
        p.z = take_f32(buf, at);
        if (at + 1 > buf.size()) throw std::runtime_error("truncated map file");
        map.points.points.push_back(p);
        map.type.push_back(static_cast<uint8_t>(buf[at++]));
        map.source.push_back(take_u32(buf, at));
    }

    const uint32_t pose_count = take_u32(buf, at);
    map.poses.reserve(pose_count);
    for (uint32_t i = 0; i < pose_count; ++i) {
        Pose pose;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) pose.rotation(r, c) = take_f32(buf, at);
            pose.translation(r) = take_f32(buf, at);
        }
        map.poses.push_back(pose);
    }
    if (at != buf.size()) throw std::runtime_error("trailing bytes in map file: " + path);

    map.index = KdTree(map.points);
    return map;
}

} // namespace permaloc
