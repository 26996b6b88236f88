#include "permaloc/projection.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace permaloc {

namespace {

constexpr double kDegPerRad = 180.0 / M_PI;

IndexMap build_index_map(int rows, int cols, const std::vector<int>& pixel_of_point) {
    IndexMap map;
    map.rows = rows;
    map.cols = cols;
    map.pixel_of_point = pixel_of_point;
    map.offsets.assign(static_cast<size_t>(rows) * cols + 1, 0);
    for (int p : pixel_of_point)
        if (p >= 0) ++map.offsets[p + 1];
    for (size_t i = 1; i < map.offsets.size(); ++i) map.offsets[i] += map.offsets[i - 1];
    map.indices.resize(map.offsets.back());
    std::vector<int> cursor(map.offsets.begin(), map.offsets.end() - 1);
    for (size_t i = 0; i < pixel_of_point.size(); ++i) {
        const int p = pixel_of_point[i];
        if (p >= 0) map.indices[cursor[p]++] = static_cast<int>(i);
    }
    return map;
}

} // namespace

bool BBox3D::contains(const Eigen::Vector3d& p) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    const Eigen::Vector3d d = p - center;
    const double lx = c * d.x() + s * d.y();
    const double ly = -s * d.x() + c * d.y();
    return std::abs(lx) <= size.x() * 0.5 + 1e-12 && std::abs(ly) <= size.y() * 0.5 + 1e-12 &&
           std::abs(d.z()) <= size.z() * 0.5 + 1e-12;
}

std::optional<std::pair<int, int>> front_pixel_of(const Point& p) {
    const double rho = p.range();
    if (rho <= 1e-6) return std::nullopt;
    const double azim = std::atan2(double(p.y), double(p.x)) * kDegPerRad;
    if (azim < -FrontImage::kAzimHalfDeg || azim >= FrontImage::kAzimHalfDeg) return std::nullopt;
    const double elev = std::asin(double(p.z) / rho) * kDegPerRad;
    if (elev < FrontImage::kElevMinDeg || elev > FrontImage::kElevMaxDeg) return std::nullopt;
    const double span = FrontImage::kElevMaxDeg - FrontImage::kElevMinDeg;
    int row = static_cast<int>(std::floor((FrontImage::kElevMaxDeg - elev) / span * FrontImage::kRows));
    if (row == FrontImage::kRows) row = FrontImage::kRows - 1;  // bottom edge inclusive
    const int col =
        static_cast<int>(std::floor((azim + FrontImage::kAzimHalfDeg) / FrontImage::kAzimStepDeg));
    return std::make_pair(row, col);
}

std::optional<std::pair<int, int>> bev_cell_of(const Point& p) {
    if (p.x < 0.f || p.x >= BevImage::kXMax || p.y < -BevImage::kYHalf || p.y >= BevImage::kYHalf)
        return std::nullopt;
    const int row = static_cast<int>(std::floor(p.x / BevImage::kCell));
    const int col = static_cast<int>(std::floor((p.y + BevImage::kYHalf) / BevImage::kCell));
    return std::make_pair(std::min(row, BevImage::kRows - 1), std::min(col, BevImage::kCols - 1));
}

std::pair<FrontImage, IndexMap> project_front(const PointCloud& cloud) {
    FrontImage img;
    std::vector<int> pixel_of_point(cloud.size(), -1);
    for (size_t i = 0; i < cloud.size(); ++i) {
        const auto pix = front_pixel_of(cloud.points[i]);
        if (!pix) continue;
        const int flat = FrontImage::index(pix->first, pix->second);
        pixel_of_point[i] = flat;
        const float rho = static_cast<float>(cloud.points[i].range());
        if (!img.validity[flat] || rho < img.range[flat]) {
            img.range[flat] = rho;
            img.reflectivity[flat] = cloud.points[i].reflectivity;
            img.validity[flat] = 1;
        }
    }
    return {std::move(img), build_index_map(FrontImage::kRows, FrontImage::kCols, pixel_of_point)};
}

std::pair<BevImage, IndexMap> project_bev(const PointCloud& cloud) {
    BevImage img;
    std::vector<int> pixel_of_point(cloud.size(), -1);
    for (size_t i = 0; i < cloud.size(); ++i) {
        const auto cell = bev_cell_of(cloud.points[i]);
        if (!cell) continue;
        const int flat = BevImage::index(cell->first, cell->second);
        pixel_of_point[i] = flat;
        const Point& p = cloud.points[i];
        if (img.count[flat] == 0.f) {
            img.min_height[flat] = p.z;
            img.max_height[flat] = p.z;
        } else {
            img.min_height[flat] = std::min(img.min_height[flat], p.z);
            img.max_height[flat] = std::max(img.max_height[flat], p.z);
        }
        img.count[flat] += 1.f;
        img.binary[flat] = 1.f;
        img.mean_reflectivity[flat] += p.reflectivity;
        img.mean_height[flat] += p.z;
    }
    for (int i = 0; i < BevImage::kRows * BevImage::kCols; ++i) {
        if (img.count[i] > 0.f) {
            img.mean_reflectivity[i] /= img.count[i];
            img.mean_height[i] /= img.count[i];
        }
    }
    return {std::move(img), build_index_map(BevImage::kRows, BevImage::kCols, pixel_of_point)};
}

PointCloud crop_to_coverage(const PointCloud& cloud) {
    PointCloud out;
    out.frame_id = cloud.frame_id;
    for (const Point& p : cloud.points) {
        if (front_pixel_of(p) || bev_cell_of(p)) out.points.push_back(p);
    }
    return out;
}

GtMasks gen_gt_masks(const PointCloud& cloud, const std::vector<BBox3D>& boxes) {
    GtMasks out;
    out.point_labels.assign(cloud.size(), 0);
    for (size_t i = 0; i < cloud.size(); ++i) {
        const Eigen::Vector3d pos = cloud.points[i].position();
        for (const BBox3D& box : boxes) {
            if (box.contains(pos)) {
                out.point_labels[i] = 1;
                break;
            }
        }
    }
    out.front.h = FrontImage::kRows;
    out.front.w = FrontImage::kCols;
    out.front.data.assign(size_t(FrontImage::kRows) * FrontImage::kCols, 0.f);
    out.bev.h = BevImage::kRows;
    out.bev.w = BevImage::kCols;
    out.bev.data.assign(size_t(BevImage::kRows) * BevImage::kCols, 0.f);
    for (size_t i = 0; i < cloud.size(); ++i) {
        if (!out.point_labels[i]) continue;
        if (const auto pix = front_pixel_of(cloud.points[i]))
            out.front.data[FrontImage::index(pix->first, pix->second)] = 1.f;
        if (const auto cell = bev_cell_of(cloud.points[i]))
            out.bev.data[BevImage::index(cell->first, cell->second)] = 1.f;
    }
    return out;
}

std::vector<BBox3D> read_boxes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<BBox3D> boxes;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        BBox3D b;
        double v[7];
        if (!(ss >> b.frame >> b.label >> v[0] >> v[1] >> v[2] >> v[3] >> v[4] >> v[5] >> v[6]))
            throw std::runtime_error("malformed file " + path + ": line " + std::to_string(line_no));
        b.center = {v[0], v[1], v[2]};
        b.size = {v[3], v[4], v[5]};
        b.yaw = v[6];
        boxes.push_back(b);
    }
    return boxes;
}

void write_boxes(const std::string& path, const std::vector<BBox3D>& boxes) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open file: " + path);
    out.precision(9);
    for (const BBox3D& b : boxes) {
        out << b.frame << ' ' << b.label << ' ' << b.center.x() << ' ' << b.center.y() << ' '
            << b.center.z() << ' ' << b.size.x() << ' ' << b.size.y() << ' ' << b.size.z() << ' '
            << b.yaw << '\n';
    }
    if (!out) throw std::runtime_error("malformed file " + path + ": short write");
}

} // namespace permaloc
