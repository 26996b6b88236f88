#include "permaloc/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace permaloc {

Pose pose_compose(const Pose& a, const Pose& b) {
    Pose out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

PointCloud pose_apply(const Pose& p, const PointCloud& cloud) {
    PointCloud out;
    out.frame_id = cloud.frame_id;
    out.points.reserve(cloud.size());
    for (const Point& q : cloud.points) {
        Eigen::Vector3d v = p.apply(q.position());
        out.points.emplace_back(static_cast<float>(v.x()), static_cast<float>(v.y()),
                                static_cast<float>(v.z()), q.reflectivity);
    }
    return out;
}

double rotation_angle(const Eigen::Matrix3d& r) {
    double c = (r.trace() - 1.0) * 0.5;
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c);
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& r) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d out = svd.matrixU() * svd.matrixV().transpose();
    if (out.determinant() < 0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1;
        out = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return out;
}

Pose pose_interpolate(const Pose& a, const Pose& b, double t) {
    Eigen::Quaterniond qa(a.rotation);
    Eigen::Quaterniond qb(b.rotation);
    Pose out;
    out.rotation = qa.slerp(t, qb).toRotationMatrix();
    out.translation = (1.0 - t) * a.translation + t * b.translation;
    return out;
}

KdTree::KdTree(const PointCloud& cloud) {
    std::size_t n = cloud.size();
    pts_.resize(3 * n);
    order_.resize(n);
    axis_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        pts_[3 * i + 0] = cloud.points[i].x;
        pts_[3 * i + 1] = cloud.points[i].y;
        pts_[3 * i + 2] = cloud.points[i].z;
        order_[i] = static_cast<int>(i);
    }
    if (n > 0) build(0, static_cast<int>(n));
}

namespace {
struct AxisLess {
    const std::vector<float>* p;
    int axis;
    bool operator()(int a, int b) const { return (*p)[3 * a + axis] < (*p)[3 * b + axis]; }
};
} // namespace

void KdTree::build(int lo, int hi) {
    if (hi - lo <= 1) return;
    // Split on the widest extent of the range for balanced query pruning.
    float mn[3] = {1e30f, 1e30f, 1e30f}, mx[3] = {-1e30f, -1e30f, -1e30f};
    for (int i = lo; i < hi; ++i) {
        for (int a = 0; a < 3; ++a) {
            float v = pts_[3 * order_[i] + a];
            mn[a] = std::min(mn[a], v);
            mx[a] = std::max(mx[a], v);
        }
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
        if (mx[a] - mn[a] > mx[axis] - mn[axis]) axis = a;
    int mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     AxisLess{&pts_, axis});
    axis_[mid] = static_cast<int8_t>(axis);
    build(lo, mid);
    build(mid + 1, hi);
}

std::pair<int, double> KdTree::nearest(const Eigen::Vector3d& q) const {
    if (empty()) throw std::invalid_argument("KdTree::nearest: empty tree");
    double qq[3] = {q.x(), q.y(), q.z()};
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    search(0, static_cast<int>(size()), qq, best, best_d2);
    return {best, best_d2};
}

void KdTree::search(int lo, int hi, const double q[3], int& best, double& best_d2) const {
    if (lo >= hi) return;
    int mid = lo + (hi - lo) / 2;
    int pi = order_[mid];
    double dx = q[0] - pts_[3 * pi + 0];
    double dy = q[1] - pts_[3 * pi + 1];
    double dz = q[2] - pts_[3 * pi + 2];
    double d2 = dx * dx + dy * dy + dz * dz;
    if (d2 < best_d2 || (d2 == best_d2 && (best < 0 || pi < best))) {
        best_d2 = d2;
        best = pi;
    }
    if (hi - lo == 1) return;
    int axis = axis_[mid];
    double delta = q[axis] - pts_[3 * pi + axis];
    if (delta <= 0) {
        search(lo, mid, q, best, best_d2);
        if (delta * delta < best_d2) search(mid + 1, hi, q, best, best_d2);
    } else {
        search(mid + 1, hi, q, best, best_d2);
        if (delta * delta < best_d2) search(lo, mid, q, best, best_d2);
    }
}

} // namespace permaloc
