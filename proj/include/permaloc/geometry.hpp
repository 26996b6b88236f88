#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace permaloc {

struct Point {
    float x = 0.f;
    float y = 0.f;
    float z = 0.f;
    float reflectivity = 0.f;

    Point() = default;
    Point(float x_, float y_, float z_, float r_ = 0.f) : x(x_), y(y_), z(z_), reflectivity(r_) {}

    Eigen::Vector3d position() const { return {x, y, z}; }
    double range() const { return std::sqrt(double(x) * x + double(y) * y + double(z) * z); }
};

struct PointCloud {
    std::vector<Point> points;
    int frame_id = 0;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    const Point& operator[](std::size_t i) const { return points[i]; }
    Point& operator[](std::size_t i) { return points[i]; }
};

// Rigid SE(3) transform. Rotation kept as an explicit matrix so orthonormality
// is directly checkable.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static Pose identity() { return {}; }

    static Pose from_yaw(double yaw, const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
        Pose p;
        double c = std::cos(yaw), s = std::sin(yaw);
        p.rotation << c, -s, 0, s, c, 0, 0, 0, 1;
        p.translation = t;
        return p;
    }

    static Pose from_translation(const Eigen::Vector3d& t) {
        Pose p;
        p.translation = t;
        return p;
    }

    Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return rotation * x + translation; }

    Pose inverse() const {
        Pose p;
        p.rotation = rotation.transpose();
        p.translation = -p.rotation * translation;
        return p;
    }

    double yaw() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }

    bool is_valid(double tol = 1e-9) const {
        Eigen::Matrix3d e = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
        return e.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol &&
               translation.allFinite();
    }
};

// a then-after b: result applies b first, then a.
Pose pose_compose(const Pose& a, const Pose& b);

PointCloud pose_apply(const Pose& p, const PointCloud& cloud);

// Rotation angle of the relative rotation between two poses, radians.
double rotation_angle(const Eigen::Matrix3d& r);

// Re-orthonormalizes an interpolated or drifting rotation via SVD.
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& r);

// Fractional pose between a and b: slerp of rotation, lerp of translation,
// t in [0,1].
Pose pose_interpolate(const Pose& a, const Pose& b, double t);

// Static, balanced kd-tree over a point cloud. Immutable after build.
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(const PointCloud& cloud);

    std::size_t size() const { return pts_.size() / 3; }
    bool empty() const { return pts_.empty(); }

    // (point index, squared distance). Throws on an empty tree.
    std::pair<int, double> nearest(const Eigen::Vector3d& q) const;

private:
    void build(int lo, int hi);
    void search(int lo, int hi, const double q[3], int& best, double& best_d2) const;

    std::vector<float> pts_;    // xyz triples in tree order
    std::vector<int> order_;    // tree order -> original index
    std::vector<int8_t> axis_;  // split axis per subtree root position
};

} // namespace permaloc
