#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace vslam {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

/// Unique mesh vertex identifier. Doubles as the feature descriptor and the map-point key.
using VertexId = std::uint32_t;
using KeyFrameId = std::uint32_t;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Camera-to-world rigid transform. The camera looks down its local -z axis, +y up.
struct RigidPose {
    Quat rotation = Quat::Identity();
    Vec3 translation = Vec3::Zero();

    RigidPose() = default;
    RigidPose(const Quat& q, const Vec3& t) : rotation(q.normalized()), translation(t) {}
    RigidPose(const Mat3& r, const Vec3& t) : rotation(Quat(r).normalized()), translation(t) {}

    static RigidPose identity() { return {}; }

    Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }

    RigidPose inverse() const {
        const Quat qi = rotation.conjugate();
        return {qi, -(qi * translation)};
    }

    RigidPose operator*(const RigidPose& rhs) const {
        return {rotation * rhs.rotation, rotation * rhs.translation + translation};
    }

    Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }

    Mat4 matrix() const {
        Mat4 m = Mat4::Identity();
        m.topLeftCorner<3, 3>() = rotation_matrix();
        m.topRightCorner<3, 1>() = translation;
        return m;
    }

    /// World-to-camera matrix (the renderer's view matrix).
    Mat4 view_matrix() const { return inverse().matrix(); }

    bool is_unit(double tol = 1e-9) const { return std::abs(rotation.norm() - 1.0) <= tol; }
};

struct CameraIntrinsics {
    double fov_y_deg = 90.0;
    int width_px = 1024;
    int height_px = 1024;
    double near = 0.1;
    double far = 100.0;

    double aspect() const { return static_cast<double>(width_px) / static_cast<double>(height_px); }
    double focal_ndc() const;  // 1 / tan(fov_y / 2)
    double fx() const { return 0.5 * width_px * focal_ndc() / aspect(); }
    double fy() const { return 0.5 * height_px * focal_ndc(); }
    double cx() const { return 0.5 * width_px; }
    double cy() const { return 0.5 * height_px; }

    void validate() const;
};

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace vslam
