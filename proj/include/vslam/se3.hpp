#pragma once

#include "vslam/types.hpp"

namespace vslam {

/// Tangent vector (omega, rho): rotation first, then translation.
using Vec6 = Eigen::Matrix<double, 6, 1>;

inline Mat3 skew(const Vec3& w) {
    Mat3 m;
    m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
    return m;
}

Quat so3_exp(const Vec3& omega);
Vec3 so3_log(const Quat& q);

RigidPose se3_exp(const Vec6& xi);
Vec6 se3_log(const RigidPose& pose);

/// Right (local) perturbation: pose * exp(xi).
inline RigidPose retract(const RigidPose& pose, const Vec6& xi) { return pose * se3_exp(xi); }

}  // namespace vslam
