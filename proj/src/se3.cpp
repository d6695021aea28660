#include "vslam/se3.hpp"

#include <cmath>

namespace vslam {

namespace {

constexpr double kSmallAngle = 1e-2;

// Coefficients of V = I + a W + b W^2 (left Jacobian of SO(3)).
void v_coefficients(double theta, double& a, double& b) {
    const double t2 = theta * theta;
    if (theta < kSmallAngle) {
        a = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
        b = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
    } else {
        a = (1.0 - std::cos(theta)) / t2;
        b = (theta - std::sin(theta)) / (t2 * theta);
    }
}

}  // namespace

Quat so3_exp(const Vec3& omega) {
    const double theta = omega.norm();
    double half_sinc;  // sin(theta/2) / theta
    if (theta < kSmallAngle) {
        const double t2 = theta * theta;
        half_sinc = 0.5 - t2 / 48.0 + t2 * t2 / 3840.0;
    } else {
        half_sinc = std::sin(0.5 * theta) / theta;
    }
    Quat q;
    q.w() = std::cos(0.5 * theta);
    q.vec() = half_sinc * omega;
    return q.normalized();
}

Vec3 so3_log(const Quat& q_in) {
    Quat q = q_in.normalized();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const double vnorm = q.vec().norm();
    if (vnorm < 1e-12) return 2.0 * q.vec() / q.w();
    const double theta = 2.0 * std::atan2(vnorm, q.w());
    return theta / vnorm * q.vec();
}

RigidPose se3_exp(const Vec6& xi) {
    const Vec3 omega = xi.head<3>();
    const Vec3 rho = xi.tail<3>();
    const double theta = omega.norm();
    double a, b;
    v_coefficients(theta, a, b);
    const Mat3 w = skew(omega);
    const Mat3 v = Mat3::Identity() + a * w + b * w * w;
    return {so3_exp(omega), v * rho};
}

Vec6 se3_log(const RigidPose& pose) {
    const Vec3 omega = so3_log(pose.rotation);
    const double theta = omega.norm();
    const Mat3 w = skew(omega);
    double c;  // V^-1 = I - W/2 + c W^2
    if (theta < kSmallAngle) {
        const double t2 = theta * theta;
        c = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
    } else {
        c = (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / (theta * theta);
    }
    const Mat3 v_inv = Mat3::Identity() - 0.5 * w + c * w * w;
    Vec6 xi;
    xi.head<3>() = omega;
    xi.tail<3>() = v_inv * pose.translation;
    return xi;
}

}  // namespace vslam
