#include "vslam/harness/trajectory_gen.hpp"

#include <cmath>
#include <random>

namespace vslam::harness {

RigidPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    const Vec3 d = target - eye;
    if (!(d.norm() > 1e-12)) throw Error("look-at undefined: camera position equals target");
    const Vec3 f = d.normalized();
    const Vec3 x_raw = f.cross(up);
    if (!(x_raw.norm() > 1e-9)) throw Error("look-at undefined: view direction parallel to up");
    const Vec3 x = x_raw.normalized();
    const Vec3 y = x.cross(f);
    Mat3 r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = -f;
    return {r, eye};
}

namespace {

Vec3 lissajous_phases(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Vec3 ph;
    for (int i = 0; i < 3; ++i) ph[i] = 2.0 * kPi * static_cast<double>(rng() >> 11) * 0x1p-53;
    return ph;
}

}  // namespace

RigidPose trajectory_pose(const TrajectorySpec& spec, double t) {
    switch (spec.kind) {
        case TrajectoryKind::orbit: {
            if (!(spec.radius > 0.0)) throw Error("orbit radius must be positive");
            const double a = spec.angular_speed * t;
            return look_at(Vec3(spec.radius * std::cos(a), spec.height, spec.radius * std::sin(a)), spec.target);
        }
        case TrajectoryKind::lissajous: {
            const Vec3 ph = lissajous_phases(spec.seed);
            Vec3 p;
            for (int i = 0; i < 3; ++i) p[i] = spec.center[i] + spec.amplitude[i] * std::sin(2.0 * kPi * spec.frequency[i] * t + ph[i]);
            return look_at(p, spec.target);
        }
        case TrajectoryKind::file: break;
    }
    throw Error("trajectory kind has no analytic pose");
}

Trajectory generate_trajectory(const TrajectorySpec& spec, double duration_s) {
    if (spec.kind == TrajectoryKind::file) {
        auto traj = load_trajectory(spec.path);
        traj.validate();
        return traj;
    }
    if (!(spec.sample_hz > 0.0)) throw Error("sample rate must be positive");
    if (!(duration_s >= 0.0)) throw Error("duration must be non-negative");
    const auto n = static_cast<std::size_t>(std::floor(duration_s * spec.sample_hz + 1e-9));
    Trajectory traj;
    traj.samples.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / spec.sample_hz;
        traj.samples.push_back({t, trajectory_pose(spec, t)});
    }
    return traj;
}

}  // namespace vslam::harness
