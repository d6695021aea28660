#pragma once

#include "vslam/evaluation.hpp"
#include "vslam/harness/config.hpp"

namespace vslam::harness {

/// Camera-to-world pose at `eye` looking at `target` with world +y as up.
/// Throws Error when eye == target or the view direction is parallel to up.
RigidPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitY());

/// Ground-truth pose at time t for analytic kinds (orbit, lissajous).
RigidPose trajectory_pose(const TrajectorySpec& spec, double t);

/// floor(duration * sample_hz) samples at k / sample_hz. For kind == file the
/// trajectory is loaded from spec.path and duration/rate are ignored.
Trajectory generate_trajectory(const TrajectorySpec& spec, double duration_s);

}  // namespace vslam::harness
