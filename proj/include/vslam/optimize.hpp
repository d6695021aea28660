#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vslam/lm.hpp"
#include "vslam/se3.hpp"
#include "vslam/slam_map.hpp"
#include "vslam/types.hpp"

namespace vslam {

/// Pixel projection of a world point, nullopt when view depth <= 1e-9.
std::optional<Vec2> project_point(const Vec3& point, const RigidPose& pose, const CameraIntrinsics& intrinsics);

struct ReprojectionTerm {
    Vec2 residual = Vec2::Zero();  // predicted - measured
    Eigen::Matrix<double, 2, 6> d_pose = Eigen::Matrix<double, 2, 6>::Zero();
    Eigen::Matrix<double, 2, 3> d_point = Eigen::Matrix<double, 2, 3>::Zero();
    bool valid = false;  // false when the point is at or behind the camera
};

/// Residual and Jacobians w.r.t. the right-perturbation tangent of `pose` and the world point.
ReprojectionTerm reprojection_residual(const Vec3& point, const RigidPose& pose, const CameraIntrinsics& intrinsics,
                                       const Vec2& measured);

struct Triangulation {
    Vec3 point = Vec3::Zero();
    double depth1 = 0.0;
    double depth2 = 0.0;
    bool degenerate = true;
};

Triangulation triangulate_dlt(const RigidPose& pose1, const RigidPose& pose2, const Vec2& obs1, const Vec2& obs2,
                              const CameraIntrinsics& intrinsics);

/// Angle at `point` subtended by the two camera centers, degrees.
double parallax_deg(const Vec3& point, const RigidPose& pose1, const RigidPose& pose2);

struct PosePointPair {
    Vec3 point = Vec3::Zero();
    Vec2 measurement = Vec2::Zero();
};

struct MotionOnlyResult {
    RigidPose pose;
    LmSolution solution;
};

/// Pose-only refinement against fixed points. Throws std::invalid_argument with fewer than 4 pairs
/// and Error when the solver stalls.
MotionOnlyResult motion_only_ba(const RigidPose& pose_init, const std::vector<PosePointPair>& pairs,
                                const CameraIntrinsics& intrinsics, const LmSettings& settings);

enum class BaStatus { optimized, insufficient_free_variables, no_factors, stalled };
std::string to_string(BaStatus status);

struct WindowedBaReport {
    BaStatus status = BaStatus::no_factors;
    std::string message;
    int iterations = 0;
    std::size_t free_poses = 0;
    std::size_t fixed_poses = 0;
    std::size_t points = 0;
    std::size_t factors = 0;
    double initial_rms_px = 0.0;
    double final_rms_px = 0.0;
    LmSolution solution;
};

struct WindowedBaResult {
    WindowedBaReport report;
    std::map<KeyFrameId, RigidPose> poses;  // free poses only
    std::map<VertexId, Vec3> points;
};

/// The most recent `k` keyframe ids, oldest first.
std::vector<KeyFrameId> last_keyframes(const SlamMap& map, std::size_t k);

/// Solves the window without touching the map. The two oldest window keyframes
/// and every keyframe outside the window are held fixed.
WindowedBaResult solve_window(const SlamMap& map, const std::vector<KeyFrameId>& window,
                              const CameraIntrinsics& intrinsics, const LmSettings& settings);

/// solve_window, then one map.apply_update() when the solve succeeded. A
/// stalled solve leaves the map unmodified.
WindowedBaReport windowed_ba(SlamMap& map, const std::vector<KeyFrameId>& window, const CameraIntrinsics& intrinsics,
                             const LmSettings& settings);

}  // namespace vslam
