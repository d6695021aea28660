#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vslam/lm.hpp"
#include "vslam/projection.hpp"
#include "vslam/slam_map.hpp"

namespace vslam {

struct SlamConfig {
    std::size_t min_init_matches = 50;
    double min_init_parallax_deg = 1.0;
    std::size_t min_tracked_points = 20;
    double kf_tracked_ratio = 0.9;
    std::size_t ba_window = 5;
    double min_triangulation_parallax_deg = 0.5;
    double max_reproj_px = 1.0;
    // Fraction of matches that must triangulate in front of both views at initialization.
    double min_init_cheirality_ratio = 0.9;
    LmSettings lm;

    void validate() const;
};

enum class TrackingMode { uninitialized, tracking, lost };
std::string to_string(TrackingMode mode);

struct TrackerState {
    TrackingMode mode = TrackingMode::uninitialized;
    RigidPose last_pose;
    RigidPose velocity;  // last_pose = previous_pose * velocity
    FeatureFrame last_frame;
};

struct TrackResult {
    RigidPose pose;
    std::size_t n_tracked = 0;
    bool lost = false;
};

/// Relative motion of camera 2 w.r.t. camera 1 in the vision convention
/// (x right, y down, z forward): X2 = rotation * X1 + translation, |translation| = 1.
struct TwoViewMotion {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
};

/// Normalized 8-point essential matrix from normalized image coordinates
/// (x = (u - cx) / fx, y = (v - cy) / fy). Rank-2 constraint enforced.
/// nullopt with fewer than 8 correspondences or a degenerate (e.g. planar) configuration.
std::optional<Mat3> essential_eight_point(const std::vector<Vec2>& x1, const std::vector<Vec2>& x2);

/// The four (R, t) factorizations of an essential matrix.
std::vector<TwoViewMotion> decompose_essential(const Mat3& e);

/// Two-view initialization. On success keyframe 0 sits at the identity, the
/// median depth of the points in view 1 is 1, and the returned state is tracking.
std::optional<std::pair<SlamMap, TrackerState>> try_initialize(const FeatureFrame& f1, const FeatureFrame& f2,
                                                               const CameraIntrinsics& intrinsics,
                                                               const SlamConfig& cfg);

/// Constant-velocity prediction followed by motion-only BA against the map.
/// Ground-truth poses carried by frames are never read.
TrackResult track_frame(const FeatureFrame& frame, const SlamMap& map, TrackerState& state,
                        const CameraIntrinsics& intrinsics, const SlamConfig& cfg);

/// Keyframe policy for the frame stored in state.last_frame.
///
/// True when tracked points drop below kf_tracked_ratio of the map points seen
/// by the last keyframe, or when at least min_init_matches unmapped ids shared
/// with the last keyframe already have triangulation parallax.
bool need_keyframe(const TrackResult& result, const SlamMap& map, const TrackerState& state,
                   const CameraIntrinsics& intrinsics, const SlamConfig& cfg);

/// Adds the keyframe and triangulates unmapped ids it shares with the previous
/// keyframe. Returns the number of new map points. Does not run BA.
std::size_t insert_keyframe_and_map(const FeatureFrame& frame, const RigidPose& pose, SlamMap& map,
                                    const SlamConfig& cfg, const CameraIntrinsics& intrinsics);

}  // namespace vslam
