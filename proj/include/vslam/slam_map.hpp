#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vslam/projection.hpp"
#include "vslam/types.hpp"

namespace vslam {

struct KeyFrame {
    KeyFrameId id = 0;
    RigidPose pose;  // estimated, map gauge
    FeatureFrame frame;
};

struct MapPoint {
    VertexId id = 0;
    Vec3 position = Vec3::Zero();
    KeyFrameId first_kf = 0;
};

/// Keyframes, map points keyed by vertex id, and the keyframe/point observation graph.
///
/// Every mutating call bumps `version()`. Callers that share a map across
/// threads hold the lock (see SlamSystem); this class does no locking.
class SlamMap {
public:
    using Observations = std::map<KeyFrameId, Vec2>;

    std::uint64_t version() const noexcept { return version_; }

    const std::map<KeyFrameId, KeyFrame>& keyframes() const noexcept { return keyframes_; }
    const std::map<VertexId, MapPoint>& points() const noexcept { return points_; }

    const KeyFrame* keyframe(KeyFrameId id) const;
    const MapPoint* point(VertexId id) const;
    bool has_point(VertexId id) const { return points_.count(id) != 0; }
    const KeyFrame* last_keyframe() const;

    /// Observations of point `id`, keyed by keyframe.
    const Observations& observations(VertexId id) const;
    /// Ids of map points observed by keyframe `kf`, ascending.
    std::vector<VertexId> points_observed_by(KeyFrameId kf) const;
    std::size_t observation_count() const noexcept;

    /// Adds a keyframe with the next id and links its features to existing map points.
    KeyFrameId add_keyframe(const RigidPose& pose, FeatureFrame frame);
    /// Adds a point with observations in two or more keyframes.
    void add_point(const MapPoint& point, const std::vector<std::pair<KeyFrameId, Vec2>>& observations);

    /// Batched update from bundle adjustment; bumps the version once.
    void apply_update(const std::map<KeyFrameId, RigidPose>& poses, const std::map<VertexId, Vec3>& points);

    /// Throws Error if any structural invariant is broken.
    void check_invariants() const;

private:
    std::map<KeyFrameId, KeyFrame> keyframes_;
    std::map<VertexId, MapPoint> points_;
    std::map<VertexId, Observations> observations_;
    std::map<KeyFrameId, std::vector<VertexId>> kf_points_;
    KeyFrameId next_kf_ = 0;
    std::uint64_t version_ = 0;
};

/// Plain copy of the map's poses and positions, safe to hand across threads.
struct MapSnapshot {
    std::uint64_t version = 0;
    std::vector<std::pair<KeyFrameId, RigidPose>> keyframes;
    std::vector<std::pair<VertexId, Vec3>> points;
};

MapSnapshot snapshot_of(const SlamMap& map);

/// "KF kf_id tx ty tz qx qy qz qw" and "MP id x y z" records.
void write_map_snapshot(std::ostream& out, const MapSnapshot& snap);
MapSnapshot parse_map_snapshot(std::istream& in);

/// RMS pixel reprojection error over every observation in the map.
double map_rms_reprojection(const SlamMap& map, const CameraIntrinsics& intrinsics);

}  // namespace vslam
