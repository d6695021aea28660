#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <thread>
#include <vector>

#include "vslam/concurrency.hpp"
#include "vslam/evaluation.hpp"
#include "vslam/optimize.hpp"
#include "vslam/slam.hpp"

namespace vslam {

struct SystemOptions {
    /// Tracking waits for mapping to absorb every keyframe before the next
    /// frame. Required for reproducible offline runs.
    bool synchronous_mapping = true;
    std::size_t keyframe_queue_capacity = 4;
    bool keep_ba_traces = false;
};

struct FrameOutcome {
    std::uint64_t frame_id = 0;
    double timestamp = 0.0;
    TrackingMode mode = TrackingMode::uninitialized;
    std::optional<RigidPose> pose;
    std::size_t matched = 0;  // features paired with map points (or with the reference frame before init)
    std::size_t n_tracked = 0;
    bool keyframe = false;
    bool initialized = false;  // this frame completed initialization
    bool lost = false;
};

/// Tracking front-end plus a mapping thread that owns triangulation and windowed BA.
///
/// process_frame() must be called from a single tracking context. The map is
/// shared under a reader/writer lock: tracking and BA solves read, keyframe
/// insertion and BA commits write. Keyframes reach mapping through a bounded
/// queue; a full queue blocks tracking.
class SlamSystem {
public:
    SlamSystem(const CameraIntrinsics& intrinsics, const SlamConfig& cfg, SystemOptions options = {});
    ~SlamSystem();

    SlamSystem(const SlamSystem&) = delete;
    SlamSystem& operator=(const SlamSystem&) = delete;

    FrameOutcome process_frame(const FeatureFrame& frame);

    /// Blocks until every queued keyframe has been mapped.
    void wait_idle();

    TrackingMode mode() const noexcept { return mode_.load(); }
    std::uint64_t map_version() const;
    MapSnapshot snapshot() const;
    std::size_t keyframes_submitted() const noexcept { return kfs_submitted_.load(); }

    template <class F>
    auto with_map(F&& f) const {
        std::shared_lock lk(map_mutex_);
        return f(static_cast<const SlamMap&>(map_));
    }

    /// Estimated camera-to-world poses of every tracked frame, map gauge.
    std::vector<TimedPose> trajectory() const;
    std::vector<WindowedBaReport> ba_reports() const;

    const CameraIntrinsics& intrinsics() const noexcept { return intrinsics_; }
    const SlamConfig& config() const noexcept { return cfg_; }

private:
    struct KeyFrameJob {
        FeatureFrame frame;
        RigidPose pose;
    };

    void mapping_loop();
    void record_pose(double t, const RigidPose& pose);

    const CameraIntrinsics intrinsics_;
    const SlamConfig cfg_;
    const SystemOptions options_;

    // Tracking-context state.
    TrackerState state_;
    std::optional<FeatureFrame> reference_;

    std::atomic<TrackingMode> mode_{TrackingMode::uninitialized};

    mutable std::shared_mutex map_mutex_;
    SlamMap map_;

    mutable std::mutex traj_mutex_;
    std::vector<TimedPose> trajectory_;
    std::vector<WindowedBaReport> ba_reports_;

    BoundedQueue<KeyFrameJob> kf_queue_;
    std::mutex idle_mutex_;
    std::condition_variable idle_cv_;
    std::atomic<std::size_t> kfs_submitted_{0};
    std::size_t kfs_done_ = 0;  // guarded by idle_mutex_
    std::thread mapper_;
};

}  // namespace vslam
