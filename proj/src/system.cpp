#include "vslam/system.hpp"

#include "vslam/association.hpp"

namespace vslam {

SlamSystem::SlamSystem(const CameraIntrinsics& intrinsics, const SlamConfig& cfg, SystemOptions options)
    : intrinsics_(intrinsics), cfg_(cfg), options_(options), kf_queue_(options.keyframe_queue_capacity) {
    intrinsics_.validate();
    cfg_.validate();
    mapper_ = std::thread([this] { mapping_loop(); });
}

SlamSystem::~SlamSystem() {
    kf_queue_.close();
    if (mapper_.joinable()) mapper_.join();
}

void SlamSystem::record_pose(double t, const RigidPose& pose) {
    std::lock_guard lk(traj_mutex_);
    trajectory_.push_back({t, pose});
}

FrameOutcome SlamSystem::process_frame(const FeatureFrame& frame) {
    check_frame_ids(frame);
    FrameOutcome out;
    out.frame_id = frame.frame_id;
    out.timestamp = frame.timestamp;

    switch (state_.mode) {
        case TrackingMode::lost:
            out.mode = TrackingMode::lost;
            out.lost = true;
            return out;

        case TrackingMode::uninitialized: {
            if (!reference_) {
                reference_ = frame;
                out.mode = TrackingMode::uninitialized;
                return out;
            }
            out.matched = match_frames(*reference_, frame).size();
            if (out.matched < cfg_.min_init_matches) {
                reference_ = frame;
                out.mode = TrackingMode::uninitialized;
                return out;
            }
            auto init = try_initialize(*reference_, frame, intrinsics_, cfg_);
            if (!init) {
                out.mode = TrackingMode::uninitialized;
                return out;
            }
            {
                // The empty pre-init map is at version 0, so the replacement keeps versions monotone.
                std::unique_lock lk(map_mutex_);
                map_ = std::move(init->first);
            }
            state_ = std::move(init->second);
            mode_ = TrackingMode::tracking;
            record_pose(reference_->timestamp, RigidPose::identity());
            record_pose(frame.timestamp, state_.last_pose);
            reference_.reset();
            out.mode = TrackingMode::tracking;
            out.pose = state_.last_pose;
            out.n_tracked = out.matched;
            out.initialized = true;
            out.keyframe = true;
            return out;
        }

        case TrackingMode::tracking: break;
    }

    TrackResult res;
    bool want_kf = false;
    {
        std::shared_lock lk(map_mutex_);
        out.matched = match_to_map(frame, map_).size();
        res = track_frame(frame, map_, state_, intrinsics_, cfg_);
        if (!res.lost) want_kf = need_keyframe(res, map_, state_, intrinsics_, cfg_);
    }
    out.n_tracked = res.n_tracked;
    if (res.lost) {
        mode_ = TrackingMode::lost;
        out.mode = TrackingMode::lost;
        out.lost = true;
        return out;
    }
    out.mode = TrackingMode::tracking;
    out.pose = res.pose;
    record_pose(frame.timestamp, res.pose);

    if (want_kf) {
        out.keyframe = true;
        ++kfs_submitted_;
        kf_queue_.push({frame, res.pose});
        if (options_.synchronous_mapping) wait_idle();
    }
    return out;
}

void SlamSystem::wait_idle() {
    std::unique_lock lk(idle_mutex_);
    idle_cv_.wait(lk, [&] { return kfs_done_ >= kfs_submitted_.load(); });
}

void SlamSystem::mapping_loop() {
    while (auto job = kf_queue_.pop()) {
        std::vector<KeyFrameId> window;
        {
            std::unique_lock lk(map_mutex_);
            insert_keyframe_and_map(job->frame, job->pose, map_, cfg_, intrinsics_);
            window = last_keyframes(map_, cfg_.ba_window);
        }
        WindowedBaResult ba;
        {
            // Only this thread writes the map, so the solve can run under a reader lock.
            std::shared_lock lk(map_mutex_);
            ba = solve_window(map_, window, intrinsics_, cfg_.lm);
        }
        if (ba.report.status == BaStatus::optimized) {
            std::unique_lock lk(map_mutex_);
            map_.apply_update(ba.poses, ba.points);
        }
        if (options_.keep_ba_traces) {
            std::lock_guard lk(traj_mutex_);
            ba_reports_.push_back(std::move(ba.report));
        }
        {
            std::lock_guard lk(idle_mutex_);
            ++kfs_done_;
        }
        idle_cv_.notify_all();
    }
}

std::uint64_t SlamSystem::map_version() const {
    std::shared_lock lk(map_mutex_);
    return map_.version();
}

MapSnapshot SlamSystem::snapshot() const {
    std::shared_lock lk(map_mutex_);
    return snapshot_of(map_);
}

std::vector<TimedPose> SlamSystem::trajectory() const {
    std::lock_guard lk(traj_mutex_);
    return trajectory_;
}

std::vector<WindowedBaReport> SlamSystem::ba_reports() const {
    std::lock_guard lk(traj_mutex_);
    return ba_reports_;
}

}  // namespace vslam
