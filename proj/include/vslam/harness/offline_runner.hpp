#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vslam/evaluation.hpp"
#include "vslam/harness/config.hpp"
#include "vslam/slam.hpp"
#include "vslam/slam_map.hpp"

namespace vslam::harness {

struct FrameRecord {
    std::uint64_t frame_id = 0;
    double t = 0.0;
    std::size_t captured_features = 0;
    std::size_t matched = 0;
    double track_ms = 0.0;
    bool skipped = false;
    bool lost = false;
};

struct TimingStats {
    double median_ms = 0.0;
    double p95_ms = 0.0;
    std::size_t samples = 0;
};

TimingStats summarize_ms(std::vector<double> values);

struct RunReport {
    std::size_t frames_total = 0;
    std::size_t frames_processed = 0;
    std::size_t frames_skipped = 0;
    std::size_t frames_lost = 0;
    std::size_t keyframes = 0;
    std::size_t map_points = 0;
    bool initialized = false;
    TrackingMode final_mode = TrackingMode::uninitialized;
    TimingStats capture;
    TimingStats track;
    double max_dt = 0.0;
    std::optional<AteReport> ate;
    std::string ate_note;  // why ATE is absent
    double map_rms_px = 0.0;

    std::vector<FrameRecord> frames;
    Trajectory estimate;
    Trajectory ground_truth;
    MapSnapshot map;
    std::vector<std::string> artifacts;  // files written, relative to out_dir
};

struct RunHooks {
    /// Sees every frame after noise and before hand-off to the tracker.
    std::function<void(FeatureFrame&)> frame_filter;
};

/// Offline replay: scene + trajectory -> frames at input_fps -> SLAM -> report.
///
/// The driver walks a simulated clock. A frame at tick t is skipped when the
/// tracker is still busy on the simulated timeline (t < busy_until); each
/// handed-off frame occupies the tracker for track_cost_ms + track_delay_ms.
/// Results depend only on the config, so repeated runs are identical.
/// Artifacts are written to cfg.out_dir unless it is empty.
RunReport run_offline(const RunConfig& cfg, const RunHooks& hooks = {});
RunReport run_offline(const RunConfig& cfg, const MeshModel& mesh, const RunHooks& hooks = {});

void write_frames_csv(std::ostream& out, const std::vector<FrameRecord>& frames);
void write_report_text(std::ostream& out, const RunReport& report, const RunConfig& cfg);
std::string report_json(const RunReport& report, const RunConfig& cfg);

}  // namespace vslam::harness
