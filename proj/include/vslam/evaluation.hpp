#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "vslam/types.hpp"

namespace vslam {

struct TimedPose {
    double timestamp = 0.0;
    RigidPose pose;
};

struct Trajectory {
    std::vector<TimedPose> samples;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }

    /// Throws Error unless non-empty with strictly increasing timestamps.
    void validate() const;

    /// Linear position, spherical orientation interpolation. Throws outside the sampled span.
    RigidPose interpolate(double t) const;
};

/// TUM text format: "timestamp tx ty tz qx qy qz qw", '#' comments.
void write_trajectory(std::ostream& out, const Trajectory& traj);
Trajectory parse_trajectory(std::istream& in);
void save_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory load_trajectory(const std::filesystem::path& path);

struct AssociatedPair {
    std::size_t est_index = 0;
    std::size_t gt_index = 0;
    double dt = 0.0;  // est - gt
};

/// Greedy association: candidate pairs within max_dt are taken in order of
/// increasing |dt|, each sample used at most once. Output sorted by est index.
/// Throws Error("no overlapping samples") when nothing pairs.
std::vector<AssociatedPair> associate_by_timestamp(const Trajectory& est, const Trajectory& gt, double max_dt);

/// p -> scale * rotation * p + translation
struct Sim3 {
    double scale = 1.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
    Sim3 inverse() const;
};

/// Closed-form least-squares similarity taking `source` onto `target`
/// (centroid/covariance/SVD with reflection correction). Throws Error on
/// fewer than 3 pairs or a collinear configuration.
Sim3 align_sim3(const std::vector<Vec3>& source, const std::vector<Vec3>& target);

struct AteReport {
    double rmse = 0.0;
    double mean = 0.0;
    double median = 0.0;
    double max = 0.0;
    std::vector<double> per_sample_errors;
    std::vector<double> timestamps;  // gt timestamps of the matched samples
    Sim3 alignment;
    std::size_t n_matched = 0;
};

/// Translational ATE after Sim(3) alignment of the estimate onto ground truth.
AteReport ate_rmse(const Trajectory& est, const Trajectory& gt, double max_dt);

/// CSV "timestamp,error".
void write_ate_errors_csv(std::ostream& out, const AteReport& report);

}  // namespace vslam
