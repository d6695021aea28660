#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "vslam/projection.hpp"

namespace vslam::harness {

struct CaptureBenchRow {
    std::size_t count = 0;
    std::size_t features = 0;  // visible features per capture
    double median_ms = 0.0;
    double p95_ms = 0.0;
};

struct CaptureBenchResult {
    std::vector<CaptureBenchRow> rows;
    double slope_ms = 0.0;  // per vertex
    double intercept_ms = 0.0;
    std::optional<double> r_squared;  // undefined for fewer than two distinct counts
};

/// Times capture_frame_into (reused output buffer) on seeded point clouds of each size (strictly ascending),
/// viewed from 3 units away so the whole cloud is in the frustum.
CaptureBenchResult benchmark_capture(const std::vector<std::size_t>& counts, int repetitions,
                                     const CameraIntrinsics& intrinsics = {}, std::uint64_t seed = 0);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::optional<double> r_squared;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

void write_bench_csv(std::ostream& out, const CaptureBenchResult& result);

}  // namespace vslam::harness
