#include "vslam/harness/benchmark.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>

#include "vslam/harness/offline_runner.hpp"

namespace vslam::harness {

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw Error("fit inputs differ in length");
    LinearFit fit;
    const auto n = static_cast<double>(x.size());
    if (x.empty()) return fit;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) {
        fit.intercept = my;
        return fit;
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (syy > 0.0) {
        double ss_res = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - (fit.intercept + fit.slope * x[i]);
            ss_res += r * r;
        }
        fit.r_squared = 1.0 - ss_res / syy;
    } else {
        fit.r_squared = 1.0;
    }
    return fit;
}

CaptureBenchResult benchmark_capture(const std::vector<std::size_t>& counts, int repetitions,
                                     const CameraIntrinsics& intrinsics, std::uint64_t seed) {
    if (counts.empty()) throw Error("no vertex counts given");
    if (repetitions < 1) throw Error("repetitions must be at least 1");
    for (std::size_t i = 1; i < counts.size(); ++i) {
        if (!(counts[i] > counts[i - 1])) throw Error("vertex counts must be strictly ascending");
    }
    const RigidPose pose(Quat::Identity(), Vec3(0.0, 0.0, 3.0));
    const CaptureConfig cfg;
    CaptureBenchResult result;
    std::vector<double> xs, ys;
    for (const std::size_t count : counts) {
        SceneSpec spec;
        spec.kind = SceneKind::seeded_point_cloud;
        spec.count = static_cast<int>(count);
        spec.seed = seed;
        const MeshModel mesh = generate_scene(spec);
        std::vector<double> times;
        // The output buffer is reused across repetitions, as in a capture loop;
        // a fresh multi-megabyte allocation per call would time page faults.
        FeatureFrame f;
        capture_frame_into(f, mesh, pose, intrinsics, cfg, 0, 0.0);  // warm-up
        for (int r = 0; r < repetitions; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            capture_frame_into(f, mesh, pose, intrinsics, cfg, static_cast<std::uint64_t>(r), 0.0);
            times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        }
        const std::size_t features = f.features.size();
        const TimingStats s = summarize_ms(times);
        result.rows.push_back({count, features, s.median_ms, s.p95_ms});
        xs.push_back(static_cast<double>(count));
        ys.push_back(s.median_ms);
    }
    const LinearFit fit = fit_line(xs, ys);
    result.slope_ms = fit.slope;
    result.intercept_ms = fit.intercept;
    result.r_squared = fit.r_squared;
    return result;
}

void write_bench_csv(std::ostream& out, const CaptureBenchResult& result) {
    out << "count,features,median_ms,p95_ms\n";
    char buf[128];
    for (const auto& r : result.rows) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f,%.6f\n", r.count, r.features, r.median_ms, r.p95_ms);
        out << buf;
    }
}

}  // namespace vslam::harness
