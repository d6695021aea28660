#include "vslam/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/SVD>

namespace vslam {

void Trajectory::validate() const {
    if (samples.empty()) throw Error("trajectory has no samples");
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (!(samples[i].timestamp > samples[i - 1].timestamp)) {
            throw Error("trajectory timestamps not strictly increasing at sample " + std::to_string(i));
        }
    }
}

RigidPose Trajectory::interpolate(double t) const {
    if (samples.empty()) throw Error("cannot interpolate an empty trajectory");
    constexpr double kEdge = 1e-9;
    if (t < samples.front().timestamp - kEdge || t > samples.back().timestamp + kEdge) {
        throw Error("time " + std::to_string(t) + " outside trajectory span");
    }
    auto it = std::lower_bound(samples.begin(), samples.end(), t,
                               [](const TimedPose& s, double v) { return s.timestamp < v; });
    if (it == samples.begin()) return samples.front().pose;
    if (it == samples.end()) return samples.back().pose;
    if (it->timestamp == t) return it->pose;
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double alpha = (t - a.timestamp) / (b.timestamp - a.timestamp);
    return {a.pose.rotation.slerp(alpha, b.pose.rotation),
            Vec3((1.0 - alpha) * a.pose.translation + alpha * b.pose.translation)};
}

void write_trajectory(std::ostream& out, const Trajectory& traj) {
    char buf[320];
    for (const auto& s : traj.samples) {
        const auto& t = s.pose.translation;
        const auto& q = s.pose.rotation;
        std::snprintf(buf, sizeof buf, "%.9f %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", s.timestamp, t.x(), t.y(),
                      t.z(), q.x(), q.y(), q.z(), q.w());
        out << buf;
    }
}

Trajectory parse_trajectory(std::istream& in) {
    Trajectory traj;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        double ts, tx, ty, tz, qx, qy, qz, qw;
        if (!(ss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) throw ParseError("expected 8 numbers", lineno);
        const Quat q(qw, qx, qy, qz);
        if (!(q.norm() > 0.0)) throw ParseError("zero quaternion", lineno);
        traj.samples.push_back({ts, RigidPose(q, Vec3(tx, ty, tz))});
    }
    return traj;
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_trajectory(out, traj);
}

Trajectory load_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open trajectory " + path.string());
    return parse_trajectory(in);
}

std::vector<AssociatedPair> associate_by_timestamp(const Trajectory& est, const Trajectory& gt, double max_dt) {
    if (!(max_dt >= 0.0)) throw Error("max_dt must be non-negative");
    struct Candidate {
        double abs_dt;
        std::size_t e, g;
    };
    std::vector<Candidate> cands;
    const auto& gs = gt.samples;
    for (std::size_t e = 0; e < est.samples.size(); ++e) {
        const double t = est.samples[e].timestamp;
        auto lo = std::lower_bound(gs.begin(), gs.end(), t - max_dt,
                                   [](const TimedPose& s, double v) { return s.timestamp < v; });
        for (auto it = lo; it != gs.end() && it->timestamp <= t + max_dt; ++it) {
            const double d = std::abs(t - it->timestamp);
            if (d <= max_dt) cands.push_back({d, e, static_cast<std::size_t>(it - gs.begin())});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.abs_dt != b.abs_dt) return a.abs_dt < b.abs_dt;
        if (a.e != b.e) return a.e < b.e;
        return a.g < b.g;
    });
    std::vector<bool> used_e(est.samples.size(), false);
    std::vector<bool> used_g(gs.size(), false);
    std::vector<AssociatedPair> out;
    for (const auto& c : cands) {
        if (used_e[c.e] || used_g[c.g]) continue;
        used_e[c.e] = used_g[c.g] = true;
        out.push_back({c.e, c.g, est.samples[c.e].timestamp - gs[c.g].timestamp});
    }
    if (out.empty()) throw Error("no overlapping samples");
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.est_index < b.est_index; });
    return out;
}

Sim3 Sim3::inverse() const {
    Sim3 inv;
    inv.scale = 1.0 / scale;
    inv.rotation = rotation.transpose();
    inv.translation = -inv.scale * (inv.rotation * translation);
    return inv;
}

Sim3 align_sim3(const std::vector<Vec3>& source, const std::vector<Vec3>& target) {
    const std::size_t n = source.size();
    if (n != target.size()) throw Error("alignment inputs differ in length");
    if (n < 3) throw Error("alignment needs at least 3 position pairs");

    Vec3 mu_s = Vec3::Zero(), mu_t = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        mu_s += source[i];
        mu_t += target[i];
    }
    mu_s /= static_cast<double>(n);
    mu_t /= static_cast<double>(n);

    double var_s = 0.0;
    Mat3 cov = Mat3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 ds = source[i] - mu_s;
        var_s += ds.squaredNorm();
        cov += (target[i] - mu_t) * ds.transpose();
    }
    var_s /= static_cast<double>(n);
    cov /= static_cast<double>(n);
    if (!(var_s > 0.0)) throw Error("degenerate alignment: source positions coincide");

    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 d = svd.singularValues();
    if (d(1) <= 1e-10 * d(0)) throw Error("degenerate alignment: positions are collinear");
    Mat3 s = Mat3::Identity();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2, 2) = -1.0;

    Sim3 out;
    out.rotation = svd.matrixU() * s * svd.matrixV().transpose();
    out.scale = (d.asDiagonal() * s).trace() / var_s;
    out.translation = mu_t - out.scale * (out.rotation * mu_s);
    return out;
}

AteReport ate_rmse(const Trajectory& est, const Trajectory& gt, double max_dt) {
    const auto pairs = associate_by_timestamp(est, gt, max_dt);
    std::vector<Vec3> src, dst;
    src.reserve(pairs.size());
    dst.reserve(pairs.size());
    for (const auto& p : pairs) {
        src.push_back(est.samples[p.est_index].pose.translation);
        dst.push_back(gt.samples[p.gt_index].pose.translation);
    }
    AteReport rep;
    rep.alignment = align_sim3(src, dst);
    rep.n_matched = pairs.size();
    double sq = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double e = (rep.alignment.apply(src[i]) - dst[i]).norm();
        rep.per_sample_errors.push_back(e);
        rep.timestamps.push_back(gt.samples[pairs[i].gt_index].timestamp);
        sq += e * e;
        rep.mean += e;
        rep.max = std::max(rep.max, e);
    }
    const auto n = static_cast<double>(pairs.size());
    rep.rmse = std::sqrt(sq / n);
    rep.mean /= n;
    auto sorted = rep.per_sample_errors;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    rep.median = m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    return rep;
}

void write_ate_errors_csv(std::ostream& out, const AteReport& report) {
    out << "timestamp,error\n";
    char buf[96];
    for (std::size_t i = 0; i < report.per_sample_errors.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9f,%.17g\n", report.timestamps[i], report.per_sample_errors[i]);
        out << buf;
    }
}

}  // namespace vslam
