#include "vslam/slam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

#include "vslam/association.hpp"
#include "vslam/optimize.hpp"

namespace vslam {

namespace {

const Mat3 kGlToCv = Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();

Vec2 normalized_coords(const VertexFeature& f, const CameraIntrinsics& k) {
    return {(f.u - k.cx()) / k.fx(), (f.v - k.cy()) / k.fy()};
}

// Unit viewing ray of a pixel in the renderer camera frame.
Vec3 camera_ray(const VertexFeature& f, const CameraIntrinsics& k) {
    return Vec3((f.u - k.cx()) / k.fx(), -(f.v - k.cy()) / k.fy(), -1.0).normalized();
}

// Camera-to-world pose (renderer convention) of view 2 when view 1 is the world frame.
RigidPose second_view_pose(const TwoViewMotion& m) {
    const Mat3 rt = m.rotation.transpose();
    return {Mat3(kGlToCv * rt * kGlToCv), Vec3(-kGlToCv * rt * m.translation)};
}

double median(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

bool reprojects_within(const Vec3& point, const RigidPose& pose, const Vec2& uv, const CameraIntrinsics& k,
                       double max_px) {
    auto pred = project_point(point, pose, k);
    return pred && (*pred - uv).norm() <= max_px;
}

}  // namespace

void SlamConfig::validate() const {
    if (min_init_matches < 8) throw Error("min_init_matches must be at least 8");
    if (!(min_init_parallax_deg > 0.0) || !(min_triangulation_parallax_deg > 0.0) || !(max_reproj_px > 0.0)) {
        throw Error("SLAM thresholds must be positive");
    }
    if (min_tracked_points < 4) throw Error("min_tracked_points must be at least 4");
    if (!(kf_tracked_ratio > 0.0 && kf_tracked_ratio <= 1.0)) throw Error("kf_tracked_ratio must be in (0, 1]");
    if (ba_window == 0) throw Error("ba_window must be positive");
    if (!(min_init_cheirality_ratio > 0.0 && min_init_cheirality_ratio <= 1.0)) {
        throw Error("min_init_cheirality_ratio must be in (0, 1]");
    }
    lm.validate();
}

std::string to_string(TrackingMode mode) {
    switch (mode) {
        case TrackingMode::uninitialized: return "uninitialized";
        case TrackingMode::tracking: return "tracking";
        case TrackingMode::lost: return "lost";
    }
    return "unknown";
}

std::optional<Mat3> essential_eight_point(const std::vector<Vec2>& x1, const std::vector<Vec2>& x2) {
    const std::size_t n = x1.size();
    if (n < 8 || x2.size() != n) return std::nullopt;

    auto normalizer = [](const std::vector<Vec2>& x) {
        Vec2 c = Vec2::Zero();
        for (const auto& p : x) c += p;
        c /= static_cast<double>(x.size());
        double mean_dist = 0.0;
        for (const auto& p : x) mean_dist += (p - c).norm();
        mean_dist /= static_cast<double>(x.size());
        const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
        Mat3 t;
        t << s, 0.0, -s * c.x(), 0.0, s, -s * c.y(), 0.0, 0.0, 1.0;
        return t;
    };
    const Mat3 t1 = normalizer(x1);
    const Mat3 t2 = normalizer(x2);

    Eigen::MatrixXd a(static_cast<Eigen::Index>(n), 9);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 p = t1 * x1[i].homogeneous();
        const Vec3 q = t2 * x2[i].homogeneous();
        a.row(static_cast<Eigen::Index>(i)) << q.x() * p.x(), q.x() * p.y(), q.x(), q.y() * p.x(), q.y() * p.y(),
            q.y(), p.x(), p.y(), 1.0;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // A second (near) null direction means the correspondences do not pin E down.
    if (sv.size() < 9 || sv(7) < 1e-8 * sv(0)) return std::nullopt;
    const Eigen::VectorXd e = svd.matrixV().col(8);
    Mat3 en;
    en << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);

    const Mat3 raw = t2.transpose() * en * t1;
    Eigen::JacobiSVD<Mat3> esvd(raw, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return Mat3(esvd.matrixU() * Vec3(1.0, 1.0, 0.0).asDiagonal() * esvd.matrixV().transpose());
}

std::vector<TwoViewMotion> decompose_essential(const Mat3& e) {
    Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    Mat3 v = svd.matrixV();
    if (u.determinant() < 0.0) u = -u;
    if (v.determinant() < 0.0) v = -v;
    Mat3 w;
    w << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
    const Mat3 r1 = u * w * v.transpose();
    const Mat3 r2 = u * w.transpose() * v.transpose();
    const Vec3 t = u.col(2).normalized();
    return {{r1, t}, {r1, -t}, {r2, t}, {r2, -t}};
}

std::optional<std::pair<SlamMap, TrackerState>> try_initialize(const FeatureFrame& f1, const FeatureFrame& f2,
                                                               const CameraIntrinsics& intrinsics,
                                                               const SlamConfig& cfg) {
    cfg.validate();
    const auto matches = match_frames(f1, f2);
    if (matches.size() < cfg.min_init_matches) return std::nullopt;

    std::vector<Vec2> x1, x2;
    x1.reserve(matches.size());
    x2.reserve(matches.size());
    for (const auto& m : matches) {
        x1.push_back(normalized_coords(f1.features[m.index_a], intrinsics));
        x2.push_back(normalized_coords(f2.features[m.index_b], intrinsics));
    }
    const auto e = essential_eight_point(x1, x2);
    if (!e) return std::nullopt;

    const RigidPose pose1 = RigidPose::identity();
    struct Candidate {
        RigidPose pose2;
        std::vector<Triangulation> tri;
        std::size_t good = 0;
    };
    std::vector<Candidate> candidates;
    for (const auto& motion : decompose_essential(*e)) {
        Candidate c;
        c.pose2 = second_view_pose(motion);
        c.tri.reserve(matches.size());
        for (const auto& m : matches) {
            const auto& a = f1.features[m.index_a];
            const auto& b = f2.features[m.index_b];
            auto t = triangulate_dlt(pose1, c.pose2, {a.u, a.v}, {b.u, b.v}, intrinsics);
            if (!t.degenerate && t.depth1 > 0.0 && t.depth2 > 0.0) ++c.good;
            c.tri.push_back(t);
        }
        candidates.push_back(std::move(c));
    }
    std::sort(candidates.begin(), candidates.end(), [](const auto& l, const auto& r) { return l.good > r.good; });
    const auto& best = candidates.front();
    if (static_cast<double>(best.good) < cfg.min_init_cheirality_ratio * static_cast<double>(matches.size())) {
        return std::nullopt;
    }
    if (candidates[1].good == best.good) return std::nullopt;

    std::vector<double> parallax;
    parallax.reserve(best.good);
    for (const auto& t : best.tri) {
        if (!t.degenerate && t.depth1 > 0.0 && t.depth2 > 0.0) parallax.push_back(parallax_deg(t.point, pose1, best.pose2));
    }
    if (median(parallax) < cfg.min_init_parallax_deg) return std::nullopt;

    std::vector<std::size_t> keep;
    std::vector<double> depths;
    for (std::size_t i = 0; i < matches.size(); ++i) {
        const auto& t = best.tri[i];
        if (t.degenerate || !(t.depth1 > 0.0 && t.depth2 > 0.0)) continue;
        if (parallax_deg(t.point, pose1, best.pose2) < cfg.min_triangulation_parallax_deg) continue;
        const auto& a = f1.features[matches[i].index_a];
        const auto& b = f2.features[matches[i].index_b];
        if (!reprojects_within(t.point, pose1, {a.u, a.v}, intrinsics, cfg.max_reproj_px)) continue;
        if (!reprojects_within(t.point, best.pose2, {b.u, b.v}, intrinsics, cfg.max_reproj_px)) continue;
        keep.push_back(i);
        depths.push_back(t.depth1);
    }
    if (keep.size() < cfg.min_init_matches) return std::nullopt;

    const double scale = 1.0 / median(depths);
    RigidPose pose2 = best.pose2;
    pose2.translation *= scale;

    SlamMap map;
    const KeyFrameId kf0 = map.add_keyframe(pose1, f1);
    const KeyFrameId kf1 = map.add_keyframe(pose2, f2);
    for (std::size_t i : keep) {
        const auto& a = f1.features[matches[i].index_a];
        const auto& b = f2.features[matches[i].index_b];
        map.add_point({matches[i].id, best.tri[i].point * scale, kf0}, {{kf0, Vec2(a.u, a.v)}, {kf1, Vec2(b.u, b.v)}});
    }

    TrackerState state;
    state.mode = TrackingMode::tracking;
    state.last_pose = pose2;
    state.velocity = RigidPose::identity();
    state.last_frame = f2;
    return std::make_pair(std::move(map), std::move(state));
}

TrackResult track_frame(const FeatureFrame& frame, const SlamMap& map, TrackerState& state,
                        const CameraIntrinsics& intrinsics, const SlamConfig& cfg) {
    if (state.mode != TrackingMode::tracking) throw std::logic_error("track_frame called while not tracking");

    TrackResult res;
    res.pose = state.last_pose;
    auto mark_lost = [&](std::size_t n) {
        res.pose = state.last_pose;
        res.n_tracked = n;
        res.lost = true;
        state.mode = TrackingMode::lost;
        return res;
    };

    const RigidPose predicted = state.last_pose * state.velocity;
    const auto matches = match_to_map(frame, map);
    if (matches.size() < cfg.min_tracked_points) return mark_lost(matches.size());

    std::vector<PosePointPair> pairs;
    pairs.reserve(matches.size());
    for (const auto& m : matches) {
        const auto& f = frame.features[m.feature_index];
        pairs.push_back({map.point(m.point_id)->position, Vec2(f.u, f.v)});
    }

    RigidPose refined;
    try {
        refined = motion_only_ba(predicted, pairs, intrinsics, cfg.lm).pose;
    } catch (const Error&) {
        return mark_lost(0);
    }

    std::size_t tracked = 0;
    for (const auto& p : pairs) {
        if (project_point(p.point, refined, intrinsics)) ++tracked;
    }
    if (tracked < cfg.min_tracked_points) return mark_lost(tracked);

    state.velocity = state.last_pose.inverse() * refined;
    state.last_pose = refined;
    state.last_frame = frame;
    res.pose = refined;
    res.n_tracked = tracked;
    return res;
}

bool need_keyframe(const TrackResult& result, const SlamMap& map, const TrackerState& state,
                   const CameraIntrinsics& intrinsics, const SlamConfig& cfg) {
    if (result.lost) return false;
    const KeyFrame* last = map.last_keyframe();
    if (!last) return true;

    const auto ref_points = map.points_observed_by(last->id).size();
    if (static_cast<double>(result.n_tracked) < cfg.kf_tracked_ratio * static_cast<double>(ref_points)) return true;

    const Mat3 r_kf = last->pose.rotation_matrix();
    const Mat3 r_cur = result.pose.rotation_matrix();
    const double cos_min = std::cos(deg_to_rad(cfg.min_triangulation_parallax_deg));
    std::size_t ready = 0;
    for (const auto& m : match_frames(last->frame, state.last_frame)) {
        if (map.has_point(m.id)) continue;
        const Vec3 a = r_kf * camera_ray(last->frame.features[m.index_a], intrinsics);
        const Vec3 b = r_cur * camera_ray(state.last_frame.features[m.index_b], intrinsics);
        if (a.dot(b) <= cos_min) ++ready;
    }
    return ready >= cfg.min_init_matches;
}

std::size_t insert_keyframe_and_map(const FeatureFrame& frame, const RigidPose& pose, SlamMap& map,
                                    const SlamConfig& cfg, const CameraIntrinsics& intrinsics) {
    const KeyFrame* prev_ptr = map.last_keyframe();
    std::optional<KeyFrame> prev;
    if (prev_ptr) prev = *prev_ptr;
    const KeyFrameId kf = map.add_keyframe(pose, frame);
    if (!prev) return 0;

    std::size_t created = 0;
    const auto& cur = map.keyframe(kf)->frame;
    for (const auto& m : match_frames(prev->frame, cur)) {
        if (map.has_point(m.id)) continue;
        const auto& a = prev->frame.features[m.index_a];
        const auto& b = cur.features[m.index_b];
        const Vec2 uva(a.u, a.v);
        const Vec2 uvb(b.u, b.v);
        const auto t = triangulate_dlt(prev->pose, pose, uva, uvb, intrinsics);
        if (t.degenerate || !(t.depth1 > 0.0 && t.depth2 > 0.0)) continue;
        if (parallax_deg(t.point, prev->pose, pose) < cfg.min_triangulation_parallax_deg) continue;
        if (!reprojects_within(t.point, prev->pose, uva, intrinsics, cfg.max_reproj_px)) continue;
        if (!reprojects_within(t.point, pose, uvb, intrinsics, cfg.max_reproj_px)) continue;
        map.add_point({m.id, t.point, prev->id}, {{prev->id, uva}, {kf, uvb}});
        ++created;
    }
    return created;
}

}  // namespace vslam
