#include "support.hpp"

#include <cmath>

namespace vslam::test {

bool pinhole_uv(const Vec3& p_world, const RigidPose& cam_to_world, const CameraIntrinsics& k, Vec2& uv,
                double* depth) {
    const Mat3 r = cam_to_world.rotation.toRotationMatrix();
    const Vec3 pc = r.transpose() * (p_world - cam_to_world.translation);
    const double d = -pc.z();
    if (!(d > 1e-9)) return false;
    const double f = 1.0 / std::tan(0.5 * k.fov_y_deg * 3.14159265358979323846 / 180.0);
    const double aspect = double(k.width_px) / double(k.height_px);
    const double fx = 0.5 * k.width_px * f / aspect;
    const double fy = 0.5 * k.height_px * f;
    uv = Vec2(0.5 * k.width_px + fx * pc.x() / d, 0.5 * k.height_px - fy * pc.y() / d);
    if (depth) *depth = d;
    return true;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Vec3 v(n(rng), n(rng), n(rng));
    return v.normalized();
}

RigidPose random_pose(std::mt19937_64& rng, double max_angle, double max_offset) {
    const Quat q(Eigen::AngleAxisd(uniform(rng, -max_angle, max_angle), random_unit(rng)));
    const Vec3 t(uniform(rng, -max_offset, max_offset), uniform(rng, -max_offset, max_offset),
                 uniform(rng, -max_offset, max_offset));
    return {q, t};
}

RigidPose look_at(const Vec3& eye, const Vec3& target) {
    const Vec3 f = (target - eye).normalized();
    const Vec3 x = f.cross(Vec3::UnitY()).normalized();
    const Vec3 y = x.cross(f);
    Mat3 r;
    r << x, y, -f;
    return {r, eye};
}

MapFixture make_map_fixture(const std::vector<RigidPose>& poses, const std::vector<Vec3>& points,
                            const CameraIntrinsics& k) {
    MapFixture fx;
    fx.poses = poses;
    fx.points = points;
    std::vector<KeyFrameId> kf_ids;
    std::vector<FeatureFrame> frames;
    for (std::size_t i = 0; i < poses.size(); ++i) {
        FeatureFrame f;
        f.frame_id = i;
        f.timestamp = double(i);
        for (std::size_t j = 0; j < points.size(); ++j) {
            Vec2 uv;
            double d = 0.0;
            if (!pinhole_uv(points[j], poses[i], k, uv, &d)) continue;
            f.features.push_back({uv.x(), uv.y(), VertexId(j), d});
        }
        frames.push_back(f);
        kf_ids.push_back(fx.map.add_keyframe(poses[i], f));
    }
    for (std::size_t j = 0; j < points.size(); ++j) {
        std::vector<std::pair<KeyFrameId, Vec2>> obs;
        for (std::size_t i = 0; i < frames.size(); ++i) {
            for (const auto& feat : frames[i].features) {
                if (feat.id == j) obs.emplace_back(kf_ids[i], Vec2(feat.u, feat.v));
            }
        }
        if (obs.size() >= 2) fx.map.add_point({VertexId(j), points[j], kf_ids[0]}, obs);
    }
    return fx;
}

std::vector<Vec3> random_points(std::mt19937_64& rng, std::size_t n, const Vec3& center, double extent) {
    std::vector<Vec3> pts;
    for (std::size_t i = 0; i < n; ++i) {
        pts.push_back(center + Vec3(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)) * extent);
    }
    return pts;
}

double rms_reprojection(const SlamMap& map, const CameraIntrinsics& k) {
    double sq = 0.0;
    std::size_t n = 0;
    for (const auto& [id, pt] : map.points()) {
        for (const auto& [kf, uv] : map.observations(id)) {
            Vec2 pred;
            if (!pinhole_uv(pt.position, map.keyframe(kf)->pose, k, pred)) return INFINITY;
            sq += (pred - uv).squaredNorm();
            ++n;
        }
    }
    return n == 0 ? 0.0 : std::sqrt(sq / double(n));
}

}  // namespace vslam::test
