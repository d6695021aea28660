#include "vslam/projection.hpp"

#include <cmath>

namespace vslam {

double CameraIntrinsics::focal_ndc() const { return 1.0 / std::tan(deg_to_rad(fov_y_deg) / 2.0); }

void CameraIntrinsics::validate() const {
    if (!(fov_y_deg > 0.0 && fov_y_deg < 180.0)) throw Error("fov_y_deg must be in (0, 180)");
    if (!(near > 0.0 && near < far)) throw Error("need 0 < near < far");
    if (width_px < 1 || height_px < 1) throw Error("image size must be at least 1x1");
}

void CaptureConfig::validate() const {
    if (!(z_min > 0.0 && z_min < z_max)) throw Error("need 0 < z_min < z_max");
}

Mat4 perspective_matrix(const CameraIntrinsics& intrinsics) {
    intrinsics.validate();
    const double f = intrinsics.focal_ndc();
    const double n = intrinsics.near;
    const double fa = intrinsics.far;
    Mat4 p = Mat4::Zero();
    p(0, 0) = f / intrinsics.aspect();
    p(1, 1) = f;
    p(2, 2) = -(fa + n) / (fa - n);
    p(2, 3) = -2.0 * fa * n / (fa - n);
    p(3, 2) = -1.0;
    return p;
}

namespace {

// Shared tail of the pipeline once v_clip and v_view are known.
std::optional<std::pair<VertexFeature, ProjectionRecord>> finish_projection(const Vec4& clip, const Vec4& view,
                                                                            const CameraIntrinsics& intrinsics,
                                                                            const CaptureConfig& cfg, VertexId id) {
    if (!(clip.w() > 0.0)) return std::nullopt;
    ProjectionRecord rec;
    rec.v_clip = clip;
    rec.v_view = view;
    const double inv_w = 1.0 / clip.w();
    rec.x_ndc = clip.x() * inv_w;
    rec.y_ndc = clip.y() * inv_w;
    rec.z = -view.z();
    if (rec.z < cfg.z_min || rec.z > cfg.z_max) return std::nullopt;

    const double w = intrinsics.width_px;
    const double h = intrinsics.height_px;
    VertexFeature feat;
    feat.u = (rec.x_ndc * 0.5 + 0.5) * w;
    feat.v = (-rec.y_ndc * 0.5 + 0.5) * h;
    feat.id = id;
    feat.depth = rec.z;
    if (cfg.cull_outside_image && (feat.u < 0.0 || feat.u > w || feat.v < 0.0 || feat.v > h)) return std::nullopt;
    return std::make_pair(feat, rec);
}

}  // namespace

std::optional<std::pair<VertexFeature, ProjectionRecord>> project_vertex(const Vec3& p, const Mat4& model,
                                                                         const Mat4& view, const Mat4& proj,
                                                                         const CameraIntrinsics& intrinsics,
                                                                         const CaptureConfig& cfg, VertexId id) {
    const Vec4 ph = p.homogeneous();
    const Vec4 v_view = view * model * ph;
    const Vec4 v_clip = proj * view * model * ph;
    return finish_projection(v_clip, v_view, intrinsics, cfg, id);
}

FeatureFrame capture_frame(const MeshModel& mesh, const RigidPose& pose, const CameraIntrinsics& intrinsics,
                           const CaptureConfig& cfg, std::uint64_t frame_id, double timestamp) {
    FeatureFrame frame;
    capture_frame_into(frame, mesh, pose, intrinsics, cfg, frame_id, timestamp);
    return frame;
}

void capture_frame_into(FeatureFrame& frame, const MeshModel& mesh, const RigidPose& pose,
                        const CameraIntrinsics& intrinsics, const CaptureConfig& cfg, std::uint64_t frame_id,
                        double timestamp) {
    cfg.validate();
    frame.frame_id = frame_id;
    frame.timestamp = timestamp;
    frame.gt_pose = pose;
    frame.features.clear();

    const Mat4 view_model = pose.view_matrix() * mesh.model_transform();
    const Mat4 clip_model = perspective_matrix(intrinsics) * view_model;
    const auto& vertices = mesh.vertices();
    frame.features.reserve(vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        const Vec4 ph = vertices[i].homogeneous();
        const Vec4 v_view = view_model * ph;
        const Vec4 v_clip = clip_model * ph;
        if (auto hit = finish_projection(v_clip, v_view, intrinsics, cfg, static_cast<VertexId>(i))) {
            frame.features.push_back(hit->first);
        }
    }
}

Vec3 back_project(double u, double v, double depth, const Mat4& model, const RigidPose& pose,
                  const CameraIntrinsics& intrinsics) {
    const double x_ndc = 2.0 * u / intrinsics.width_px - 1.0;
    const double y_ndc = 1.0 - 2.0 * v / intrinsics.height_px;
    const double f = intrinsics.focal_ndc();
    const Vec3 p_view(x_ndc * depth * intrinsics.aspect() / f, y_ndc * depth / f, -depth);
    const Vec3 p_world = pose * p_view;
    return (model.inverse() * p_world.homogeneous()).hnormalized();
}

void check_frame_ids(const FeatureFrame& frame) {
    for (std::size_t i = 1; i < frame.features.size(); ++i) {
        if (frame.features[i].id <= frame.features[i - 1].id) {
            throw Error("frame " + std::to_string(frame.frame_id) + " has duplicate or unsorted feature id " +
                        std::to_string(frame.features[i].id));
        }
    }
}

}  // namespace vslam
