#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "vslam/geometry.hpp"
#include "vslam/types.hpp"

namespace vslam {

/// Intermediate quantities of the vertex projection pipeline.
struct ProjectionRecord {
    Vec4 v_clip = Vec4::Zero();
    Vec4 v_view = Vec4::Zero();
    double x_ndc = 0.0;
    double y_ndc = 0.0;
    double z = 0.0;  // view-space depth, positive in front of the camera
};

/// One projected vertex: subpixel image position plus the vertex id as descriptor.
struct VertexFeature {
    double u = 0.0;
    double v = 0.0;
    VertexId id = 0;
    double depth = 0.0;
};

struct FeatureFrame {
    std::uint64_t frame_id = 0;
    double timestamp = 0.0;
    std::vector<VertexFeature> features;  // strictly increasing ids
    std::optional<RigidPose> gt_pose;     // evaluation only
};

struct CaptureConfig {
    double z_min = 0.1;
    double z_max = 100.0;
    bool cull_outside_image = true;

    void validate() const;
};

/// Symmetric-frustum OpenGL perspective matrix, clip depth range [-1, 1].
Mat4 perspective_matrix(const CameraIntrinsics& intrinsics);

std::optional<std::pair<VertexFeature, ProjectionRecord>> project_vertex(const Vec3& p, const Mat4& model,
                                                                         const Mat4& view, const Mat4& proj,
                                                                         const CameraIntrinsics& intrinsics,
                                                                         const CaptureConfig& cfg, VertexId id);

/// Projects every mesh vertex from `pose`. Output is sorted by id and deterministic.
FeatureFrame capture_frame(const MeshModel& mesh, const RigidPose& pose, const CameraIntrinsics& intrinsics,
                           const CaptureConfig& cfg, std::uint64_t frame_id, double timestamp);
/// Same as capture_frame, writing into `out` and reusing its feature storage.
void capture_frame_into(FeatureFrame& out, const MeshModel& mesh, const RigidPose& pose,
                        const CameraIntrinsics& intrinsics, const CaptureConfig& cfg, std::uint64_t frame_id,
                        double timestamp);

/// Inverse of the pipeline: pixel + view depth to a point in model coordinates.
Vec3 back_project(double u, double v, double depth, const Mat4& model, const RigidPose& pose,
                  const CameraIntrinsics& intrinsics);

/// Throws Error when feature ids are not strictly increasing.
void check_frame_ids(const FeatureFrame& frame);

}  // namespace vslam
