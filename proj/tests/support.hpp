#pragma once

#include <random>
#include <vector>

#include "vslam/geometry.hpp"
#include "vslam/projection.hpp"
#include "vslam/slam_map.hpp"

namespace vslam::test {

/// Pinhole projection written directly from the camera model, not the matrix pipeline.
/// Returns false when the point is not in front of the camera.
bool pinhole_uv(const Vec3& p_world, const RigidPose& cam_to_world, const CameraIntrinsics& k, Vec2& uv,
                double* depth = nullptr);

double uniform(std::mt19937_64& rng, double lo, double hi);
Vec3 random_unit(std::mt19937_64& rng);
RigidPose random_pose(std::mt19937_64& rng, double max_angle, double max_offset);

/// Camera at `eye` looking at `target`, world +y up.
RigidPose look_at(const Vec3& eye, const Vec3& target);

/// Ground-truth map: keyframes at `poses`, every cloud point seen by all of
/// them as a map point, exact observations.
struct MapFixture {
    std::vector<RigidPose> poses;
    std::vector<Vec3> points;  // indexed by vertex id
    SlamMap map;
};
MapFixture make_map_fixture(const std::vector<RigidPose>& poses, const std::vector<Vec3>& points,
                            const CameraIntrinsics& k);

/// Point cloud within a cube of edge `extent` around `center`.
std::vector<Vec3> random_points(std::mt19937_64& rng, std::size_t n, const Vec3& center, double extent);

double rms_reprojection(const SlamMap& map, const CameraIntrinsics& k);

}  // namespace vslam::test
