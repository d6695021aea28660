#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vslam/types.hpp"

namespace vslam {

/// Indexed vertex set. Vertex i has id i; ids are the feature descriptors.
class MeshModel {
public:
    MeshModel() = default;
    explicit MeshModel(std::vector<Vec3> vertices, std::vector<std::array<std::uint32_t, 3>> faces = {},
                       const Mat4& model_transform = Mat4::Identity());

    std::size_t size() const noexcept { return vertices_.size(); }
    bool empty() const noexcept { return vertices_.empty(); }

    const std::vector<Vec3>& vertices() const noexcept { return vertices_; }
    const std::vector<std::array<std::uint32_t, 3>>& faces() const noexcept { return faces_; }
    const Mat4& model_transform() const noexcept { return model_; }

    VertexId id(std::size_t index) const { return static_cast<VertexId>(index); }

    /// Position of vertex `id` after the model transform.
    Vec3 world_position(VertexId id) const;

    /// Merge another mesh into this one's id space; its ids are offset by the current size.
    void append(const MeshModel& other);

private:
    std::vector<Vec3> vertices_;
    std::vector<std::array<std::uint32_t, 3>> faces_;
    Mat4 model_ = Mat4::Identity();
};

enum class MeshFormat { obj, ply };

MeshModel load_mesh(const std::filesystem::path& path, MeshFormat format);
MeshModel load_mesh(const std::filesystem::path& path);  // format from extension
MeshModel parse_obj(std::istream& in);
MeshModel parse_ply(std::istream& in);

/// OBJ text with 17 significant digits per coordinate.
void write_obj(std::ostream& out, const MeshModel& mesh);
void save_obj(const std::filesystem::path& path, const MeshModel& mesh);

enum class SceneKind { obj_file, ply_file, grid, box_room, seeded_point_cloud };

struct SceneSpec {
    SceneKind kind = SceneKind::box_room;
    std::string path;       // obj_file / ply_file
    int grid_n = 10;        // grid: n x n vertices in the y = 0 plane
    double spacing = 1.0;
    double width = 4.0;     // box_room
    double height = 3.0;
    double depth = 4.0;
    int subdivision = 12;
    int count = 600;        // seeded_point_cloud
    double extent = 2.0;    // cube edge length, centered at the origin
    std::uint64_t seed = 0;
};

SceneKind parse_scene_kind(const std::string& s);
std::string to_string(SceneKind kind);

/// Pure function of `spec`.
///
/// box_room(w, h, d, k) is centered at the origin. Each of the six walls is a
/// (k+1) x (k+1) vertex lattice with its own vertices (edge vertices are not
/// shared between walls), so the count is 6 (k+1)^2. Triangles wind toward
/// the room interior.
MeshModel generate_scene(const SceneSpec& spec);

}  // namespace vslam
