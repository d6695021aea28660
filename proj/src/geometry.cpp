#include "vslam/geometry.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace vslam {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

double parse_double(const std::string& tok, std::size_t line) {
    double value = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw ParseError("invalid number '" + tok + "'", line);
    if (!std::isfinite(value)) throw ParseError("non-finite coordinate '" + tok + "'", line);
    return value;
}

long long parse_int(const std::string& tok, std::size_t line) {
    long long value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) throw ParseError("invalid integer '" + tok + "'", line);
    return value;
}

// Deterministic across standard libraries, unlike std::uniform_real_distribution.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

MeshModel::MeshModel(std::vector<Vec3> vertices, std::vector<std::array<std::uint32_t, 3>> faces,
                     const Mat4& model_transform)
    : vertices_(std::move(vertices)), faces_(std::move(faces)), model_(model_transform) {
    for (const auto& v : vertices_) {
        if (!v.allFinite()) throw Error("mesh vertex has non-finite coordinates");
    }
    for (const auto& f : faces_) {
        for (auto idx : f) {
            if (idx >= vertices_.size()) throw Error("face references vertex out of range");
        }
    }
    if (!model_.allFinite()) throw Error("model transform is not finite");
}

Vec3 MeshModel::world_position(VertexId id) const {
    const Vec3& p = vertices_.at(id);
    return (model_ * p.homogeneous()).hnormalized();
}

void MeshModel::append(const MeshModel& other) {
    const auto offset = static_cast<std::uint32_t>(vertices_.size());
    const bool same_transform = other.model_ == model_;
    // Bake a differing model transform into the appended positions so one M covers the merged set.
    const Mat4 to_local = model_.inverse() * other.model_;
    for (const auto& v : other.vertices_) {
        vertices_.push_back(same_transform ? v : Vec3((to_local * v.homogeneous()).hnormalized()));
    }
    for (const auto& f : other.faces_) faces_.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
}

MeshModel parse_obj(std::istream& in) {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const auto tok = split_ws(line);
        if (tok.empty()) continue;
        if (tok[0] == "v") {
            if (tok.size() < 4) throw ParseError("vertex needs 3 coordinates", lineno);
            Vec3 p(parse_double(tok[1], lineno), parse_double(tok[2], lineno), parse_double(tok[3], lineno));
            if (tok.size() >= 5) {
                const double w = parse_double(tok[4], lineno);
                if (w == 0.0) throw ParseError("vertex weight is zero", lineno);
                p /= w;
            }
            vertices.push_back(p);
        } else if (tok[0] == "f") {
            if (tok.size() < 4) throw ParseError("face needs at least 3 vertices", lineno);
            std::vector<std::uint32_t> idx;
            for (std::size_t k = 1; k < tok.size(); ++k) {
                const std::string head = tok[k].substr(0, tok[k].find('/'));
                long long i = parse_int(head, lineno);
                const auto n = static_cast<long long>(vertices.size());
                // Negative indices are relative to the vertices read so far.
                const long long resolved = i > 0 ? i - 1 : n + i;
                if (i == 0 || resolved < 0 || resolved >= n) {
                    throw ParseError("face references vertex " + head + " of " + std::to_string(n), lineno);
                }
                idx.push_back(static_cast<std::uint32_t>(resolved));
            }
            for (std::size_t k = 1; k + 1 < idx.size(); ++k) faces.push_back({idx[0], idx[k], idx[k + 1]});
        }
        // vt, vn, o, g, s, usemtl, mtllib: ignored
    }
    if (vertices.empty()) throw ParseError("no vertices", 0);
    return MeshModel(std::move(vertices), std::move(faces));
}

MeshModel parse_ply(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };

    if (!next_line() || line != "ply") throw ParseError("missing 'ply' magic", lineno);

    struct Element {
        std::string name;
        std::size_t count = 0;
        std::vector<std::string> props;
    };
    std::vector<Element> elements;
    bool ascii = false;
    for (;;) {
        if (!next_line()) throw ParseError("unterminated header", lineno);
        const auto tok = split_ws(line);
        if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
        if (tok[0] == "end_header") break;
        if (tok[0] == "format") {
            if (tok.size() < 2) throw ParseError("bad format line", lineno);
            if (tok[1] != "ascii") throw ParseError("only ASCII PLY is supported", lineno);
            ascii = true;
        } else if (tok[0] == "element") {
            if (tok.size() != 3) throw ParseError("bad element line", lineno);
            elements.push_back({tok[1], static_cast<std::size_t>(parse_int(tok[2], lineno)), {}});
        } else if (tok[0] == "property") {
            if (elements.empty()) throw ParseError("property before element", lineno);
            elements.back().props.push_back(tok.back());
        } else {
            throw ParseError("unknown header keyword '" + tok[0] + "'", lineno);
        }
    }
    if (!ascii) throw ParseError("missing format line", lineno);

    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;
    for (const auto& el : elements) {
        if (el.name == "vertex") {
            int ix = -1, iy = -1, iz = -1;
            for (std::size_t k = 0; k < el.props.size(); ++k) {
                if (el.props[k] == "x") ix = static_cast<int>(k);
                if (el.props[k] == "y") iy = static_cast<int>(k);
                if (el.props[k] == "z") iz = static_cast<int>(k);
            }
            if (ix < 0 || iy < 0 || iz < 0) throw ParseError("vertex element lacks x/y/z", lineno);
            for (std::size_t n = 0; n < el.count; ++n) {
                if (!next_line()) throw ParseError("unexpected end of vertex data", lineno);
                const auto tok = split_ws(line);
                if (tok.size() < el.props.size()) throw ParseError("too few vertex properties", lineno);
                vertices.emplace_back(parse_double(tok[ix], lineno), parse_double(tok[iy], lineno),
                                      parse_double(tok[iz], lineno));
            }
        } else if (el.name == "face") {
            for (std::size_t n = 0; n < el.count; ++n) {
                if (!next_line()) throw ParseError("unexpected end of face data", lineno);
                const auto tok = split_ws(line);
                if (tok.empty()) throw ParseError("empty face line", lineno);
                const auto k = static_cast<std::size_t>(parse_int(tok[0], lineno));
                if (k < 3 || tok.size() < k + 1) throw ParseError("bad face vertex list", lineno);
                std::vector<std::uint32_t> idx;
                for (std::size_t j = 1; j <= k; ++j) {
                    const long long i = parse_int(tok[j], lineno);
                    if (i < 0 || static_cast<std::size_t>(i) >= vertices.size()) {
                        throw ParseError("face references vertex " + tok[j] + " of " +
                                             std::to_string(vertices.size()),
                                         lineno);
                    }
                    idx.push_back(static_cast<std::uint32_t>(i));
                }
                for (std::size_t j = 1; j + 1 < idx.size(); ++j) faces.push_back({idx[0], idx[j], idx[j + 1]});
            }
        } else {
            for (std::size_t n = 0; n < el.count; ++n) {
                if (!next_line()) throw ParseError("unexpected end of element data", lineno);
            }
        }
    }
    if (vertices.empty()) throw ParseError("no vertices", 0);
    return MeshModel(std::move(vertices), std::move(faces));
}

MeshModel load_mesh(const std::filesystem::path& path, MeshFormat format) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open mesh file " + path.string());
    return format == MeshFormat::obj ? parse_obj(in) : parse_ply(in);
}

MeshModel load_mesh(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".obj") return load_mesh(path, MeshFormat::obj);
    if (ext == ".ply") return load_mesh(path, MeshFormat::ply);
    throw Error("unknown mesh extension '" + ext + "'");
}

void write_obj(std::ostream& out, const MeshModel& mesh) {
    char buf[128];
    for (const auto& v : mesh.vertices()) {
        std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
        out << buf;
    }
    for (const auto& f : mesh.faces()) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

void save_obj(const std::filesystem::path& path, const MeshModel& mesh) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_obj(out, mesh);
}

SceneKind parse_scene_kind(const std::string& s) {
    if (s == "obj_file" || s == "obj") return SceneKind::obj_file;
    if (s == "ply_file" || s == "ply") return SceneKind::ply_file;
    if (s == "grid") return SceneKind::grid;
    if (s == "box_room") return SceneKind::box_room;
    if (s == "seeded_point_cloud" || s == "point_cloud") return SceneKind::seeded_point_cloud;
    throw Error("unknown scene kind '" + s + "'");
}

std::string to_string(SceneKind kind) {
    switch (kind) {
        case SceneKind::obj_file: return "obj_file";
        case SceneKind::ply_file: return "ply_file";
        case SceneKind::grid: return "grid";
        case SceneKind::box_room: return "box_room";
        case SceneKind::seeded_point_cloud: return "seeded_point_cloud";
    }
    return "unknown";
}

namespace {

MeshModel make_grid(int n, double spacing) {
    if (n < 1 || !(spacing > 0.0)) throw Error("grid needs n >= 1 and spacing > 0");
    std::vector<Vec3> v;
    std::vector<std::array<std::uint32_t, 3>> f;
    v.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) v.emplace_back(j * spacing, 0.0, i * spacing);
    }
    auto at = [n](int i, int j) { return static_cast<std::uint32_t>(i * n + j); };
    for (int i = 0; i + 1 < n; ++i) {
        for (int j = 0; j + 1 < n; ++j) {
            f.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
            f.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
        }
    }
    return MeshModel(std::move(v), std::move(f));
}

MeshModel make_box_room(double w, double h, double d, int k) {
    if (!(w > 0.0 && h > 0.0 && d > 0.0) || k < 1) throw Error("box_room needs positive dimensions and k >= 1");
    const Vec3 half(w / 2, h / 2, d / 2);
    std::vector<Vec3> v;
    std::vector<std::array<std::uint32_t, 3>> f;
    // Each wall: origin corner plus two edge vectors, ordered so (a x b) points into the room.
    struct Wall {
        Vec3 origin, a, b;
    };
    const Wall walls[6] = {
        {{-half.x(), -half.y(), -half.z()}, {0, h, 0}, {0, 0, d}},  // x = -w/2
        {{half.x(), -half.y(), -half.z()}, {0, 0, d}, {0, h, 0}},   // x = +w/2
        {{-half.x(), -half.y(), -half.z()}, {0, 0, d}, {w, 0, 0}},  // floor
        {{-half.x(), half.y(), -half.z()}, {w, 0, 0}, {0, 0, d}},   // ceiling
        {{-half.x(), -half.y(), -half.z()}, {w, 0, 0}, {0, h, 0}},  // z = -d/2
        {{-half.x(), -half.y(), half.z()}, {0, h, 0}, {w, 0, 0}},   // z = +d/2
    };
    const int m = k + 1;
    for (const auto& wall : walls) {
        const auto base = static_cast<std::uint32_t>(v.size());
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                v.push_back(wall.origin + wall.a * (static_cast<double>(j) / k) + wall.b * (static_cast<double>(i) / k));
            }
        }
        auto at = [base, m](int i, int j) { return base + static_cast<std::uint32_t>(i * m + j); };
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                f.push_back({at(i, j), at(i, j + 1), at(i + 1, j + 1)});
                f.push_back({at(i, j), at(i + 1, j + 1), at(i + 1, j)});
            }
        }
    }
    return MeshModel(std::move(v), std::move(f));
}

MeshModel make_point_cloud(int count, double extent, std::uint64_t seed) {
    if (count < 1 || !(extent > 0.0)) throw Error("seeded_point_cloud needs count >= 1 and extent > 0");
    std::mt19937_64 rng(seed);
    std::vector<Vec3> v;
    v.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double x = (unit_uniform(rng) - 0.5) * extent;
        const double y = (unit_uniform(rng) - 0.5) * extent;
        const double z = (unit_uniform(rng) - 0.5) * extent;
        v.emplace_back(x, y, z);
    }
    return MeshModel(std::move(v));
}

}  // namespace

MeshModel generate_scene(const SceneSpec& spec) {
    switch (spec.kind) {
        case SceneKind::obj_file: return load_mesh(spec.path, MeshFormat::obj);
        case SceneKind::ply_file: return load_mesh(spec.path, MeshFormat::ply);
        case SceneKind::grid: return make_grid(spec.grid_n, spec.spacing);
        case SceneKind::box_room: return make_box_room(spec.width, spec.height, spec.depth, spec.subdivision);
        case SceneKind::seeded_point_cloud: return make_point_cloud(spec.count, spec.extent, spec.seed);
    }
    throw Error("unhandled scene kind");
}

}  // namespace vslam
