#include "vslam/slam_map.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "vslam/optimize.hpp"

namespace vslam {

const KeyFrame* SlamMap::keyframe(KeyFrameId id) const {
    auto it = keyframes_.find(id);
    return it == keyframes_.end() ? nullptr : &it->second;
}

const MapPoint* SlamMap::point(VertexId id) const {
    auto it = points_.find(id);
    return it == points_.end() ? nullptr : &it->second;
}

const KeyFrame* SlamMap::last_keyframe() const {
    return keyframes_.empty() ? nullptr : &keyframes_.rbegin()->second;
}

const SlamMap::Observations& SlamMap::observations(VertexId id) const {
    static const Observations empty;
    auto it = observations_.find(id);
    return it == observations_.end() ? empty : it->second;
}

std::vector<VertexId> SlamMap::points_observed_by(KeyFrameId kf) const {
    auto it = kf_points_.find(kf);
    if (it == kf_points_.end()) return {};
    return it->second;
}

std::size_t SlamMap::observation_count() const noexcept {
    std::size_t n = 0;
    for (const auto& [id, obs] : observations_) n += obs.size();
    return n;
}

KeyFrameId SlamMap::add_keyframe(const RigidPose& pose, FeatureFrame frame) {
    if (!pose.is_unit()) throw Error("keyframe pose rotation is not unit-norm");
    const KeyFrameId id = next_kf_++;
    auto& pts = kf_points_[id];
    for (const auto& f : frame.features) {
        auto it = points_.find(f.id);
        if (it == points_.end()) continue;
        observations_[f.id][id] = Vec2(f.u, f.v);
        pts.push_back(f.id);
    }
    keyframes_.emplace(id, KeyFrame{id, pose, std::move(frame)});
    ++version_;
    return id;
}

void SlamMap::add_point(const MapPoint& point, const std::vector<std::pair<KeyFrameId, Vec2>>& observations) {
    if (points_.count(point.id)) throw Error("map point " + std::to_string(point.id) + " already exists");
    if (observations.size() < 2) throw Error("map point needs at least two observations");
    if (!point.position.allFinite()) throw Error("map point position is not finite");
    for (const auto& [kf, uv] : observations) {
        if (!keyframes_.count(kf)) throw Error("observation references unknown keyframe");
    }
    points_.emplace(point.id, point);
    auto& obs = observations_[point.id];
    for (const auto& [kf, uv] : observations) {
        obs[kf] = uv;
        auto& list = kf_points_[kf];
        list.insert(std::upper_bound(list.begin(), list.end(), point.id), point.id);
    }
    ++version_;
}

void SlamMap::apply_update(const std::map<KeyFrameId, RigidPose>& poses, const std::map<VertexId, Vec3>& points) {
    for (const auto& [id, pose] : poses) {
        auto it = keyframes_.find(id);
        if (it == keyframes_.end()) throw Error("update references unknown keyframe");
        it->second.pose = pose;
    }
    for (const auto& [id, p] : points) {
        auto it = points_.find(id);
        if (it == points_.end()) throw Error("update references unknown map point");
        it->second.position = p;
    }
    ++version_;
}

void SlamMap::check_invariants() const {
    for (const auto& [id, mp] : points_) {
        if (mp.id != id) throw Error("map point key mismatch");
        if (!mp.position.allFinite()) throw Error("non-finite map point");
        const auto& obs = observations(id);
        if (obs.size() < 2) throw Error("map point " + std::to_string(id) + " has fewer than two observations");
        for (const auto& [kf, uv] : obs) {
            if (!keyframes_.count(kf)) throw Error("observation references missing keyframe");
        }
    }
    for (const auto& [pid, obs] : observations_) {
        if (!points_.count(pid)) throw Error("observation references missing point");
    }
    KeyFrameId prev = 0;
    bool first = true;
    for (const auto& [id, kf] : keyframes_) {
        if (!first && id <= prev) throw Error("keyframe ids not increasing");
        if (!kf.pose.is_unit()) throw Error("keyframe pose not unit-norm");
        prev = id;
        first = false;
    }
}

MapSnapshot snapshot_of(const SlamMap& map) {
    MapSnapshot s;
    s.version = map.version();
    for (const auto& [id, kf] : map.keyframes()) s.keyframes.emplace_back(id, kf.pose);
    for (const auto& [id, mp] : map.points()) s.points.emplace_back(id, mp.position);
    return s;
}

void write_map_snapshot(std::ostream& out, const MapSnapshot& snap) {
    char buf[256];
    for (const auto& [id, pose] : snap.keyframes) {
        const auto& t = pose.translation;
        const auto& q = pose.rotation;
        std::snprintf(buf, sizeof buf, "KF %u %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", id, t.x(), t.y(), t.z(),
                      q.x(), q.y(), q.z(), q.w());
        out << buf;
    }
    for (const auto& [id, p] : snap.points) {
        std::snprintf(buf, sizeof buf, "MP %u %.17g %.17g %.17g\n", id, p.x(), p.y(), p.z());
        out << buf;
    }
}

MapSnapshot parse_map_snapshot(std::istream& in) {
    MapSnapshot snap;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "KF") {
            KeyFrameId id;
            double tx, ty, tz, qx, qy, qz, qw;
            if (!(ss >> id >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) throw ParseError("bad KF record", lineno);
            snap.keyframes.emplace_back(id, RigidPose(Quat(qw, qx, qy, qz), Vec3(tx, ty, tz)));
        } else if (tag == "MP") {
            VertexId id;
            double x, y, z;
            if (!(ss >> id >> x >> y >> z)) throw ParseError("bad MP record", lineno);
            snap.points.emplace_back(id, Vec3(x, y, z));
        } else {
            throw ParseError("unknown record '" + tag + "'", lineno);
        }
    }
    return snap;
}

double map_rms_reprojection(const SlamMap& map, const CameraIntrinsics& intrinsics) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [pid, mp] : map.points()) {
        for (const auto& [kf, uv] : map.observations(pid)) {
            auto pred = project_point(mp.position, map.keyframe(kf)->pose, intrinsics);
            if (!pred) return std::numeric_limits<double>::infinity();
            sum += (*pred - uv).squaredNorm();
            ++n;
        }
    }
    return n == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(n));
}

}  // namespace vslam
