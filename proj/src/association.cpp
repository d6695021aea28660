#include "vslam/association.hpp"

namespace vslam {

std::vector<MatchPair> match_frames(const FeatureFrame& a, const FeatureFrame& b) {
    check_frame_ids(a);
    check_frame_ids(b);
    std::vector<MatchPair> out;
    std::size_t i = 0;
    std::size_t j = 0;
    const auto& fa = a.features;
    const auto& fb = b.features;
    while (i < fa.size() && j < fb.size()) {
        if (fa[i].id < fb[j].id) {
            ++i;
        } else if (fb[j].id < fa[i].id) {
            ++j;
        } else {
            out.push_back({i, j, fa[i].id});
            ++i;
            ++j;
        }
    }
    return out;
}

std::vector<MapMatch> match_to_map(const FeatureFrame& frame, const SlamMap& map) {
    check_frame_ids(frame);
    std::vector<MapMatch> out;
    const auto& points = map.points();
    if (points.empty()) return out;
    // Same merge as match_frames, with the map's ordered point keys as the second list.
    auto it = points.begin();
    for (std::size_t i = 0; i < frame.features.size() && it != points.end(); ++i) {
        const VertexId id = frame.features[i].id;
        if (it->first < id) it = points.lower_bound(id);
        if (it != points.end() && it->first == id) out.push_back({i, id});
    }
    return out;
}

}  // namespace vslam
