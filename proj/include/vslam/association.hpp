#pragma once

#include <cstddef>
#include <vector>

#include "vslam/projection.hpp"
#include "vslam/slam_map.hpp"

namespace vslam {

struct MatchPair {
    std::size_t index_a = 0;
    std::size_t index_b = 0;
    VertexId id = 0;
};

struct MapMatch {
    std::size_t feature_index = 0;
    VertexId point_id = 0;
};

/// Id-set intersection of two id-sorted frames, ascending id. Linear merge.
std::vector<MatchPair> match_frames(const FeatureFrame& a, const FeatureFrame& b);

/// Features of `frame` whose id has a map point, ascending id.
std::vector<MapMatch> match_to_map(const FeatureFrame& frame, const SlamMap& map);

}  // namespace vslam
