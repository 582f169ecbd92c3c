#pragma once

#include <string>

#include "occuseg/cluster.hpp"
#include "occuseg/losses.hpp"
#include "occuseg/oracle.hpp"
#include "occuseg/supervoxel.hpp"

namespace occuseg {

/// All pipeline knobs in one place. Defaults pin the published constants
/// (2 cm resolution, T0 = 0.5, ratio bounds (0.3, 2), delta_v/delta_d =
/// 0.1/1.5, K = 32); everything else is an artifact decision surfaced here.
struct PipelineConfig {
    double resolution = 0.02;

    double supervoxel_k = 0.06;
    std::size_t supervoxel_min_size = 20;
    AdjacencyParams adjacency;

    ClusterParams cluster;
    LossConstants losses;
    OracleParams oracle;
    OracleNoiseSpec noise;
    SceneSpec scene;

    std::uint64_t seed = 1;

    void validate() const;  // throws ConfigError naming the offending field
};

std::string config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const std::string& json_text);

PipelineConfig load_config(const std::string& path);
void save_config(const std::string& path, const PipelineConfig& config);

}  // namespace occuseg
