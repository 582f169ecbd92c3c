#pragma once

#include <cstddef>
#include <set>
#include <vector>

#include "occuseg/predictions.hpp"
#include "occuseg/supervoxel.hpp"

namespace occuseg {

struct SuperVoxelStats {
    std::vector<std::size_t> members;    // voxel indices
    Vec3 spatial;                        // mean of (d + mu) over members
    std::vector<double> feature;         // mean feature embedding
    double occupancy = 0.0;              // linear voxel count, exp(mean log o)
    double sigma_s = 0.0, sigma_d = 0.0;
    std::vector<double> class_histogram; // per-voxel argmax votes

    std::size_t size() const { return members.size(); }
    double ratio() const { return occupancy / double(size()); }
    int majority_class() const;
};

struct MergeRecord {
    int a = 0, b = 0;      // a < b
    double weight = 0.0;
    int result = 0;        // vertex id carrying the merged stats (== a)
};

struct ClusterGraph {
    std::vector<SuperVoxelStats> vertices;
    std::vector<char> alive;
    std::vector<std::set<int>> adjacency;
    std::vector<MergeRecord> merge_log;

    std::size_t alive_count() const;
};

struct ClusterParams {
    double t0 = 0.5;
    bool use_occupancy = true;      // false forces r = 1 in the weight
    bool semantic_gating = false;   // require argmax-class agreement to merge
    bool apply_ratio_filter = true;
    double ratio_min = 0.3, ratio_max = 2.0;
    std::size_t min_voxels = 25;
};

struct InstanceInfo {
    int semantic_class = kUnlabeled;
    double confidence = 0.0;
    std::size_t voxel_count = 0;
    double ratio = 0.0;
};

struct InstancePrediction {
    std::vector<int> voxel_instance;  // per-voxel instance id or kRejected
    std::vector<InstanceInfo> instances;
};

SuperVoxelStats merge_stats(const SuperVoxelStats& a, const SuperVoxelStats& b);

/// Weight of merging a and b: Gaussian kernel over the feature/spatial
/// distance with the virtual merged vertex's covariances, divided by
/// max(virtual r, 0.5).
double cluster_edge_weight(const SuperVoxelStats& a, const SuperVoxelStats& b,
                           const ClusterParams& params);

std::vector<SuperVoxelStats> aggregate(const SuperVoxelPartition& partition,
                                       const PredictionSet& preds,
                                       const VoxelGrid& grid);

/// Supervoxels are linked iff some of their member voxels are 26-adjacent.
ClusterGraph build_cluster_graph(const std::vector<SuperVoxelStats>& stats,
                                 const SuperVoxelPartition& partition,
                                 const VoxelGrid& grid);

/// Repeatedly merges the globally maximum-weight edge above t0. Lazy
/// priority queue with version stamps; ties broken lexicographically on the
/// vertex id pair.
void merge_loop(ClusterGraph& graph, const ClusterParams& params);

InstancePrediction finalize(const ClusterGraph& graph, std::size_t n_voxels,
                            const ClusterParams& params);

}  // namespace occuseg
