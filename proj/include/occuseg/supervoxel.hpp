#pragma once

#include <cstddef>
#include <vector>

#include "occuseg/geometry.hpp"

namespace occuseg {

struct AdjacencyEdge {
    std::size_t a = 0, b = 0;      // voxel indices, a < b
    double dissimilarity = 0.0;
};

struct SuperVoxelPartition {
    std::vector<int> assignment;   // voxel index -> supervoxel id, contiguous ids
    std::vector<std::size_t> sizes;

    int segment_count() const { return int(sizes.size()); }
};

struct AdjacencyParams {
    int connectivity = 26;          // 6, 18 or 26
    double alpha = 1.0;             // colour weight
    double beta = 4.0;              // normal weight
    double gamma_concave = 0.25;    // dissimilarity across concave creases is
                                    // multiplied by 1/gamma_concave
};

/// One edge per adjacent occupied cell pair. Dissimilarity is
/// alpha*|dcolor| + beta*(1 - n_p.n_q)*f, where f = 1/gamma_concave when the
/// dihedral configuration is concave (centroid offset opposes the normal
/// difference) and 1 otherwise.
std::vector<AdjacencyEdge> build_adjacency(const VoxelGrid& grid,
                                           const AdjacencyParams& params = {});

/// Graph-based segmentation: edges in non-decreasing weight order (ties broken
/// lexicographically on the index pair), components merged when the edge weight
/// does not exceed min over both components of (internal max weight + k/size),
/// followed by min-size enforcement along the cheapest joining edges.
SuperVoxelPartition segment(const std::vector<AdjacencyEdge>& edges,
                            std::size_t n_voxels, double k, std::size_t min_size);

}  // namespace occuseg
