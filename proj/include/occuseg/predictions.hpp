#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "occuseg/common.hpp"

namespace occuseg {

/// Per-voxel network-output bundle, stored struct-of-arrays and aligned with
/// the grid iteration order.
struct PredictionSet {
    int num_classes = 0;
    int embedding_dim = 0;
    std::vector<std::vector<double>> logits;      // N x C
    std::vector<std::vector<double>> embeddings;  // N x K
    std::vector<Vec3> offsets;                    // meters
    std::vector<double> sigma_s;                  // feature covariance, > 0
    std::vector<double> sigma_d;                  // spatial covariance, > 0
    std::vector<double> occupancy;                // natural-log voxel count

    std::size_t size() const { return offsets.size(); }
    void validate() const;  // throws on shape mismatch or nonpositive sigma
};

/// Flat little-endian binary file: header (magic, voxel count, C, K), then
/// per-voxel records in grid iteration order.
void write_predictions(const std::string& path, const PredictionSet& preds);
PredictionSet read_predictions(const std::string& path);

}  // namespace occuseg
