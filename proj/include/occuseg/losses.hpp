#pragma once

#include <vector>

#include "occuseg/geometry.hpp"
#include "occuseg/predictions.hpp"

namespace occuseg {

struct LossConstants {
    double delta_v = 0.1;
    double delta_d = 1.5;
    double prob_clamp = 1e-7;  // p clamped to [prob_clamp, 1 - prob_clamp]
};

struct SemanticLossResult {
    double value = 0.0;
    std::vector<std::vector<double>> grad_logits;  // N x C
};

struct SpatialLossResult {
    double value = 0.0;
    std::vector<Vec3> grad_offsets;
};

struct FeatureLossResult {
    double var = 0.0, dist = 0.0, reg = 0.0;
    std::vector<std::vector<double>> grad_var;   // N x K
    std::vector<std::vector<double>> grad_dist;
    std::vector<std::vector<double>> grad_reg;
};

struct CovarianceLossResult {
    double value = 0.0;
    std::vector<std::vector<double>> grad_embeddings;  // N x K
    std::vector<Vec3> grad_offsets;
    std::vector<double> grad_sigma_s;
    std::vector<double> grad_sigma_d;
};

struct OccupancyLossResult {
    double value = 0.0;
    std::vector<double> grad_occupancy;
};

/// Mean feature embedding, predicted spatial center and averaged covariances
/// of one instance; the reference frame for the membership probability.
struct InstanceEmbeddingStats {
    std::vector<double> mean_embedding;  // u_c
    Vec3 predicted_center;               // e_c = mean of (mu + d) over members
    double sigma_s = 0.0;
    double sigma_d = 0.0;
};

struct ProbabilityResult {
    double p = 0.0;  // unclamped, in (0, 1]
    std::vector<double> grad_embedding;
    Vec3 grad_offset;
    double grad_sigma_s = 0.0;
    double grad_sigma_d = 0.0;
};

SemanticLossResult semantic_loss(const std::vector<std::vector<double>>& logits,
                                 const std::vector<int>& labels);

/// L_sp: mean Euclidean distance between d_i + mu_i and the instance's mean
/// voxel position, averaged per instance then over instances.
SpatialLossResult spatial_loss(const std::vector<Vec3>& offsets,
                               const std::vector<Vec3>& positions,
                               const std::vector<InstanceGroundTruth>& gt);

FeatureLossResult feature_loss(const std::vector<std::vector<double>>& embeddings,
                               const std::vector<InstanceGroundTruth>& gt,
                               const LossConstants& consts = {});

InstanceEmbeddingStats instance_embedding_stats(
    const std::vector<std::vector<double>>& embeddings,
    const std::vector<Vec3>& offsets, const std::vector<Vec3>& positions,
    const std::vector<double>& sigma_s, const std::vector<double>& sigma_d,
    const InstanceGroundTruth& gt);

/// Gaussian-kernel membership probability with gradients taken at fixed
/// instance stats (u_c, e_c held constant, sigmas as direct arguments).
ProbabilityResult probability(const std::vector<double>& embedding,
                              const Vec3& offset, const Vec3& position,
                              const InstanceEmbeddingStats& stats);

/// Binary cross-entropy over all voxels for every instance; gradients flow
/// through the instance means and averaged covariances.
CovarianceLossResult covariance_loss(const std::vector<std::vector<double>>& embeddings,
                                     const std::vector<Vec3>& offsets,
                                     const std::vector<Vec3>& positions,
                                     const std::vector<double>& sigma_s,
                                     const std::vector<double>& sigma_d,
                                     const std::vector<InstanceGroundTruth>& gt,
                                     const LossConstants& consts = {});

OccupancyLossResult occupancy_loss(const std::vector<double>& occupancy,
                                   const std::vector<InstanceGroundTruth>& gt);

/// R_c = |N_c - exp(mean o)| / N_c over one instance's occupancy predictions.
double relative_error(const std::vector<double>& occupancy_members, std::size_t n_c);

struct LossBreakdown {
    double c = 0.0;     // semantic
    double sp = 0.0;    // spatial
    double var = 0.0, dist = 0.0, reg = 0.0;
    double cov = 0.0;
    double o = 0.0;     // occupancy

    double se() const { return var + dist + reg; }
    double e() const { return sp + se() + cov; }
    double joint() const { return c + e() + o; }
};

/// Evaluates every term on a full prediction set. Labels come from the grid.
LossBreakdown evaluate_losses(const PredictionSet& preds, const VoxelGrid& grid,
                              const std::vector<InstanceGroundTruth>& gt,
                              const LossConstants& consts = {});

}  // namespace occuseg
