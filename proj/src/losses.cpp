#include "occuseg/losses.hpp"

#include <algorithm>
#include <cmath>

namespace occuseg {

namespace {

using Mat = std::vector<std::vector<double>>;

double vec_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::vector<double> vec_sub(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

void axpy(std::vector<double>& y, double a, const std::vector<double>& x) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

Mat zeros_like(const Mat& m) {
    Mat out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) out[i].assign(m[i].size(), 0.0);
    return out;
}

}  // namespace

SemanticLossResult semantic_loss(const std::vector<std::vector<double>>& logits,
                                 const std::vector<int>& labels) {
    if (logits.empty()) throw EmptyInput("semantic_loss: no voxels");
    if (logits.size() != labels.size())
        throw AlignmentError("semantic_loss: logits/labels length mismatch");

    const std::size_t n = logits.size();
    SemanticLossResult res;
    res.grad_logits = zeros_like(logits);

    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double>& z = logits[i];
        const int label = labels[i];
        if (label < 0 || std::size_t(label) >= z.size())
            throw LabelError("semantic_loss: label out of range");
        double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - zmax);
        double log_sum = std::log(sum) + zmax;
        res.value += log_sum - z[std::size_t(label)];
        for (std::size_t c = 0; c < z.size(); ++c) {
            double softmax = std::exp(z[c] - zmax) / sum;
            res.grad_logits[i][c] = (softmax - (int(c) == label ? 1.0 : 0.0)) / double(n);
        }
    }
    res.value /= double(n);
    return res;
}

SpatialLossResult spatial_loss(const std::vector<Vec3>& offsets,
                               const std::vector<Vec3>& positions,
                               const std::vector<InstanceGroundTruth>& gt) {
    if (offsets.size() != positions.size())
        throw AlignmentError("spatial_loss: offsets/positions length mismatch");
    if (gt.empty()) throw NoGroundTruth("spatial_loss: no instances");

    const double inv_c = 1.0 / double(gt.size());
    SpatialLossResult res;
    res.grad_offsets.assign(offsets.size(), Vec3());

    for (const InstanceGroundTruth& inst : gt) {
        const double n_c = double(inst.voxel_count());
        Vec3 target;  // mean of positions over the instance, as printed
        for (std::size_t i : inst.voxel_indices) target += positions[i];
        target = target / n_c;
        for (std::size_t i : inst.voxel_indices) {
            // associate as d - (t - s) so an exact oracle cancels bitwise
            Vec3 r = offsets[i] - (target - positions[i]);
            double norm = r.norm();
            res.value += norm * inv_c / n_c;
            if (norm > 0.0)  // subgradient 0 at the kink
                res.grad_offsets[i] += r * (inv_c / (n_c * norm));
        }
    }
    return res;
}

FeatureLossResult feature_loss(const std::vector<std::vector<double>>& embeddings,
                               const std::vector<InstanceGroundTruth>& gt,
                               const LossConstants& consts) {
    if (gt.empty()) throw NoGroundTruth("feature_loss: no instances");
    const std::size_t c_count = gt.size();
    const double inv_c = 1.0 / double(c_count);

    FeatureLossResult res;
    res.grad_var = zeros_like(embeddings);
    res.grad_dist = zeros_like(embeddings);
    res.grad_reg = zeros_like(embeddings);

    std::vector<std::vector<double>> means(c_count);
    for (std::size_t c = 0; c < c_count; ++c) {
        std::vector<double> u(embeddings[gt[c].voxel_indices[0]].size(), 0.0);
        for (std::size_t i : gt[c].voxel_indices) axpy(u, 1.0, embeddings[i]);
        for (double& v : u) v /= double(gt[c].voxel_count());
        means[c] = std::move(u);
    }

    // variance term
    for (std::size_t c = 0; c < c_count; ++c) {
        const double n_c = double(gt[c].voxel_count());
        std::vector<double> mean_pull(means[c].size(), 0.0);  // sum of 2*h*vhat
        for (std::size_t i : gt[c].voxel_indices) {
            std::vector<double> v = vec_sub(means[c], embeddings[i]);
            double norm = vec_norm(v);
            double h = norm - consts.delta_v;
            if (h <= 0.0) continue;
            res.var += h * h * inv_c / n_c;
            double scale = 2.0 * h / norm;
            axpy(res.grad_var[i], -scale * inv_c / n_c, v);
            axpy(mean_pull, scale, v);
        }
        for (std::size_t i : gt[c].voxel_indices)
            axpy(res.grad_var[i], inv_c / (n_c * n_c), mean_pull);
    }

    // distance term (defined as 0 for a single instance)
    if (c_count >= 2) {
        const double norm_pairs = 1.0 / (double(c_count) * double(c_count - 1));
        std::vector<std::vector<double>> grad_means(c_count);
        for (std::size_t c = 0; c < c_count; ++c)
            grad_means[c].assign(means[c].size(), 0.0);
        for (std::size_t a = 0; a < c_count; ++a) {
            for (std::size_t b = a + 1; b < c_count; ++b) {
                std::vector<double> d = vec_sub(means[a], means[b]);
                double norm = vec_norm(d);
                double h = 2.0 * consts.delta_d - norm;
                if (h <= 0.0) continue;
                res.dist += h * h * norm_pairs;
                if (norm > 0.0) {
                    double scale = -2.0 * h * norm_pairs / norm;
                    axpy(grad_means[a], scale, d);
                    axpy(grad_means[b], -scale, d);
                }
            }
        }
        for (std::size_t c = 0; c < c_count; ++c)
            for (std::size_t i : gt[c].voxel_indices)
                axpy(res.grad_dist[i], 1.0 / double(gt[c].voxel_count()), grad_means[c]);
    }

    // regularization term
    for (std::size_t c = 0; c < c_count; ++c) {
        double norm = vec_norm(means[c]);
        res.reg += norm * inv_c;
        if (norm > 0.0)
            for (std::size_t i : gt[c].voxel_indices)
                axpy(res.grad_reg[i], inv_c / (double(gt[c].voxel_count()) * norm), means[c]);
    }
    return res;
}

InstanceEmbeddingStats instance_embedding_stats(
    const std::vector<std::vector<double>>& embeddings,
    const std::vector<Vec3>& offsets, const std::vector<Vec3>& positions,
    const std::vector<double>& sigma_s, const std::vector<double>& sigma_d,
    const InstanceGroundTruth& gt) {
    InstanceEmbeddingStats stats;
    const double n_c = double(gt.voxel_count());
    stats.mean_embedding.assign(embeddings[gt.voxel_indices[0]].size(), 0.0);
    for (std::size_t i : gt.voxel_indices) {
        axpy(stats.mean_embedding, 1.0, embeddings[i]);
        stats.predicted_center += positions[i] + offsets[i];
        stats.sigma_s += sigma_s[i];
        stats.sigma_d += sigma_d[i];
    }
    for (double& v : stats.mean_embedding) v /= n_c;
    stats.predicted_center = stats.predicted_center / n_c;
    stats.sigma_s /= n_c;
    stats.sigma_d /= n_c;
    if (!(stats.sigma_s > 0.0) || !(stats.sigma_d > 0.0))
        throw CovarianceError("instance_embedding_stats: nonpositive covariance");
    return stats;
}

ProbabilityResult probability(const std::vector<double>& embedding,
                              const Vec3& offset, const Vec3& position,
                              const InstanceEmbeddingStats& stats) {
    if (!(stats.sigma_s > 0.0) || !(stats.sigma_d > 0.0))
        throw CovarianceError("probability: nonpositive covariance");
    std::vector<double> fs = vec_sub(embedding, stats.mean_embedding);
    Vec3 fd = position + offset - stats.predicted_center;
    double qs = 0.0;
    for (double v : fs) qs += v * v;
    qs /= stats.sigma_s * stats.sigma_s;
    double qd = fd.norm2() / (stats.sigma_d * stats.sigma_d);

    ProbabilityResult res;
    res.p = std::exp(-qs - qd);
    res.grad_embedding.assign(embedding.size(), 0.0);
    double ss2 = stats.sigma_s * stats.sigma_s;
    double sd2 = stats.sigma_d * stats.sigma_d;
    axpy(res.grad_embedding, -2.0 * res.p / ss2, fs);
    res.grad_offset = fd * (-2.0 * res.p / sd2);
    res.grad_sigma_s = 2.0 * res.p * qs / stats.sigma_s;
    res.grad_sigma_d = 2.0 * res.p * qd / stats.sigma_d;
    return res;
}

CovarianceLossResult covariance_loss(const std::vector<std::vector<double>>& embeddings,
                                     const std::vector<Vec3>& offsets,
                                     const std::vector<Vec3>& positions,
                                     const std::vector<double>& sigma_s,
                                     const std::vector<double>& sigma_d,
                                     const std::vector<InstanceGroundTruth>& gt,
                                     const LossConstants& consts) {
    if (gt.empty()) throw NoGroundTruth("covariance_loss: no instances");
    const std::size_t n = embeddings.size();
    if (offsets.size() != n || positions.size() != n || sigma_s.size() != n ||
        sigma_d.size() != n)
        throw AlignmentError("covariance_loss: array length mismatch");
    for (std::size_t i = 0; i < n; ++i)
        if (!(sigma_s[i] > 0.0) || !(sigma_d[i] > 0.0))
            throw CovarianceError("covariance_loss: nonpositive covariance");

    const double inv_c = 1.0 / double(gt.size());
    const double inv_n = 1.0 / double(n);
    const double lo = consts.prob_clamp, hi = 1.0 - consts.prob_clamp;

    CovarianceLossResult res;
    res.grad_embeddings = zeros_like(embeddings);
    res.grad_offsets.assign(n, Vec3());
    res.grad_sigma_s.assign(n, 0.0);
    res.grad_sigma_d.assign(n, 0.0);

    std::vector<char> member(n, 0);
    for (const InstanceGroundTruth& inst : gt) {
        const double n_c = double(inst.voxel_count());
        InstanceEmbeddingStats stats =
            instance_embedding_stats(embeddings, offsets, positions, sigma_s, sigma_d, inst);
        std::fill(member.begin(), member.end(), 0);
        for (std::size_t i : inst.voxel_indices) member[i] = 1;

        const double ss = stats.sigma_s, sd = stats.sigma_d;
        const double ss2 = ss * ss, sd2 = sd * sd;
        std::vector<double> accum_u(stats.mean_embedding.size(), 0.0);
        Vec3 accum_e;
        double accum_ss = 0.0, accum_sd = 0.0;

        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> fs = vec_sub(embeddings[i], stats.mean_embedding);
            Vec3 fd = positions[i] + offsets[i] - stats.predicted_center;
            double qs = 0.0;
            for (double v : fs) qs += v * v;
            qs /= ss2;
            double qd = fd.norm2() / sd2;
            double p_raw = std::exp(-qs - qd);
            double p = std::clamp(p_raw, lo, hi);
            double y = member[i] ? 1.0 : 0.0;
            res.value += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p)) * inv_c * inv_n;

            if (p_raw < lo || p_raw > hi) continue;  // clamped: flat region
            double dl_dp = -(y / p - (1.0 - y) / (1.0 - p)) * inv_c * inv_n;
            double g = dl_dp * p_raw;  // dL/dt with t = -qs - qd

            axpy(res.grad_embeddings[i], -2.0 * g / ss2, fs);
            axpy(accum_u, 2.0 * g / ss2, fs);
            res.grad_offsets[i] += fd * (-2.0 * g / sd2);
            accum_e += fd * (2.0 * g / sd2);
            accum_ss += g * 2.0 * qs / ss;
            accum_sd += g * 2.0 * qd / sd;
        }

        for (std::size_t k : inst.voxel_indices) {
            axpy(res.grad_embeddings[k], 1.0 / n_c, accum_u);
            res.grad_offsets[k] += accum_e * (1.0 / n_c);
            res.grad_sigma_s[k] += accum_ss / n_c;
            res.grad_sigma_d[k] += accum_sd / n_c;
        }
    }
    return res;
}

OccupancyLossResult occupancy_loss(const std::vector<double>& occupancy,
                                   const std::vector<InstanceGroundTruth>& gt) {
    if (gt.empty()) throw NoGroundTruth("occupancy_loss: no instances");
    const double inv_c = 1.0 / double(gt.size());
    OccupancyLossResult res;
    res.grad_occupancy.assign(occupancy.size(), 0.0);
    for (const InstanceGroundTruth& inst : gt) {
        const double n_c = double(inst.voxel_count());
        const double target = std::log(n_c);
        for (std::size_t i : inst.voxel_indices) {
            double r = occupancy[i] - target;
            res.value += std::abs(r) * inv_c / n_c;
            if (r != 0.0)
                res.grad_occupancy[i] += (r > 0.0 ? 1.0 : -1.0) * inv_c / n_c;
        }
    }
    return res;
}

double relative_error(const std::vector<double>& occupancy_members, std::size_t n_c) {
    if (n_c < 1) throw EmptyInput("relative_error: N_c must be >= 1");
    if (occupancy_members.empty()) throw EmptyInput("relative_error: no members");
    double mean = 0.0;
    for (double o : occupancy_members) mean += o;
    mean /= double(occupancy_members.size());
    return std::abs(double(n_c) - std::exp(mean)) / double(n_c);
}

LossBreakdown evaluate_losses(const PredictionSet& preds, const VoxelGrid& grid,
                              const std::vector<InstanceGroundTruth>& gt,
                              const LossConstants& consts) {
    preds.validate();
    if (preds.size() != grid.size())
        throw AlignmentError("evaluate_losses: prediction/grid size mismatch");

    std::vector<Vec3> positions;
    std::vector<int> labels;
    positions.reserve(grid.size());
    labels.reserve(grid.size());
    for (const auto& [c, cell] : grid.cells) {
        positions.push_back(cell.centroid);
        labels.push_back(cell.semantic_label);
    }

    LossBreakdown bd;
    bd.c = semantic_loss(preds.logits, labels).value;
    bd.sp = spatial_loss(preds.offsets, positions, gt).value;
    FeatureLossResult fe = feature_loss(preds.embeddings, gt, consts);
    bd.var = fe.var;
    bd.dist = fe.dist;
    bd.reg = fe.reg;
    bd.cov = covariance_loss(preds.embeddings, preds.offsets, positions, preds.sigma_s,
                             preds.sigma_d, gt, consts)
                 .value;
    bd.o = occupancy_loss(preds.occupancy, gt).value;
    return bd;
}

}  // namespace occuseg
