#include "occuseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "occuseg/losses.hpp"

namespace occuseg {

bool GradCheckReport::all_pass() const {
    if (entries.empty()) return false;
    for (const GradCheckEntry& e : entries)
        if (!e.pass) return false;
    return true;
}

namespace {

using Mat = std::vector<std::vector<double>>;

constexpr double kStep = 1e-5;
constexpr int kDim = 4;      // embedding dims for the test problems
constexpr int kClasses = 5;

struct Problem {
    std::vector<Vec3> positions, offsets;
    Mat logits, embeddings;
    std::vector<double> sigma_s, sigma_d, occupancy;
    std::vector<int> labels;
    std::vector<InstanceGroundTruth> gt;

    std::size_t size() const { return positions.size(); }
};

Problem draw(Rng& rng) {
    Problem pr;
    const int c_count = 2 + int(rng.uniform_index(3));
    // small codes put the distance hinge in its active region, large codes in
    // the inactive one; alternate so both branches get exercised
    const double code_scale = rng.uniform() < 0.5 ? 1.0 : 2.5;

    for (int c = 0; c < c_count; ++c) {
        const int n_c = 3 + int(rng.uniform_index(4));
        Vec3 center(rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0));
        InstanceGroundTruth inst;
        inst.instance_id = c;
        inst.semantic_class = c % kClasses;
        for (int v = 0; v < n_c; ++v) {
            std::size_t idx = pr.size();
            inst.voxel_indices.push_back(idx);
            Vec3 pos = center + Vec3(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15),
                                     rng.uniform(-0.15, 0.15));
            pr.positions.push_back(pos);
            inst.centroid += pos;
            pr.offsets.push_back(Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                                      rng.uniform(-0.3, 0.3)));
            std::vector<double> emb(kDim, 0.0);
            emb[std::size_t(c % kDim)] = code_scale;
            for (double& e : emb) e += rng.normal(0.0, 0.4);
            pr.embeddings.push_back(std::move(emb));
            pr.sigma_s.push_back(rng.uniform(0.6, 1.4));
            pr.sigma_d.push_back(rng.uniform(0.6, 1.4));
            double eps = rng.uniform(0.05, 0.6) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
            pr.occupancy.push_back(std::log(double(n_c)) + eps);
            pr.labels.push_back(int(rng.uniform_index(kClasses)));
            std::vector<double> lg(kClasses);
            for (double& z : lg) z = rng.normal(0.0, 1.0);
            pr.logits.push_back(std::move(lg));
        }
        inst.centroid = inst.centroid / double(n_c);
        pr.gt.push_back(std::move(inst));
    }
    return pr;
}

double vec_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// Rejects configurations near a hinge boundary, norm kink, or BCE clamp so
// that central differences see a smooth function.
bool margins_ok(const Problem& pr, const LossConstants& consts) {
    const double m = 5e-3;

    std::vector<std::vector<double>> means;
    for (const InstanceGroundTruth& inst : pr.gt) {
        Vec3 target;
        for (std::size_t i : inst.voxel_indices) target += pr.positions[i];
        target = target / double(inst.voxel_count());
        for (std::size_t i : inst.voxel_indices)
            if ((pr.offsets[i] + pr.positions[i] - target).norm() < m) return false;

        std::vector<double> u(std::size_t(kDim), 0.0);
        for (std::size_t i : inst.voxel_indices)
            for (int k = 0; k < kDim; ++k) u[std::size_t(k)] += pr.embeddings[i][std::size_t(k)];
        for (double& v : u) v /= double(inst.voxel_count());
        for (std::size_t i : inst.voxel_indices) {
            double d = vec_dist(u, pr.embeddings[i]);
            if (d < m || std::abs(d - consts.delta_v) < m) return false;
        }
        double un = 0.0;
        for (double v : u) un += v * v;
        if (std::sqrt(un) < m) return false;
        means.push_back(std::move(u));

        for (std::size_t i : inst.voxel_indices) {
            double n_c = double(inst.voxel_count());
            if (std::abs(pr.occupancy[i] - std::log(n_c)) < m) return false;
        }
    }

    for (std::size_t a = 0; a < means.size(); ++a)
        for (std::size_t b = a + 1; b < means.size(); ++b) {
            double d = vec_dist(means[a], means[b]);
            if (d < m || std::abs(2.0 * consts.delta_d - d) < m) return false;
        }

    // BCE clamp margins: stay clearly on one side of the clamp boundaries
    for (const InstanceGroundTruth& inst : pr.gt) {
        InstanceEmbeddingStats stats = instance_embedding_stats(
            pr.embeddings, pr.offsets, pr.positions, pr.sigma_s, pr.sigma_d, inst);
        const double q_lo = -std::log(consts.prob_clamp);  // ~16.1
        for (std::size_t i = 0; i < pr.size(); ++i) {
            double qs = vec_dist(pr.embeddings[i], stats.mean_embedding);
            qs = qs * qs / (stats.sigma_s * stats.sigma_s);
            Vec3 fd = pr.positions[i] + pr.offsets[i] - stats.predicted_center;
            double q = qs + fd.norm2() / (stats.sigma_d * stats.sigma_d);
            if (q < 1e-4) return false;                       // p near the 1-eps clamp
            if (std::abs(q - q_lo) < 0.3) return false;       // p near the eps clamp
        }
    }
    return true;
}

Problem make_problem(Rng& rng, const LossConstants& consts) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Problem pr = draw(rng);
        if (margins_ok(pr, consts)) return pr;
    }
    throw Error("gradcheck: failed to sample a smooth configuration");
}

double rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) /
           std::max({1e-3, std::abs(analytic), std::abs(numeric)});
}

struct Recorder {
    std::map<std::pair<std::string, std::string>, double> worst;

    void note(const std::string& term, const std::string& arg, double err) {
        double& w = worst[{term, arg}];
        w = std::max(w, err);
    }
};

template <typename F>
double central_diff(double& slot, F&& value) {
    const double saved = slot;
    slot = saved + kStep;
    double hi = value();
    slot = saved - kStep;
    double lo = value();
    slot = saved;
    return (hi - lo) / (2.0 * kStep);
}

void check_problem(Problem& pr, const LossConstants& consts, Recorder& rec) {
    const std::size_t n = pr.size();

    SemanticLossResult sem = semantic_loss(pr.logits, pr.labels);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < kClasses; ++c) {
            double num = central_diff(pr.logits[i][std::size_t(c)], [&] {
                return semantic_loss(pr.logits, pr.labels).value;
            });
            rec.note("L_c", "logits", rel_err(sem.grad_logits[i][std::size_t(c)], num));
        }

    SpatialLossResult sp = spatial_loss(pr.offsets, pr.positions, pr.gt);
    for (std::size_t i = 0; i < n; ++i)
        for (int a = 0; a < 3; ++a) {
            double num = central_diff(pr.offsets[i][a], [&] {
                return spatial_loss(pr.offsets, pr.positions, pr.gt).value;
            });
            rec.note("L_sp", "offsets", rel_err(sp.grad_offsets[i][a], num));
        }

    FeatureLossResult fe = feature_loss(pr.embeddings, pr.gt, consts);
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < kDim; ++k) {
            double& slot = pr.embeddings[i][std::size_t(k)];
            const double saved = slot;
            slot = saved + kStep;
            FeatureLossResult hi = feature_loss(pr.embeddings, pr.gt, consts);
            slot = saved - kStep;
            FeatureLossResult lo = feature_loss(pr.embeddings, pr.gt, consts);
            slot = saved;
            double inv = 1.0 / (2.0 * kStep);
            rec.note("L_var", "embeddings",
                     rel_err(fe.grad_var[i][std::size_t(k)], (hi.var - lo.var) * inv));
            rec.note("L_dist", "embeddings",
                     rel_err(fe.grad_dist[i][std::size_t(k)], (hi.dist - lo.dist) * inv));
            rec.note("L_reg", "embeddings",
                     rel_err(fe.grad_reg[i][std::size_t(k)], (hi.reg - lo.reg) * inv));
        }

    auto cov_value = [&] {
        return covariance_loss(pr.embeddings, pr.offsets, pr.positions, pr.sigma_s,
                               pr.sigma_d, pr.gt, consts)
            .value;
    };
    CovarianceLossResult cov = covariance_loss(pr.embeddings, pr.offsets, pr.positions,
                                               pr.sigma_s, pr.sigma_d, pr.gt, consts);
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < kDim; ++k) {
            double num = central_diff(pr.embeddings[i][std::size_t(k)], cov_value);
            rec.note("L_cov", "embeddings",
                     rel_err(cov.grad_embeddings[i][std::size_t(k)], num));
        }
        for (int a = 0; a < 3; ++a) {
            double num = central_diff(pr.offsets[i][a], cov_value);
            rec.note("L_cov", "offsets", rel_err(cov.grad_offsets[i][a], num));
        }
        rec.note("L_cov", "sigma_s",
                 rel_err(cov.grad_sigma_s[i], central_diff(pr.sigma_s[i], cov_value)));
        rec.note("L_cov", "sigma_d",
                 rel_err(cov.grad_sigma_d[i], central_diff(pr.sigma_d[i], cov_value)));
    }

    OccupancyLossResult oc = occupancy_loss(pr.occupancy, pr.gt);
    for (std::size_t i = 0; i < n; ++i) {
        double num = central_diff(pr.occupancy[i], [&] {
            return occupancy_loss(pr.occupancy, pr.gt).value;
        });
        rec.note("L_o", "occupancy", rel_err(oc.grad_occupancy[i], num));
    }

    // membership probability at fixed instance stats, on a member voxel and a
    // voxel of another instance
    InstanceEmbeddingStats stats = instance_embedding_stats(
        pr.embeddings, pr.offsets, pr.positions, pr.sigma_s, pr.sigma_d, pr.gt[0]);
    const std::size_t probe[2] = {pr.gt[0].voxel_indices[0], pr.gt[1].voxel_indices[0]};
    for (std::size_t j : probe) {
        auto p_value = [&] {
            return probability(pr.embeddings[j], pr.offsets[j], pr.positions[j], stats).p;
        };
        ProbabilityResult res =
            probability(pr.embeddings[j], pr.offsets[j], pr.positions[j], stats);
        for (int k = 0; k < kDim; ++k) {
            double num = central_diff(pr.embeddings[j][std::size_t(k)], p_value);
            rec.note("p", "embedding", rel_err(res.grad_embedding[std::size_t(k)], num));
        }
        for (int a = 0; a < 3; ++a) {
            double num = central_diff(pr.offsets[j][a], p_value);
            rec.note("p", "offset", rel_err(res.grad_offset[a], num));
        }
        rec.note("p", "sigma_s", rel_err(res.grad_sigma_s, central_diff(stats.sigma_s, p_value)));
        rec.note("p", "sigma_d", rel_err(res.grad_sigma_d, central_diff(stats.sigma_d, p_value)));
    }
}

}  // namespace

GradCheckReport run_gradient_checks(std::uint64_t seed, int trials, double tolerance) {
    if (trials < 1) throw ConfigError("run_gradient_checks: trials must be >= 1");
    LossConstants consts;
    Rng rng(seed);
    Recorder rec;
    for (int t = 0; t < trials; ++t) {
        Problem pr = make_problem(rng, consts);
        check_problem(pr, consts, rec);
    }

    GradCheckReport report;
    report.trials = trials;
    report.tolerance = tolerance;
    for (const auto& [key, err] : rec.worst)
        report.entries.push_back({key.first, key.second, err, err < tolerance});
    return report;
}

std::string gradcheck_to_text(const GradCheckReport& report) {
    std::ostringstream out;
    out << "term    argument    max_rel_err  status\n";
    for (const GradCheckEntry& e : report.entries)
        out << std::left << std::setw(8) << e.term << std::setw(12) << e.argument
            << std::scientific << std::setprecision(3) << std::setw(13) << e.max_rel_err
            << (e.pass ? "PASS" : "FAIL") << "\n";
    out << (report.all_pass() ? "all gradients PASS" : "gradient check FAILED") << " ("
        << report.trials << " trials, tol " << std::scientific << std::setprecision(1)
        << report.tolerance << ")\n";
    return out.str();
}

}  // namespace occuseg
