#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace occuseg {

struct GradCheckEntry {
    std::string term;      // loss term, e.g. "L_cov"
    std::string argument;  // perturbed quantity, e.g. "sigma_s"
    double max_rel_err = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    int trials = 0;
    double tolerance = 0.0;

    bool all_pass() const;
};

/// Compares every analytic gradient against central finite differences on
/// random instance configurations sampled away from hinge/clamp/kink points.
/// One entry per (term, argument) pair with the worst relative error seen.
GradCheckReport run_gradient_checks(std::uint64_t seed, int trials = 100,
                                    double tolerance = 1e-4);

std::string gradcheck_to_text(const GradCheckReport& report);

}  // namespace occuseg
