#pragma once

#include <string>
#include <vector>

#include "lamo/denoiser.hpp"
#include "lamo/fieldnet.hpp"

namespace lamo::checks {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// |a-b| <= rtol*max(|a|,|b|) + atol
bool close(double a, double b, double rtol, double atol = 1e-10);
double rel_err(double a, double b);

// Diagnostic helpers: overwrite every parameter with small random values
// (used by gradient checks; a trained or fresh net keeps its structure).
void randomize_params(FieldNet& net, RngStream& rng, double scale = 0.25);
void randomize_params(Denoiser& net, RngStream& rng, double scale = 0.25);

CheckResult lmt1_round_trip();
CheckResult rng_reproducibility();
CheckResult schedule_invariants();
CheckResult xhat0_round_trip();
CheckResult drift_decomposition(std::size_t n_pairs, double tol = 1e-9);
CheckResult drift_stop_gradient();
CheckResult drift_quiet_clip();
CheckResult drift_scale_invariance();
CheckResult scene_oracle(std::size_t n_configs, double tol = 1e-12);
CheckResult macro_drift_oracle();
CheckResult fieldnet_zero_init();
CheckResult fieldnet_param_fd(std::size_t probes);
CheckResult fieldnet_vjp_fd(std::size_t probes);
// max_coords > 0 restricts each probe to a random parameter subset
CheckResult denoiser_param_fd(std::size_t probes, std::size_t max_coords = 0);
CheckResult guidance_fd(std::size_t probes, std::size_t max_coords = 0);
CheckResult prefactor_ratio(double tol = 1e-6);
CheckResult gate_algebra();
CheckResult heatmap_nulls();
CheckResult dataset_integrity(const std::string& dir);

// The cmd-check suite; probes scales the gradient-check effort.
std::vector<CheckResult> structural_suite(std::size_t probes = 3);

}  // namespace lamo::checks
