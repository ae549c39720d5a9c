#pragma once

#include <cstddef>
#include <vector>

#include "lamo/tensor.hpp"

namespace lamo {

// One (clip, frame-pair) drift sample: the per-channel spatial means of the
// predicted and ground-truth tau-step latent changes.
struct DriftPair {
    std::vector<double> mu_hat;   // length C
    std::vector<double> mu_star;  // length C
    std::size_t frame = 0;        // 0-based pair index i
    std::size_t lag = 0;
};

// Tau-step latent change of a clean clip [T,C,H,W]: entry i (i = 0..T-lag-1)
// is frame(i+lag) - frame(i).
std::vector<Tensor> delta_tau(const Tensor& clip, std::size_t lag);

// Per-channel spatial mean of a [C,H,W] change tensor.
std::vector<double> macro_drift(const Tensor& delta);

struct DriftLossResult {
    double value = 0.0;
    // Gradient w.r.t. each mu_hat: 2(mu_hat - mu_star) / ((|mu_star|^2 + eps) * n).
    std::vector<std::vector<double>> mu_hat_grads;
    // Gradient w.r.t. each mu_star with the stop-gradient denominator held
    // constant (numerator path only); exposed for the stop-gradient check.
    std::vector<std::vector<double>> mu_star_grads;
};

// Scale-normalized drift loss, Eq.-style per-pair normalization:
// mean over pairs of |mu_hat - mu_star|^2 / (|mu_star|^2 + eps_stab), with
// the denominator constant under differentiation.
DriftLossResult drift_loss(const std::vector<DriftPair>& pairs, double eps_stab);

// total = denoise + lambda_drift * w * drift; w carries no gradient.
double training_loss(double denoise, double drift, double lambda_drift, double schedule_w);

// Diagnostic-only variants kept for ablation-direction tests; not part of
// any training path.
double drift_loss_raw_l2(const std::vector<DriftPair>& pairs);
double dense_motion_loss(const Tensor& delta_hat, const Tensor& delta_star);

}  // namespace lamo
