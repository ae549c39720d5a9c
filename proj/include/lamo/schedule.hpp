#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lamo/tensor.hpp"

namespace lamo {

enum class ScheduleKind { linear_beta, cosine };
enum class Parameterization { epsilon, v };

std::string to_string(ScheduleKind k);
std::string to_string(Parameterization p);
ScheduleKind schedule_kind_from(const std::string& s);
Parameterization parameterization_from(const std::string& s);

// Cumulative schedule over training timesteps t = 1..s_train (1-based;
// t = 0 is the clean state with abar = 1, sigma = 0). sigma_t^2 + abar_t = 1
// holds per entry and abar is monotone non-increasing.
struct NoiseSchedule {
    std::size_t s_train = 0;
    std::vector<double> alpha_bar;  // alpha_bar[t-1]
    std::vector<double> sigma;      // sigma[t-1] = sqrt(1 - alpha_bar[t-1])
    Parameterization param = Parameterization::epsilon;

    double abar(std::size_t t) const { return t == 0 ? 1.0 : alpha_bar[t - 1]; }
    double sig(std::size_t t) const { return t == 0 ? 0.0 : sigma[t - 1]; }
};

NoiseSchedule build_schedule(ScheduleKind kind, std::size_t s_train,
                             Parameterization param = Parameterization::epsilon);

// z_t = sqrt(abar_t) z0 + sigma_t eps
Tensor forward_diffuse(const Tensor& z0, std::size_t t, const Tensor& eps,
                       const NoiseSchedule& sched);

// Data-side projection of the model state.
//   epsilon: x0 = (z_t - sigma_t * out) / sqrt(abar_t)
//   v:       x0 = sqrt(abar_t) * z_t - sigma_t * out
// epsilon mode throws when abar_t < 1e-12 (projection ill-conditioned).
Tensor xhat0(const Tensor& model_out, const Tensor& z_t, std::size_t t,
             const NoiseSchedule& sched);

// d x0 / d model_out, a per-element constant.
double xhat0_out_coeff(std::size_t t, const NoiseSchedule& sched);
// d x0 / d z_t, per-element constant (model output held fixed).
double xhat0_zt_coeff(std::size_t t, const NoiseSchedule& sched);

// Per-batch schedule weight w = mean of abar over the sampled timesteps;
// treated as a constant (no gradient) in the training objective.
double schedule_weight(const std::vector<std::size_t>& ts, const NoiseSchedule& sched);

}  // namespace lamo
