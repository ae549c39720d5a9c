#pragma once

#include <cstddef>
#include <vector>

#include "lamo/denoiser.hpp"
#include "lamo/fieldnet.hpp"
#include "lamo/schedule.hpp"

namespace lamo {

enum class GuidanceMode { noise, latent_edit, off };

std::string to_string(GuidanceMode m);
GuidanceMode guidance_mode_from(const std::string& s);

struct SamplerConfig {
    std::size_t steps = 50;        // S
    double cfg_scale = 2.0;        // g
    double lambda_guide = 25.0;
    double rho = 0.8;              // active-window ratio
    std::size_t lag = 2;
    GuidanceMode mode = GuidanceMode::noise;
    // generated clip geometry; channel count comes from the denoiser
    std::size_t t_frames = 9;
    std::size_t height = 16;
    std::size_t width = 16;
    // descending subsequence of the training grid; filled from the schedule
    // when empty
    std::vector<std::size_t> step_times;
};

struct StepRecord {
    std::size_t s = 0;             // 0 at the high-noise end
    std::size_t t = 0;
    bool gate = false;
    double guide_loss_value = 0.0; // at the pre-guidance state of this step
    Tensor z_t;                    // latent the update ran from (post edit in latent-edit mode)
    Tensor eps_cfg;
    Tensor eps_guided;             // == eps_cfg bitwise when no noise-space guidance applied
};

struct Trajectory {
    std::vector<StepRecord> steps;
    Tensor z_out;
};

// uncond + g * (cond - uncond)
Tensor cfg_mix(const Tensor& cond, const Tensor& uncond, double g);

// Gate is active at step s (0-indexed from the high-noise end) iff
// s >= ceil((1-rho)*S); exact integer boundaries are active.
bool gate_active(std::size_t s, std::size_t steps, double rho);

// Evenly spaced descending timesteps t_0 = s_train .. t_{S-1} = 1.
std::vector<std::size_t> sampling_times(std::size_t steps, std::size_t s_train);

// Motion-consistency loss over an x0 clip [T,C,H,W]:
// mean over pairs i of |x0_i + f(x0_i, c) - x0_{i+lag}|^2 (sum over C,H,W).
double guide_loss(const Tensor& x0_clip, const FieldNet& net, const Conditioning* cond,
                  std::size_t lag);

// d guide_loss / d x0, clip-shaped: pair i contributes
// (2/(T-lag)) (r_i + J_i^T r_i) at frame i and -(2/(T-lag)) r_i at frame i+lag.
Tensor guide_loss_x0_cotangent(const Tensor& x0_clip, const FieldNet& net,
                               const Conditioning* cond, std::size_t lag);

// Exact gradient of guide_loss w.r.t. the model output, through the x0
// projection at (z_t, t).
Tensor guidance_gradient(const Tensor& model_out, const Tensor& z_t, std::size_t t,
                         const NoiseSchedule& sched, const FieldNet& net,
                         const Conditioning* cond, std::size_t lag);

// Deterministic (eta = 0) sampling loop with CFG and, when gated active,
// motion guidance on the noise prediction (or the latent-edit ablation).
// net may be null only when mode == off.
Trajectory sample(const Denoiser& deno, const FieldNet* net, const NoiseSchedule& sched,
                  const SamplerConfig& cfg, const Conditioning& cond, RngStream& rng);

}  // namespace lamo
