#include "lamo/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "lamo/parallel.hpp"

namespace lamo {

std::string to_string(GuidanceMode m) {
    switch (m) {
        case GuidanceMode::noise: return "noise";
        case GuidanceMode::latent_edit: return "latent-edit";
        default: return "off";
    }
}

GuidanceMode guidance_mode_from(const std::string& s) {
    if (s == "noise") return GuidanceMode::noise;
    if (s == "latent-edit") return GuidanceMode::latent_edit;
    if (s == "off") return GuidanceMode::off;
    throw std::invalid_argument("unknown guidance mode: " + s);
}

Tensor cfg_mix(const Tensor& cond, const Tensor& uncond, double g) {
    if (!cond.same_shape(uncond)) {
        throw std::invalid_argument("cfg_mix: shape mismatch");
    }
    Tensor out = uncond;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] += g * (cond.data[i] - uncond.data[i]);
    }
    return out;
}

bool gate_active(std::size_t s, std::size_t steps, double rho) {
    double boundary = std::ceil((1.0 - rho) * double(steps));
    return double(s) >= boundary;
}

std::vector<std::size_t> sampling_times(std::size_t steps, std::size_t s_train) {
    if (steps < 1) throw std::invalid_argument("sampling_times: steps must be >= 1");
    std::vector<std::size_t> ts(steps);
    if (steps == 1) {
        ts[0] = s_train;
        return ts;
    }
    for (std::size_t s = 0; s < steps; ++s) {
        double u = double(steps - 1 - s) / double(steps - 1);
        ts[s] = 1 + std::size_t(std::llround(u * double(s_train - 1)));
    }
    return ts;
}

namespace {

struct GuideParts {
    double loss = 0.0;
    Tensor cot;  // d loss / d x0, clip-shaped
};

GuideParts guide_parts(const Tensor& x0_clip, const FieldNet& net, const Conditioning* cond,
                       std::size_t lag, bool want_cot) {
    if (x0_clip.ndim() != 4) {
        throw std::invalid_argument("guide_loss: expected [T,C,H,W]");
    }
    const std::size_t T = x0_clip.dim(0);
    if (lag >= T) throw std::invalid_argument("guide_loss: lag must be < T");
    const std::size_t C = x0_clip.dim(1), H = x0_clip.dim(2), W = x0_clip.dim(3);
    const std::size_t frame_len = C * H * W;
    const std::size_t n_pairs = T - lag;
    const double pair_w = 2.0 / double(n_pairs);

    GuideParts out;
    if (want_cot) out.cot = Tensor::zeros(x0_clip.shape);

    std::vector<double> pair_loss(n_pairs, 0.0);
    std::vector<Tensor> pair_res(n_pairs);
    std::vector<Tensor> vjps(n_pairs);
    parallel_for(n_pairs, [&](std::size_t i) {
        Tensor frame = Tensor::zeros({C, H, W});
        std::copy(x0_clip.data.begin() + i * frame_len,
                  x0_clip.data.begin() + (i + 1) * frame_len, frame.data.begin());
        const double* nxt = x0_clip.ptr() + (i + lag) * frame_len;
        auto residual_of = [&](const Tensor& value) {
            Tensor r = value;
            for (std::size_t j = 0; j < frame_len; ++j) {
                r.data[j] += frame.data[j] - nxt[j];
            }
            return r;
        };
        Tensor r;
        if (want_cot) {
            // one graph serves the forward pass and the J^T r pullback
            auto [value, jr] = fieldnet_forward_with_vjp(net, frame, cond, residual_of);
            r = residual_of(value);
            vjps[i] = std::move(jr);
        } else {
            r = residual_of(fieldnet_forward(net, frame, cond));
        }
        double s = 0.0;
        for (double v : r.data) s += v * v;
        pair_loss[i] = s;
        pair_res[i] = std::move(r);
    });
    for (double v : pair_loss) out.loss += v;
    out.loss /= double(n_pairs);

    if (want_cot) {
        for (std::size_t i = 0; i < n_pairs; ++i) {
            double* at_i = out.cot.ptr() + i * frame_len;
            double* at_next = out.cot.ptr() + (i + lag) * frame_len;
            const Tensor& r = pair_res[i];
            const Tensor& jr = vjps[i];
            for (std::size_t j = 0; j < frame_len; ++j) {
                at_i[j] += pair_w * (r.data[j] + jr.data[j]);
                at_next[j] -= pair_w * r.data[j];
            }
        }
    }
    return out;
}

}  // namespace

double guide_loss(const Tensor& x0_clip, const FieldNet& net, const Conditioning* cond,
                  std::size_t lag) {
    return guide_parts(x0_clip, net, cond, lag, false).loss;
}

Tensor guide_loss_x0_cotangent(const Tensor& x0_clip, const FieldNet& net,
                               const Conditioning* cond, std::size_t lag) {
    return guide_parts(x0_clip, net, cond, lag, true).cot;
}

Tensor guidance_gradient(const Tensor& model_out, const Tensor& z_t, std::size_t t,
                         const NoiseSchedule& sched, const FieldNet& net,
                         const Conditioning* cond, std::size_t lag) {
    Tensor x0 = xhat0(model_out, z_t, t, sched);
    Tensor cot = guide_loss_x0_cotangent(x0, net, cond, lag);
    return scale(cot, xhat0_out_coeff(t, sched));
}

Trajectory sample(const Denoiser& deno, const FieldNet* net, const NoiseSchedule& sched,
                  const SamplerConfig& cfg, const Conditioning& cond, RngStream& rng) {
    if (cfg.steps < 1) throw std::invalid_argument("sample: steps must be >= 1");
    if (cfg.rho < 0.0 || cfg.rho > 1.0) throw std::invalid_argument("sample: rho outside [0,1]");
    if (!net && cfg.mode != GuidanceMode::off) {
        throw std::invalid_argument("sample: fieldnet required unless guidance is off");
    }
    if (deno.cfg.param != sched.param) {
        throw std::invalid_argument("sample: denoiser/schedule parameterization mismatch");
    }
    if (cfg.lag >= cfg.t_frames) throw std::invalid_argument("sample: lag must be < t_frames");
    std::vector<std::size_t> times =
        cfg.step_times.empty() ? sampling_times(cfg.steps, sched.s_train) : cfg.step_times;
    if (times.size() != cfg.steps) {
        throw std::invalid_argument("sample: step_times length must equal steps");
    }

    Tensor z = Tensor::zeros({cfg.t_frames, deno.cfg.channels, cfg.height, cfg.width});
    for (double& v : z.data) v = rng.normal();

    Trajectory traj;
    traj.steps.reserve(cfg.steps);
    for (std::size_t s = 0; s < cfg.steps; ++s) {
        const std::size_t t = times[s];
        const bool gate = gate_active(s, cfg.steps, cfg.rho);
        const bool guide_now = gate && cfg.mode != GuidanceMode::off && cfg.lambda_guide != 0.0;

        Tensor eps_c = denoiser_forward(deno, z, t, &cond);
        Tensor eps_u = denoiser_forward(deno, z, t, nullptr);
        Tensor eps_cfg = cfg_mix(eps_c, eps_u, cfg.cfg_scale);

        StepRecord rec;
        rec.s = s;
        rec.t = t;
        rec.gate = gate;
        rec.eps_cfg = eps_cfg;

        Tensor eps_guided = eps_cfg;
        if (net) {
            Tensor x0_pre = xhat0(eps_cfg, z, t, sched);
            GuideParts parts = guide_parts(x0_pre, *net, &cond, cfg.lag, guide_now);
            rec.guide_loss_value = parts.loss;
            if (guide_now && cfg.mode == GuidanceMode::noise) {
                eps_guided =
                    add_scaled(eps_cfg, parts.cot, -cfg.lambda_guide * xhat0_out_coeff(t, sched));
            } else if (guide_now && cfg.mode == GuidanceMode::latent_edit) {
                // edit the latent directly and keep the noise estimate as-is;
                // the chain is the same except d x0 / d z_t replaces d x0 / d out
                z = add_scaled(z, parts.cot, -cfg.lambda_guide * xhat0_zt_coeff(t, sched));
            }
        }

        rec.z_t = z;
        rec.eps_guided = eps_guided;
        Tensor x0 = xhat0(eps_guided, z, t, sched);
        const std::size_t t_prev = s + 1 < cfg.steps ? times[s + 1] : 0;
        double a_prev = std::sqrt(sched.abar(t_prev)), s_prev = sched.sig(t_prev);
        for (std::size_t i = 0; i < z.size(); ++i) {
            z.data[i] = a_prev * x0.data[i] + s_prev * eps_guided.data[i];
        }
        traj.steps.push_back(std::move(rec));
    }
    traj.z_out = std::move(z);
    return traj;
}

}  // namespace lamo
