#include "lamo/denoiser.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "lamo/motionprior.hpp"
#include "lamo/nn/adam.hpp"
#include "lamo/nn/ops.hpp"
#include "lamo/nn/tape.hpp"
#include "lamo/parallel.hpp"

namespace lamo {

using nn::Tape;
using nn::Var;

std::vector<Tensor*> Denoiser::params() {
    std::vector<Tensor*> out = {&in_w, &in_b, &t_emb_w, &t_emb_b, &c_emb_w, &c_emb_b,
                                &uncond_emb};
    for (auto& b : sblocks) {
        out.insert(out.end(),
                   {&b.conv1_w, &b.conv1_b, &b.conv2_w, &b.conv2_b, &b.film_w, &b.film_b});
    }
    for (auto& m : tmixes) out.insert(out.end(), {&m.w, &m.b});
    out.insert(out.end(), {&out_w, &out_b});
    return out;
}

std::vector<const Tensor*> Denoiser::params() const {
    auto mut = const_cast<Denoiser*>(this)->params();
    return {mut.begin(), mut.end()};
}

std::vector<std::string> Denoiser::param_names() const {
    std::vector<std::string> out = {"in.w",    "in.b",    "t_emb.w", "t_emb.b",
                                    "c_emb.w", "c_emb.b", "uncond_emb"};
    for (std::size_t k = 0; k < sblocks.size(); ++k) {
        std::string p = "sblock" + std::to_string(k) + ".";
        for (const char* n : {"conv1.w", "conv1.b", "conv2.w", "conv2.b", "film.w", "film.b"}) {
            out.push_back(p + n);
        }
    }
    for (std::size_t k = 0; k < tmixes.size(); ++k) {
        out.push_back("tmix" + std::to_string(k) + ".w");
        out.push_back("tmix" + std::to_string(k) + ".b");
    }
    out.insert(out.end(), {"out.w", "out.b"});
    return out;
}

std::size_t Denoiser::param_count() const {
    std::size_t n = 0;
    for (const Tensor* p : params()) n += p->size();
    return n;
}

namespace {

Tensor randn(std::vector<std::size_t> shape, double scale, RngStream& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = scale * rng.normal();
    return t;
}

// regression target for the model head: eps itself in epsilon mode,
// v = sqrt(abar) eps - sigma z0 in v mode
Tensor model_target(const Tensor& z0, const Tensor& eps, std::size_t t,
                    const NoiseSchedule& sched) {
    if (sched.param == Parameterization::epsilon) return eps;
    double a = std::sqrt(sched.abar(t)), s = sched.sig(t);
    Tensor v = eps;
    for (std::size_t i = 0; i < v.size(); ++i) {
        v.data[i] = a * eps.data[i] - s * z0.data[i];
    }
    return v;
}

// fixed sinusoidal features of the raw timestep index
Tensor timestep_features(std::size_t t, std::size_t dim) {
    Tensor f = Tensor::zeros({dim});
    const std::size_t half = dim / 2;
    for (std::size_t k = 0; k < half; ++k) {
        double freq = std::exp(-std::log(10000.0) * double(k) / double(half > 1 ? half - 1 : 1));
        f.data[k] = std::sin(double(t) * freq);
        f.data[half + k] = std::cos(double(t) * freq);
    }
    return f;
}

}  // namespace

Denoiser init_denoiser(const DenoiserConfig& cfg, RngStream& rng) {
    if (cfg.channels < 1 || cfg.width < 1 || cfg.spatial_blocks < 1 || cfg.emb_dim < 2) {
        throw std::invalid_argument("init_denoiser: invalid sizes");
    }
    Denoiser net;
    net.cfg = cfg;
    const std::size_t C = cfg.channels, Wd = cfg.width, E = cfg.emb_dim, Dc = cfg.cond_dim;
    net.in_w = randn({3, 3, C, Wd}, 1.0 / std::sqrt(9.0 * double(C)), rng);
    net.in_b = Tensor::zeros({Wd});
    net.t_emb_w = randn({E, E}, 1.0 / std::sqrt(double(E)), rng);
    net.t_emb_b = Tensor::zeros({E});
    net.c_emb_w = randn({Dc, E}, 1.0 / std::sqrt(double(Dc)), rng);
    net.c_emb_b = Tensor::zeros({E});
    net.uncond_emb = randn({E}, 0.02, rng);
    double conv_scale = 1.0 / std::sqrt(9.0 * double(Wd));
    for (std::size_t k = 0; k < cfg.spatial_blocks; ++k) {
        DenoiserSBlock b;
        b.conv1_w = randn({3, 3, Wd, Wd}, conv_scale, rng);
        b.conv1_b = Tensor::zeros({Wd});
        b.conv2_w = randn({3, 3, Wd, Wd}, conv_scale, rng);
        b.conv2_b = Tensor::zeros({Wd});
        b.film_w = Tensor::zeros({E, 2 * Wd});
        b.film_b = Tensor::zeros({2 * Wd});
        net.sblocks.push_back(std::move(b));
    }
    for (std::size_t k = 0; k < cfg.temporal_mixes; ++k) {
        DenoiserTMix m;
        m.w = randn({3, Wd, Wd}, 1.0 / std::sqrt(3.0 * double(Wd)), rng);
        m.b = Tensor::zeros({Wd});
        net.tmixes.push_back(std::move(m));
    }
    net.out_w = Tensor::zeros({1, 1, Wd, C});
    net.out_b = Tensor::zeros({C});
    return net;
}

namespace {

struct DenoGraph {
    std::vector<Var*> leaves;
    Var* output = nullptr;  // [T,H,W,C]
};

DenoGraph build_deno_graph(Tape& tp, const Denoiser& net, const Tensor& z_t_tchw,
                           std::size_t t, const Conditioning* cond, bool param_grads) {
    const auto& cfg = net.cfg;
    if (z_t_tchw.ndim() != 4 || z_t_tchw.dim(1) != cfg.channels) {
        throw std::invalid_argument("denoiser: clip must be [T,C,H,W] with C=" +
                                    std::to_string(cfg.channels) + ", got " +
                                    shape_str(z_t_tchw.shape));
    }
    if (cond && cond->size() != cfg.cond_dim) {
        throw std::invalid_argument("denoiser: conditioning length mismatch");
    }
    DenoGraph g;
    auto ps = net.params();
    g.leaves.reserve(ps.size());
    for (const Tensor* p : ps) g.leaves.push_back(tp.leaf(*p, param_grads));
    // leaf order: in(2), t_emb(2), c_emb(2), uncond(1), sblocks(6 each),
    // tmixes(2 each), out(2)
    std::size_t at = 0;
    Var* in_w = g.leaves[at++];
    Var* in_b = g.leaves[at++];
    Var* t_w = g.leaves[at++];
    Var* t_b = g.leaves[at++];
    Var* c_w = g.leaves[at++];
    Var* c_b = g.leaves[at++];
    Var* unc = g.leaves[at++];
    std::vector<std::size_t> sb(cfg.spatial_blocks);
    for (std::size_t k = 0; k < cfg.spatial_blocks; ++k, at += 6) sb[k] = at;
    std::vector<std::size_t> tm(cfg.temporal_mixes);
    for (std::size_t k = 0; k < cfg.temporal_mixes; ++k, at += 2) tm[k] = at;
    Var* out_w = g.leaves[at++];
    Var* out_b = g.leaves[at++];

    Var* t_feat = tp.leaf(timestep_features(t, cfg.emb_dim), false);
    Var* e_t = nn::silu(tp, nn::linear(tp, t_feat, t_w, t_b));
    Var* e_c;
    if (cond) {
        Var* cv = tp.leaf(Tensor({cfg.cond_dim}, *cond), false);
        e_c = nn::linear(tp, cv, c_w, c_b);
    } else {
        e_c = unc;
    }
    Var* emb = nn::silu(tp, nn::add(tp, e_t, e_c));

    Var* x = tp.leaf(nn::tchw_to_thwc(z_t_tchw), false);
    Var* h = nn::conv2d_clip(tp, x, in_w, in_b);
    for (std::size_t k = 0; k < cfg.spatial_blocks; ++k) {
        Var* u = nn::conv2d_clip(tp, h, g.leaves[sb[k]], g.leaves[sb[k] + 1]);
        Var* ss = nn::linear(tp, emb, g.leaves[sb[k] + 4], g.leaves[sb[k] + 5]);
        u = nn::film(tp, u, ss);
        u = nn::silu(tp, u);
        u = nn::conv2d_clip(tp, u, g.leaves[sb[k] + 2], g.leaves[sb[k] + 3]);
        h = nn::add(tp, h, u);
        if (k < cfg.temporal_mixes) {
            Var* v = nn::conv_time(tp, h, g.leaves[tm[k]], g.leaves[tm[k] + 1]);
            v = nn::silu(tp, v);
            h = nn::add(tp, h, v);
        }
    }
    g.output = nn::conv2d_clip(tp, h, out_w, out_b);
    return g;
}

}  // namespace

Tensor denoiser_forward(const Denoiser& net, const Tensor& z_t, std::size_t t,
                        const Conditioning* cond) {
    Tape tp;
    DenoGraph g = build_deno_graph(tp, net, z_t, t, cond, false);
    return nn::thwc_to_tchw(g.output->value);
}

std::vector<Tensor> denoiser_grads(const Denoiser& net, const Tensor& z_t, std::size_t t,
                                   const Conditioning* cond, const Tensor& target,
                                   double* loss_out) {
    Tape tp;
    DenoGraph g = build_deno_graph(tp, net, z_t, t, cond, true);
    Var* loss = nn::mse_const(tp, g.output, nn::tchw_to_thwc(target));
    tp.backward(loss);
    if (loss_out) *loss_out = loss->value.data[0];
    std::vector<Tensor> grads;
    grads.reserve(g.leaves.size());
    for (Var* leaf : g.leaves) grads.push_back(std::move(leaf->grad));
    return grads;
}

std::vector<NoisedClip> make_noised_batch(const std::vector<const VideoLatent*>& batch,
                                          const NoiseSchedule& sched, RngStream& rng,
                                          double p_uncond) {
    if (batch.empty()) throw std::invalid_argument("make_noised_batch: empty batch");
    std::vector<NoisedClip> out(batch.size());
    // one tag draw per call; clip k then owns stream (tag, k), so the noising
    // fans out across workers without changing any draw
    const std::uint64_t tag = rng.next_u64();
    parallel_for(batch.size(), [&](std::size_t k) {
        RngStream sub(tag, k);
        NoisedClip& n = out[k];
        n.clip = batch[k];
        n.t = 1 + sub.next_below(sched.s_train);
        n.eps = Tensor::zeros(n.clip->z.shape);
        for (double& v : n.eps.data) v = sub.normal();
        n.z_t = forward_diffuse(n.clip->z, n.t, n.eps, sched);
        n.uncond = p_uncond > 0.0 && sub.bernoulli(p_uncond);
    });
    return out;
}

DenoiseLossOut denoise_loss_with(const ForwardFn& forward, const std::vector<NoisedClip>& noised,
                                 const NoiseSchedule& sched) {
    DenoiseLossOut out;
    out.xhat0_clips.resize(noised.size());
    std::vector<double> losses(noised.size(), 0.0);
    parallel_for(noised.size(), [&](std::size_t k) {
        const NoisedClip& n = noised[k];
        Tensor pred = forward(n.z_t, n.t, n.uncond ? nullptr : &n.clip->cond);
        Tensor target = model_target(n.clip->z, n.eps, n.t, sched);
        double s = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            double d = pred.data[i] - target.data[i];
            s += d * d;
        }
        losses[k] = s / double(pred.size());
        out.xhat0_clips[k] = xhat0(pred, n.z_t, n.t, sched);
    });
    for (double l : losses) out.loss += l;
    out.loss /= double(noised.size());
    return out;
}

DenoiseLossOut denoise_loss(const Denoiser& net, const std::vector<const VideoLatent*>& batch,
                            const NoiseSchedule& sched, RngStream& rng) {
    auto noised = make_noised_batch(batch, sched, rng, 0.0);
    return denoise_loss_with(
        [&](const Tensor& z_t, std::size_t t, const Conditioning* c) {
            return denoiser_forward(net, z_t, t, c);
        },
        noised, sched);
}

namespace {

// Eq.-6 drift term over one clip's pairs; mu_star held constant. Gradients
// flow into mu_hat only (stop-gradient denominator).
Var* drift_node(Tape& tp, Var* mu_hat, std::vector<std::vector<double>> mu_star,
                double eps_stab, std::size_t lag) {
    const std::size_t P = mu_hat->value.dim(0), C = mu_hat->value.dim(1);
    std::vector<DriftPair> pairs(P);
    for (std::size_t i = 0; i < P; ++i) {
        pairs[i].mu_hat.assign(mu_hat->value.ptr() + i * C, mu_hat->value.ptr() + (i + 1) * C);
        pairs[i].mu_star = mu_star[i];
        pairs[i].frame = i;
        pairs[i].lag = lag;
    }
    DriftLossResult res = drift_loss(pairs, eps_stab);
    Var* out = tp.node(Tensor::full({1}, res.value), mu_hat->needs_grad, nullptr);
    if (mu_hat->needs_grad) {
        auto grads = std::move(res.mu_hat_grads);
        out->backward = [=, grads = std::move(grads)] {
            double g = out->grad.data[0];
            for (std::size_t i = 0; i < P; ++i) {
                for (std::size_t c = 0; c < C; ++c) {
                    mu_hat->grad.data[i * C + c] += g * grads[i][c];
                }
            }
        };
    }
    return out;
}

struct StepSample {
    std::vector<Tensor> grads;
    double denoise = 0.0;
    double drift = 0.0;
};

}  // namespace

Denoiser train_denoiser(const std::vector<VideoLatent>& dataset, const NoiseSchedule& sched,
                        const DenoTrainConfig& cfg, RngStream& rng, std::ostream* log) {
    if (dataset.empty()) throw std::invalid_argument("train_denoiser: empty dataset");
    const Tensor& z0 = dataset[0].z;
    const std::size_t T = z0.dim(0), C = z0.dim(1);
    if (cfg.lag >= T) throw std::invalid_argument("train_denoiser: lag must be < clip length");

    RngStream init_rng = rng.substream(0);
    RngStream draw_rng = rng.substream(1);
    DenoiserConfig net_cfg;
    net_cfg.channels = C;
    net_cfg.cond_dim = kCondDim;
    net_cfg.width = cfg.width;
    net_cfg.spatial_blocks = cfg.spatial_blocks;
    net_cfg.temporal_mixes = cfg.temporal_mixes;
    net_cfg.emb_dim = cfg.emb_dim;
    net_cfg.param = sched.param;
    Denoiser net = init_denoiser(net_cfg, init_rng);

    nn::Adam opt(net.params(), cfg.lr);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        std::vector<const VideoLatent*> picks(cfg.batch);
        for (std::size_t k = 0; k < cfg.batch; ++k) {
            picks[k] = &dataset[draw_rng.next_below(dataset.size())];
        }
        auto noised = make_noised_batch(picks, sched, draw_rng, cfg.p_uncond);
        std::vector<std::size_t> ts(noised.size());
        for (std::size_t k = 0; k < noised.size(); ++k) ts[k] = noised[k].t;
        const double w = schedule_weight(ts, sched);
        const bool with_drift = !cfg.pure_denoise && cfg.lambda_drift != 0.0;

        std::vector<StepSample> per(noised.size());
        parallel_for(noised.size(), [&](std::size_t k) {
            const NoisedClip& n = noised[k];
            Tape tp;
            DenoGraph g = build_deno_graph(tp, net, n.z_t, n.t,
                                           n.uncond ? nullptr : &n.clip->cond, true);
            Tensor target = model_target(n.clip->z, n.eps, n.t, sched);
            Var* denoise = nn::mse_const(tp, g.output, nn::tchw_to_thwc(target));
            per[k].denoise = denoise->value.data[0];

            // x0 projection as an affine node, then per-pair macro drifts
            Tensor base = lamo::scale(nn::tchw_to_thwc(n.z_t), xhat0_zt_coeff(n.t, sched));
            Var* x0 = nn::affine_const(tp, g.output, xhat0_out_coeff(n.t, sched),
                                       std::move(base));
            Var* mu_hat = nn::frame_drift(tp, x0, cfg.lag);
            auto star_deltas = delta_tau(n.clip->z, cfg.lag);
            std::vector<std::vector<double>> mu_star(star_deltas.size());
            for (std::size_t i = 0; i < star_deltas.size(); ++i) {
                mu_star[i] = macro_drift(star_deltas[i]);
            }
            Var* drift = drift_node(tp, mu_hat, std::move(mu_star), cfg.eps_stab, cfg.lag);
            per[k].drift = drift->value.data[0];

            // damp each sample by its own abar so the x0 amplification at
            // high noise cancels instead of leaking through the batch mean
            const double drift_coeff = cfg.lambda_drift * sched.abar(n.t);
            Var* total = with_drift
                             ? nn::weighted_sum(tp, {denoise, drift}, {1.0, drift_coeff})
                             : denoise;
            tp.backward(total);
            per[k].grads.reserve(g.leaves.size());
            for (Var* leaf : g.leaves) per[k].grads.push_back(std::move(leaf->grad));
        });

        std::vector<Tensor> grads = std::move(per[0].grads);
        double denoise_v = per[0].denoise, drift_v = per[0].drift;
        for (std::size_t k = 1; k < per.size(); ++k) {
            denoise_v += per[k].denoise;
            drift_v += per[k].drift;
            for (std::size_t j = 0; j < grads.size(); ++j) {
                for (std::size_t i = 0; i < grads[j].size(); ++i) {
                    grads[j].data[i] += per[k].grads[j].data[i];
                }
            }
        }
        double inv = 1.0 / double(per.size());
        denoise_v *= inv;
        drift_v *= inv;
        for (Tensor& gt : grads) {
            for (double& v : gt.data) v *= inv;
        }
        if (cfg.clip_norm > 0.0) {
            double norm2 = 0.0;
            for (const Tensor& gt : grads) {
                for (double v : gt.data) norm2 += v * v;
            }
            double norm = std::sqrt(norm2);
            if (norm > cfg.clip_norm) {
                double s = cfg.clip_norm / norm;
                for (Tensor& gt : grads) {
                    for (double& v : gt.data) v *= s;
                }
            }
        }
        opt.step(grads);
        if (log) {
            (*log) << "step " << (step + 1) << " denoise " << denoise_v << " drift " << drift_v
                   << " w " << w << " total "
                   << training_loss(denoise_v, drift_v, cfg.pure_denoise ? 0.0 : cfg.lambda_drift,
                                    w)
                   << "\n";
        }
    }
    return net;
}

double eval_drift_error(const Denoiser& net, const std::vector<VideoLatent>& clips,
                        const NoiseSchedule& sched, std::size_t lag, double eps_stab,
                        const std::vector<std::size_t>& eval_ts, const RngStream& rng) {
    if (clips.empty() || eval_ts.empty()) {
        throw std::invalid_argument("eval_drift_error: empty inputs");
    }
    std::vector<std::vector<DriftPair>> per(clips.size());
    parallel_for(clips.size(), [&](std::size_t k) {
        const VideoLatent& clip = clips[k];
        auto star_deltas = delta_tau(clip.z, lag);
        std::vector<std::vector<double>> mu_star(star_deltas.size());
        for (std::size_t i = 0; i < star_deltas.size(); ++i) {
            mu_star[i] = macro_drift(star_deltas[i]);
        }
        RngStream clip_rng = rng.substream(k);
        for (std::size_t t : eval_ts) {
            Tensor eps = Tensor::zeros(clip.z.shape);
            for (double& v : eps.data) v = clip_rng.normal();
            Tensor z_t = forward_diffuse(clip.z, t, eps, sched);
            Tensor x0 = xhat0(denoiser_forward(net, z_t, t, &clip.cond), z_t, t, sched);
            auto hat_deltas = delta_tau(x0, lag);
            for (std::size_t i = 0; i < hat_deltas.size(); ++i) {
                DriftPair p;
                p.mu_hat = macro_drift(hat_deltas[i]);
                p.mu_star = mu_star[i];
                p.frame = i;
                p.lag = lag;
                per[k].push_back(std::move(p));
            }
        }
    });
    std::vector<DriftPair> pairs;
    for (auto& v : per) {
        for (auto& p : v) pairs.push_back(std::move(p));
    }
    return drift_loss(pairs, eps_stab).value;
}

double eval_denoise_loss(const Denoiser& net, const std::vector<VideoLatent>& clips,
                         const NoiseSchedule& sched, const std::vector<std::size_t>& eval_ts,
                         const RngStream& rng) {
    if (clips.empty() || eval_ts.empty()) {
        throw std::invalid_argument("eval_denoise_loss: empty inputs");
    }
    std::vector<double> per(clips.size(), 0.0);
    parallel_for(clips.size(), [&](std::size_t k) {
        const VideoLatent& clip = clips[k];
        RngStream clip_rng = rng.substream(k);
        for (std::size_t t : eval_ts) {
            Tensor eps = Tensor::zeros(clip.z.shape);
            for (double& v : eps.data) v = clip_rng.normal();
            Tensor z_t = forward_diffuse(clip.z, t, eps, sched);
            Tensor pred = denoiser_forward(net, z_t, t, &clip.cond);
            Tensor target = model_target(clip.z, eps, t, sched);
            double s = 0.0;
            for (std::size_t i = 0; i < pred.size(); ++i) {
                double d = pred.data[i] - target.data[i];
                s += d * d;
            }
            per[k] += s / double(pred.size());
        }
    });
    double total = 0.0;
    for (double v : per) total += v;
    return total / double(clips.size() * eval_ts.size());
}

}  // namespace lamo
