#include "lamo/checks.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lamo/heatmap.hpp"
#include "lamo/motionprior.hpp"
#include "lamo/sampler.hpp"
#include "lamo/scenegen.hpp"
#include "lamo/tensor_io.hpp"

namespace fs = std::filesystem;

namespace lamo::checks {

bool close(double a, double b, double rtol, double atol) {
    return std::fabs(a - b) <= rtol * std::max(std::fabs(a), std::fabs(b)) + atol;
}

double rel_err(double a, double b) {
    double denom = std::max({std::fabs(a), std::fabs(b), 1e-12});
    return std::fabs(a - b) / denom;
}

void randomize_params(FieldNet& net, RngStream& rng, double scale) {
    for (Tensor* p : net.params()) {
        for (double& v : p->data) v = scale * rng.normal();
    }
}

void randomize_params(Denoiser& net, RngStream& rng, double scale) {
    for (Tensor* p : net.params()) {
        for (double& v : p->data) v = scale * rng.normal();
    }
}

namespace {

CheckResult pass(const std::string& name, const std::string& detail = "") {
    return {name, true, detail};
}

CheckResult fail(const std::string& name, const std::string& detail) {
    return {name, false, detail};
}

Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng, double scale = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = scale * rng.normal();
    return t;
}

SceneRanges small_ranges() {
    SceneRanges r;
    r.n_blobs_max = 2;
    return r;
}

}  // namespace

CheckResult lmt1_round_trip() {
    RngStream rng(414243);
    Tensor t = random_tensor({4, 16, 8, 8}, rng);
    std::string bytes = encode_tensor(t);
    Tensor back = decode_tensor(bytes);
    if (encode_tensor(back) != bytes) return fail("lmt1-round-trip", "bytes differ");
    std::string bad = bytes;
    bad[0] = 'X';
    try {
        decode_tensor(bad);
        return fail("lmt1-round-trip", "bad magic accepted");
    } catch (const std::runtime_error&) {
    }
    try {
        decode_tensor(bytes.substr(0, bytes.size() - 1));
        return fail("lmt1-round-trip", "truncated payload accepted");
    } catch (const std::runtime_error&) {
    }
    return pass("lmt1-round-trip");
}

CheckResult rng_reproducibility() {
    RngStream a(99, 7), b(99, 7), c(99, 8);
    bool diverged = false;
    for (int i = 0; i < 10000; ++i) {
        std::uint64_t va = a.next_u64();
        if (va != b.next_u64()) return fail("rng-reproducibility", "equal streams diverged");
        if (va != c.next_u64()) diverged = true;
    }
    if (!diverged) return fail("rng-reproducibility", "distinct stream ids collide");
    return pass("rng-reproducibility");
}

CheckResult schedule_invariants() {
    for (auto kind : {ScheduleKind::linear_beta, ScheduleKind::cosine}) {
        NoiseSchedule s = build_schedule(kind, 1000);
        if (s.abar(1) < 0.99) return fail("schedule-invariants", to_string(kind) + ": abar_1");
        if (s.abar(s.s_train) > 0.01) {
            return fail("schedule-invariants", to_string(kind) + ": abar_S");
        }
        for (std::size_t t = 1; t <= s.s_train; ++t) {
            if (std::fabs(s.sig(t) * s.sig(t) + s.abar(t) - 1.0) > 1e-15) {
                return fail("schedule-invariants", to_string(kind) + ": sigma identity");
            }
            if (t > 1 && s.abar(t) > s.abar(t - 1)) {
                return fail("schedule-invariants", to_string(kind) + ": not monotone");
            }
        }
    }
    NoiseSchedule lin = build_schedule(ScheduleKind::linear_beta, 1000);
    if (std::fabs(lin.abar(1) - (1.0 - 1e-4)) > 1e-15) {
        return fail("schedule-invariants", "linear-beta abar_1 != 1-1e-4");
    }
    return pass("schedule-invariants");
}

CheckResult xhat0_round_trip() {
    RngStream rng(52);
    for (auto param : {Parameterization::epsilon, Parameterization::v}) {
        NoiseSchedule s = build_schedule(ScheduleKind::linear_beta, 1000, param);
        for (std::size_t t : {std::size_t(1), std::size_t(250), std::size_t(500),
                              std::size_t(750), std::size_t(1000)}) {
            if (param == Parameterization::epsilon && s.abar(t) < 1e-6) continue;
            Tensor z0 = random_tensor({2, 3, 4}, rng);
            Tensor eps = random_tensor({2, 3, 4}, rng);
            Tensor z_t = forward_diffuse(z0, t, eps, s);
            Tensor out = eps;
            if (param == Parameterization::v) {
                double a = std::sqrt(s.abar(t)), sg = s.sig(t);
                for (std::size_t i = 0; i < out.size(); ++i) {
                    out.data[i] = a * eps.data[i] - sg * z0.data[i];
                }
            }
            Tensor rec = xhat0(out, z_t, t, s);
            for (std::size_t i = 0; i < rec.size(); ++i) {
                if (!close(rec.data[i], z0.data[i], 1e-10, 1e-10)) {
                    return fail("xhat0-round-trip", to_string(param) + " at t=" +
                                                        std::to_string(t));
                }
            }
        }
    }
    return pass("xhat0-round-trip");
}

CheckResult drift_decomposition(std::size_t n_pairs, double tol) {
    RngStream rng(1001);
    double worst = 0.0;
    for (std::size_t k = 0; k < n_pairs; ++k) {
        DriftPair p;
        p.mu_hat.resize(8);
        p.mu_star.resize(8);
        double base = std::exp(rng.uniform(-2.0, 2.0));
        double ns = 0.0;
        do {
            ns = 0.0;
            for (std::size_t c = 0; c < 8; ++c) {
                p.mu_star[c] = base * rng.uniform(-1.0, 1.0);
                ns += p.mu_star[c] * p.mu_star[c];
            }
        } while (std::sqrt(ns) < 1e-3);
        for (std::size_t c = 0; c < 8; ++c) p.mu_hat[c] = base * rng.uniform(-1.0, 1.0);
        double lhs = drift_loss({p}, 0.0).value;
        double nh = 0.0, dot = 0.0;
        for (std::size_t c = 0; c < 8; ++c) {
            nh += p.mu_hat[c] * p.mu_hat[c];
            dot += p.mu_hat[c] * p.mu_star[c];
        }
        nh = std::sqrt(nh);
        double nstar = std::sqrt(ns);
        double r = nh / nstar;
        double cosv = nh < 1e-300 ? 0.0 : dot / (nh * nstar);
        double rhs = (r - 1.0) * (r - 1.0) + 2.0 * r * (1.0 - cosv);
        worst = std::max(worst, std::fabs(lhs - rhs));
    }
    std::ostringstream os;
    os << "max deviation " << worst << " over " << n_pairs << " pairs";
    return worst < tol ? pass("drift-decomposition", os.str())
                       : fail("drift-decomposition", os.str());
}

CheckResult drift_stop_gradient() {
    RngStream rng(2002);
    std::vector<DriftPair> pairs(4);
    for (auto& p : pairs) {
        p.mu_hat.resize(5);
        p.mu_star.resize(5);
        for (std::size_t c = 0; c < 5; ++c) {
            p.mu_hat[c] = rng.uniform(-1.0, 1.0);
            p.mu_star[c] = rng.uniform(-1.0, 1.0) + 0.5;
        }
    }
    const double eps_stab = 1e-8, h = 1e-6;
    DriftLossResult res = drift_loss(pairs, eps_stab);
    // mu_hat gradient must match finite differences of the value
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        for (std::size_t c = 0; c < 5; ++c) {
            auto perturbed = pairs;
            perturbed[k].mu_hat[c] += h;
            double up = drift_loss(perturbed, eps_stab).value;
            perturbed[k].mu_hat[c] -= 2 * h;
            double dn = drift_loss(perturbed, eps_stab).value;
            double fd = (up - dn) / (2 * h);
            if (rel_err(fd, res.mu_hat_grads[k][c]) > 1e-6) {
                return fail("drift-stop-gradient", "mu_hat gradient mismatch");
            }
        }
    }
    // the held-out denominator means the implementation's mu_star gradient
    // must NOT equal the finite-difference (fully differentiated) one
    double max_gap = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        for (std::size_t c = 0; c < 5; ++c) {
            auto perturbed = pairs;
            perturbed[k].mu_star[c] += h;
            double up = drift_loss(perturbed, eps_stab).value;
            perturbed[k].mu_star[c] -= 2 * h;
            double dn = drift_loss(perturbed, eps_stab).value;
            double fd = (up - dn) / (2 * h);
            max_gap = std::max(max_gap, std::fabs(fd - res.mu_star_grads[k][c]));
        }
    }
    if (max_gap < 1e-6) {
        return fail("drift-stop-gradient", "denominator appears differentiated");
    }
    return pass("drift-stop-gradient");
}

CheckResult drift_quiet_clip() {
    for (double s : {1e-2, 1e-4, 1e-6, 1e-8, 1e-12, 0.0}) {
        DriftPair p;
        p.mu_hat.assign(4, s);
        p.mu_star.assign(4, s);
        DriftLossResult res = drift_loss({p}, 1e-8);
        if (!std::isfinite(res.value) || res.value > 1e-12) {
            return fail("drift-quiet-clip", "loss not finite/zero at scale " +
                                                std::to_string(s));
        }
        for (double g : res.mu_hat_grads[0]) {
            if (!std::isfinite(g) || std::fabs(g) > 1e-12) {
                return fail("drift-quiet-clip", "gradient blow-up at scale " +
                                                    std::to_string(s));
            }
        }
    }
    return pass("drift-quiet-clip");
}

CheckResult drift_scale_invariance() {
    RngStream rng(3003);
    for (int k = 0; k < 200; ++k) {
        DriftPair p;
        p.mu_hat.resize(6);
        p.mu_star.resize(6);
        for (std::size_t c = 0; c < 6; ++c) {
            p.mu_hat[c] = rng.uniform(-1.0, 1.0);
            p.mu_star[c] = rng.uniform(-1.0, 1.0) + 0.3;
        }
        double base = drift_loss({p}, 0.0).value;
        double s = std::exp(rng.uniform(-3.0, 3.0));
        DriftPair q = p;
        for (std::size_t c = 0; c < 6; ++c) {
            q.mu_hat[c] *= s;
            q.mu_star[c] *= s;
        }
        double scaled = drift_loss({q}, 0.0).value;
        if (rel_err(base, scaled) > 1e-9) {
            return fail("drift-scale-invariance", "loss changed under joint scaling");
        }
    }
    return pass("drift-scale-invariance");
}

CheckResult scene_oracle(std::size_t n_configs, double tol) {
    RngStream rng(4004);
    double worst = 0.0;
    for (std::size_t k = 0; k < n_configs; ++k) {
        RngStream sub = rng.substream(k);
        SceneConfig cfg = draw_scene(small_ranges(), sub);
        VideoLatent clip = render_scene(cfg);
        for (std::size_t lag : {std::size_t(1), std::size_t(2)}) {
            auto deltas = delta_tau(clip.z, lag);
            for (std::size_t i = 0; i < deltas.size(); ++i) {
                worst = std::max(worst, max_abs_diff(deltas[i], true_motion(cfg, i, lag)));
            }
        }
        for (std::size_t b = 0; b < cfg.n_blobs; ++b) {
            for (std::size_t f = 0; f < cfg.t_frames; ++f) {
                auto [py, px] = blob_position(cfg, b, f);
                if (py < 0 || py > double(cfg.height - 1) || px < 0 ||
                    px > double(cfg.width - 1)) {
                    return fail("scene-oracle", "reflected position out of bounds");
                }
            }
        }
    }
    std::ostringstream os;
    os << "max |delta_tau - true_motion| = " << worst << " over " << n_configs << " configs";
    return worst < tol ? pass("scene-oracle", os.str()) : fail("scene-oracle", os.str());
}

CheckResult macro_drift_oracle() {
    RngStream rng(5005);
    for (int k = 0; k < 20; ++k) {
        Tensor d = random_tensor({8, 16, 16}, rng);
        auto mu = macro_drift(d);
        for (std::size_t c = 0; c < 8; ++c) {
            double s = 0.0;
            for (std::size_t h = 0; h < 16; ++h) {
                for (std::size_t w = 0; w < 16; ++w) s += d.data[(c * 16 + h) * 16 + w];
            }
            if (std::fabs(mu[c] - s / 256.0) > 1e-14) {
                return fail("macro-drift-oracle", "spatial mean mismatch");
            }
        }
    }
    return pass("macro-drift-oracle");
}

CheckResult fieldnet_zero_init() {
    RngStream rng(6006);
    FieldNet net = init_fieldnet({8, kCondDim, 4, 64}, rng);
    RngStream data_rng(6007);
    for (int k = 0; k < 5; ++k) {
        Tensor frame = random_tensor({8, 16, 16}, data_rng);
        Conditioning c(kCondDim, 0.0);
        for (double& v : c) v = data_rng.normal();
        Tensor out = fieldnet_forward(net, frame, &c);
        Tensor out_null = fieldnet_forward(net, frame, nullptr);
        Tensor cot = random_tensor({8, 16, 16}, data_rng);
        Tensor vjp = fieldnet_vjp_input(net, frame, &c, cot);
        for (double v : out.data) {
            if (v != 0.0) return fail("fieldnet-zero-init", "nonzero output");
        }
        for (double v : out_null.data) {
            if (v != 0.0) return fail("fieldnet-zero-init", "nonzero null-cond output");
        }
        for (double v : vjp.data) {
            if (v != 0.0) return fail("fieldnet-zero-init", "nonzero input-Jacobian");
        }
    }
    return pass("fieldnet-zero-init");
}

namespace {

struct MiniFieldBatch {
    FieldNet net;
    std::vector<FieldSample> batch;
};

MiniFieldBatch mini_field_case(std::uint64_t seed) {
    RngStream rng(seed);
    FieldNet net = init_fieldnet({3, kCondDim, 1, 8}, rng);
    randomize_params(net, rng);
    MiniFieldBatch out{std::move(net), {}};
    for (int k = 0; k < 2; ++k) {
        FieldSample s;
        s.frame = random_tensor({3, 6, 6}, rng);
        s.target = random_tensor({3, 6, 6}, rng);
        s.cond.assign(kCondDim, 0.0);
        for (double& v : s.cond) v = rng.normal();
        s.use_null = k == 1;
        out.batch.push_back(std::move(s));
    }
    return out;
}

double field_batch_loss(const FieldNet& net, const std::vector<FieldSample>& batch,
                        double alpha) {
    double s = 0.0;
    for (const auto& sm : batch) {
        Tensor pred = fieldnet_forward(net, sm.frame, sm.use_null ? nullptr : &sm.cond);
        s += fieldnet_loss(pred, sm.target, alpha);
    }
    return s / double(batch.size());
}

}  // namespace

CheckResult fieldnet_param_fd(std::size_t probes) {
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t probe = 0; probe < probes; ++probe) {
        MiniFieldBatch c = mini_field_case(7000 + probe);
        FieldGrads g = fieldnet_grads(c.net, c.batch, 0.5);
        auto params = c.net.params();
        for (std::size_t j = 0; j < params.size(); ++j) {
            for (std::size_t i = 0; i < params[j]->size(); ++i) {
                double keep = params[j]->data[i];
                params[j]->data[i] = keep + h;
                double up = field_batch_loss(c.net, c.batch, 0.5);
                params[j]->data[i] = keep - h;
                double dn = field_batch_loss(c.net, c.batch, 0.5);
                params[j]->data[i] = keep;
                double fd = (up - dn) / (2 * h);
                double err = std::fabs(fd - g.grads[j].data[i]) /
                             std::max({std::fabs(fd), std::fabs(g.grads[j].data[i]), 1e-3});
                worst = std::max(worst, err);
            }
        }
    }
    std::ostringstream os;
    os << "max rel err " << worst << " over " << probes << " probes";
    return worst < 1e-5 ? pass("fieldnet-param-fd", os.str())
                        : fail("fieldnet-param-fd", os.str());
}

CheckResult fieldnet_vjp_fd(std::size_t probes) {
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t probe = 0; probe < probes; ++probe) {
        MiniFieldBatch c = mini_field_case(7100 + probe);
        RngStream rng(7200 + probe);
        const FieldSample& s = c.batch[0];
        Tensor u = random_tensor(s.frame.shape, rng);  // cotangent
        Tensor v = random_tensor(s.frame.shape, rng);  // direction
        Tensor vjp = fieldnet_vjp_input(c.net, s.frame, &s.cond, u);
        Tensor plus = add_scaled(s.frame, v, h);
        Tensor minus = add_scaled(s.frame, v, -h);
        Tensor fp = fieldnet_forward(c.net, plus, &s.cond);
        Tensor fm = fieldnet_forward(c.net, minus, &s.cond);
        double fd = 0.0;
        for (std::size_t i = 0; i < fp.size(); ++i) {
            fd += (fp.data[i] - fm.data[i]) / (2 * h) * u.data[i];
        }
        double an = dot_flat(vjp, v);
        worst = std::max(worst, std::fabs(fd - an) /
                                    std::max({std::fabs(fd), std::fabs(an), 1e-3}));
    }
    std::ostringstream os;
    os << "max rel err " << worst << " over " << probes << " probes";
    return worst < 1e-5 ? pass("fieldnet-vjp-fd", os.str()) : fail("fieldnet-vjp-fd", os.str());
}

CheckResult denoiser_param_fd(std::size_t probes, std::size_t max_coords) {
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t probe = 0; probe < probes; ++probe) {
        RngStream rng(7300 + probe);
        DenoiserConfig cfg;
        cfg.channels = 3;
        cfg.width = 8;
        cfg.spatial_blocks = 2;
        cfg.temporal_mixes = 1;
        cfg.emb_dim = 8;
        Denoiser net = init_denoiser(cfg, rng);
        randomize_params(net, rng);
        Tensor z_t = random_tensor({4, 3, 5, 5}, rng);
        Tensor target = random_tensor({4, 3, 5, 5}, rng);
        Conditioning c(kCondDim, 0.0);
        for (double& v : c) v = rng.normal();
        const Conditioning* cond = probe % 2 == 0 ? &c : nullptr;
        const std::size_t t = 1 + (probe * 97) % 1000;
        auto grads = denoiser_grads(net, z_t, t, cond, target);
        auto params = net.params();
        auto loss_of = [&] {
            Tensor pred = denoiser_forward(net, z_t, t, cond);
            double s = 0.0;
            for (std::size_t i = 0; i < pred.size(); ++i) {
                double d = pred.data[i] - target.data[i];
                s += d * d;
            }
            return s / double(pred.size());
        };
        std::size_t total = 0;
        for (const Tensor* p : params) total += p->size();
        RngStream pick(8800 + probe);
        std::size_t budget = max_coords == 0 ? total : max_coords;
        for (std::size_t q = 0; q < budget; ++q) {
            std::size_t flat = max_coords == 0 ? q : pick.next_below(total);
            std::size_t j = 0, i = flat;
            while (i >= params[j]->size()) i -= params[j++]->size();
            double keep = params[j]->data[i];
            params[j]->data[i] = keep + h;
            double up = loss_of();
            params[j]->data[i] = keep - h;
            double dn = loss_of();
            params[j]->data[i] = keep;
            double fd = (up - dn) / (2 * h);
            double err = std::fabs(fd - grads[j].data[i]) /
                         std::max({std::fabs(fd), std::fabs(grads[j].data[i]), 1e-3});
            worst = std::max(worst, err);
        }
    }
    std::ostringstream os;
    os << "max rel err " << worst << " over " << probes << " probes";
    return worst < 1e-5 ? pass("denoiser-param-fd", os.str())
                        : fail("denoiser-param-fd", os.str());
}

CheckResult guidance_fd(std::size_t probes, std::size_t max_coords) {
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t probe = 0; probe < probes; ++probe) {
        RngStream rng(7400 + probe);
        FieldNet net = init_fieldnet({3, kCondDim, 1, 8}, rng);
        randomize_params(net, rng);
        NoiseSchedule sched = build_schedule(
            ScheduleKind::linear_beta, 1000,
            probe % 2 == 0 ? Parameterization::epsilon : Parameterization::v);
        Conditioning c(kCondDim, 0.0);
        for (double& v : c) v = rng.normal();
        Tensor z_t = random_tensor({4, 3, 5, 5}, rng);
        Tensor model_out = random_tensor({4, 3, 5, 5}, rng);
        const std::size_t t = 300 + 100 * (probe % 5);
        const std::size_t lag = 2;
        Tensor grad = guidance_gradient(model_out, z_t, t, sched, net, &c, lag);
        RngStream pick(8900 + probe);
        std::size_t budget = max_coords == 0 ? model_out.size() : max_coords;
        for (std::size_t q = 0; q < budget; ++q) {
            std::size_t i = max_coords == 0 ? q : pick.next_below(model_out.size());
            double keep = model_out.data[i];
            model_out.data[i] = keep + h;
            double up = guide_loss(xhat0(model_out, z_t, t, sched), net, &c, lag);
            model_out.data[i] = keep - h;
            double dn = guide_loss(xhat0(model_out, z_t, t, sched), net, &c, lag);
            model_out.data[i] = keep;
            double fd = (up - dn) / (2 * h);
            double err = std::fabs(fd - grad.data[i]) /
                         std::max({std::fabs(fd), std::fabs(grad.data[i]), 1e-3});
            worst = std::max(worst, err);
        }
    }
    std::ostringstream os;
    os << "max rel err " << worst << " over " << probes << " probes";
    return worst < 1e-5 ? pass("guidance-fd", os.str()) : fail("guidance-fd", os.str());
}

CheckResult prefactor_ratio(double tol) {
    RngStream rng(7500);
    FieldNet net = init_fieldnet({3, kCondDim, 1, 8}, rng);
    randomize_params(net, rng);
    Conditioning c(kCondDim, 0.0);
    for (double& v : c) v = rng.normal();
    Tensor x0 = random_tensor({4, 3, 5, 5}, rng, 0.5);
    Tensor eps = random_tensor({4, 3, 5, 5}, rng);
    const std::size_t t1 = 300, t2 = 700;
    for (auto param : {Parameterization::epsilon, Parameterization::v}) {
        NoiseSchedule sched = build_schedule(ScheduleKind::linear_beta, 1000, param);
        double norms[2], expected;
        for (int j = 0; j < 2; ++j) {
            std::size_t t = j == 0 ? t1 : t2;
            Tensor z_t = Tensor::zeros(x0.shape);
            Tensor out = Tensor::zeros(x0.shape);
            double a = std::sqrt(sched.abar(t)), sg = sched.sig(t);
            for (std::size_t i = 0; i < x0.size(); ++i) {
                z_t.data[i] = a * x0.data[i] + sg * eps.data[i];
                out.data[i] = param == Parameterization::epsilon
                                  ? eps.data[i]
                                  : a * eps.data[i] - sg * x0.data[i];
            }
            norms[j] = norm_flat(guidance_gradient(out, z_t, t, sched, net, &c, 2));
        }
        if (param == Parameterization::epsilon) {
            expected = (sched.sig(t1) / std::sqrt(sched.abar(t1))) /
                       (sched.sig(t2) / std::sqrt(sched.abar(t2)));
        } else {
            expected = sched.sig(t1) / sched.sig(t2);
        }
        if (rel_err(norms[0] / norms[1], expected) > tol) {
            return fail("prefactor-ratio", to_string(param) + " ratio off: " +
                                               std::to_string(norms[0] / norms[1]) + " vs " +
                                               std::to_string(expected));
        }
    }
    return pass("prefactor-ratio");
}

CheckResult gate_algebra() {
    for (std::size_t S : {std::size_t(1), std::size_t(2), std::size_t(3), std::size_t(10),
                          std::size_t(50)}) {
        for (double rho : {0.0, 0.25, 0.5, 0.8, 1.0}) {
            std::size_t boundary = std::size_t(std::ceil((1.0 - rho) * double(S)));
            for (std::size_t s = 0; s < S; ++s) {
                if (gate_active(s, S, rho) != (s >= boundary)) {
                    return fail("gate-algebra", "mismatch at S=" + std::to_string(S) +
                                                    " rho=" + std::to_string(rho));
                }
            }
            if (rho == 0.0) {
                for (std::size_t s = 0; s < S; ++s) {
                    if (gate_active(s, S, rho)) return fail("gate-algebra", "rho=0 fired");
                }
            }
            if (rho == 1.0 && !gate_active(0, S, rho)) {
                return fail("gate-algebra", "rho=1 must fire everywhere");
            }
        }
    }
    if (gate_active(9, 50, 0.8) || !gate_active(10, 50, 0.8)) {
        return fail("gate-algebra", "S=50 rho=0.8 must first fire at s=10");
    }
    return pass("gate-algebra");
}

CheckResult heatmap_nulls() {
    RngStream rng(7600);
    SceneRanges ranges = small_ranges();
    RngStream sub = rng.substream(1);
    SceneConfig cfg = draw_scene(ranges, sub);
    for (std::size_t b = 0; b < cfg.n_blobs; ++b) {
        cfg.vel_y[b] = 0.0;
        cfg.vel_x[b] = 0.0;
    }
    VideoLatent still = render_scene(cfg);
    FieldNet net = init_fieldnet({cfg.channels, kCondDim, 2, 16}, rng);
    randomize_params(net, rng);
    HeatmapResult rd = drift_heatmap(still.z, 2);
    HeatmapResult rf = field_heatmap(still.z, net, &still.cond, 2);
    if (rd.t_star != 0) return fail("heatmap-nulls", "static tie rule broke");
    for (double v : rd.r.data) {
        if (v != 0.0) return fail("heatmap-nulls", "static drift heatmap nonzero");
    }
    for (double v : rf.r.data) {
        if (std::fabs(v) > 1e-12) return fail("heatmap-nulls", "static field heatmap nonzero");
    }
    // homogeneity of the drift heatmap at eps = 0
    RngStream sub2 = rng.substream(2);
    SceneConfig moving = draw_scene(ranges, sub2);
    VideoLatent clip = render_scene(moving);
    HeatmapResult base = drift_heatmap(clip.z, 2, 0.0);
    HeatmapResult scaled = drift_heatmap(scale(clip.z, 3.0), 2, 0.0);
    for (std::size_t i = 0; i < base.r.size(); ++i) {
        if (!close(scaled.r.data[i], 3.0 * base.r.data[i], 1e-9)) {
            return fail("heatmap-nulls", "drift heatmap not homogeneous");
        }
    }
    // spatially-uniform offsets cancel in every delta
    Tensor shifted = clip.z;
    for (double& v : shifted.data) v += 2.75;
    HeatmapResult off = drift_heatmap(shifted, 2, 0.0);
    if (off.t_star != base.t_star || max_abs_diff(off.r, base.r) > 1e-9) {
        return fail("heatmap-nulls", "uniform offset changed the drift heatmap");
    }
    return pass("heatmap-nulls");
}

CheckResult dataset_integrity(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.txt");
    if (!mf) return fail("dataset-integrity", "no manifest in " + dir);
    std::string key, value;
    std::size_t checked = 0;
    while (mf >> key >> value) {
        if (key != "clip") continue;
        std::string path = (fs::path(dir) / (value + ".lmt")).string();
        std::ifstream f(path, std::ios::binary);
        if (!f) return fail("dataset-integrity", "missing " + path);
        std::string bytes((std::istreambuf_iterator<char>(f)),
                          std::istreambuf_iterator<char>());
        try {
            Tensor t = decode_tensor(bytes, path);
            if (encode_tensor(t) != bytes) {
                return fail("dataset-integrity", path + ": round-trip bytes differ");
            }
        } catch (const std::exception& e) {
            return fail("dataset-integrity", e.what());
        }
        ++checked;
    }
    return pass("dataset-integrity", std::to_string(checked) + " clips verified");
}

std::vector<CheckResult> structural_suite(std::size_t probes) {
    std::vector<CheckResult> out;
    out.push_back(lmt1_round_trip());
    out.push_back(rng_reproducibility());
    out.push_back(schedule_invariants());
    out.push_back(xhat0_round_trip());
    out.push_back(drift_decomposition(10000));
    out.push_back(drift_stop_gradient());
    out.push_back(drift_quiet_clip());
    out.push_back(drift_scale_invariance());
    out.push_back(scene_oracle(100));
    out.push_back(macro_drift_oracle());
    out.push_back(fieldnet_zero_init());
    out.push_back(fieldnet_param_fd(probes));
    out.push_back(fieldnet_vjp_fd(probes * 5));
    out.push_back(denoiser_param_fd(probes));
    out.push_back(guidance_fd(probes));
    out.push_back(prefactor_ratio());
    out.push_back(gate_algebra());
    out.push_back(heatmap_nulls());
    return out;
}

}  // namespace lamo::checks
