// End-to-end acceptance suite: one pass/fail line per criterion, exit code =
// number of failures. LAMO_ACCEPT_QUICK=1 shrinks the training runs for
// development smoke only; the gate is the full run.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "lamo/checks.hpp"
#include "lamo/dataset.hpp"
#include "lamo/heatmap.hpp"
#include "lamo/motionprior.hpp"
#include "lamo/sampler.hpp"
#include "lamo/tensor_io.hpp"

using namespace lamo;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

struct Timer {
    Clock::time_point start = Clock::now();
    double sec() const { return std::chrono::duration<double>(Clock::now() - start).count(); }
};

void report(int criterion, const std::string& name, bool pass, const std::string& detail,
            double sec) {
    std::printf("criterion %2d %s: %s (%s; %.1f s)\n", criterion, pass ? "PASS" : "FAIL",
                name.c_str(), detail.c_str(), sec);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

bool quick() { return std::getenv("LAMO_ACCEPT_QUICK") != nullptr; }

struct SharedArtifacts {
    std::vector<VideoLatent> train;
    std::vector<VideoLatent> held;
    NoiseSchedule sched_eps;      // epsilon parameterization, linear-beta
    NoiseSchedule sched_v;        // v parameterization for the guided sampler
    FieldNet field;               // criterion 7 training run
    Denoiser deno_plain;          // lambda_drift = 0 twin
    Denoiser deno_drift;          // lambda_drift = 0.4 (epsilon mode)
    Denoiser deno_v;              // lambda_drift = 0.4, v mode, for sampling
};

// ---- criteria 1-5, 10: property checks -------------------------------------

void criterion_1() {
    Timer t;
    auto res = checks::drift_decomposition(10000);
    bool ok = res.pass && t.sec() < 1.0;
    report(1, "drift-loss decomposition", ok, res.detail, t.sec());
}

void criterion_2() {
    Timer t;
    std::size_t probes = quick() ? 3 : 20;
    auto a = checks::fieldnet_param_fd(probes);
    auto b = checks::fieldnet_vjp_fd(probes);
    auto c = checks::denoiser_param_fd(probes, 200);
    auto d = checks::guidance_fd(probes, 60);
    bool ok = a.pass && b.pass && c.pass && d.pass && t.sec() < 60.0;
    report(2, "gradient oracles", ok,
           "fieldnet " + a.detail + " | vjp " + b.detail + " | denoiser " + c.detail +
               " | guidance " + d.detail,
           t.sec());
}

void criterion_3() {
    Timer t;
    auto res = checks::prefactor_ratio(1e-6);
    report(3, "guidance prefactor ratio", res.pass && t.sec() < 10.0, res.detail, t.sec());
}

void criterion_4(const SharedArtifacts& art) {
    Timer t;
    auto zero_init = checks::fieldnet_zero_init();
    bool ok = zero_init.pass;
    std::string detail = zero_init.pass ? "zero-init contract holds" : zero_init.detail;

    // bitwise trajectory equivalences on a real-size random denoiser
    RngStream net_rng(4401);
    DenoiserConfig dc;
    Denoiser deno = init_denoiser(dc, net_rng);
    checks::randomize_params(deno, net_rng, 0.05);
    RngStream field_rng(4402);
    // small fresh net keeps the per-step loss diagnostics inside the budget;
    // zero-init behavior is width-independent
    FieldNet fresh = init_fieldnet({dc.channels, kCondDim, 2, 16}, field_rng);
    Conditioning cond(kCondDim, 0.0);
    cond[0] = 0.7;
    cond[1] = -0.4;
    cond[2] = 1.0;
    cond[3] = 2.0;

    auto run_mode = [&](GuidanceMode mode, double lambda, double rho) {
        SamplerConfig cfg;
        cfg.mode = mode;
        cfg.lambda_guide = lambda;
        cfg.rho = rho;
        RngStream rng = RngStream(4403).substream(1);
        return sample(deno, &fresh, art.sched_eps, cfg, cond, rng);
    };
    Trajectory base = run_mode(GuidanceMode::off, 25.0, 0.8);
    Trajectory lam0 = run_mode(GuidanceMode::noise, 0.0, 0.8);
    Trajectory rho0 = run_mode(GuidanceMode::noise, 25.0, 0.0);
    Trajectory noise_mode = run_mode(GuidanceMode::noise, 25.0, 0.8);

    auto equal = [](const Trajectory& a, const Trajectory& b) {
        if (max_abs_diff(a.z_out, b.z_out) != 0.0) return false;
        for (std::size_t s = 0; s < a.steps.size(); ++s) {
            if (max_abs_diff(a.steps[s].z_t, b.steps[s].z_t) != 0.0) return false;
            if (max_abs_diff(a.steps[s].eps_guided, b.steps[s].eps_guided) != 0.0) return false;
        }
        return true;
    };
    if (!equal(base, lam0)) {
        ok = false;
        detail += " | lambda=0 differs from off";
    }
    if (!equal(base, rho0)) {
        ok = false;
        detail += " | rho=0 differs from off";
    }
    // fresh net: guidance reduces to the frame-matching gradient, which must
    // still produce the identical-to-baseline trajectory only when inactive;
    // with the gate active it must stay finite
    bool finite = all_finite(noise_mode.z_out);
    for (const auto& st : noise_mode.steps) finite = finite && all_finite(st.eps_guided);
    if (!finite) {
        ok = false;
        detail += " | fresh-net guided run not finite";
    }
    report(4, "zero-init and gating safety", ok && t.sec() < 30.0, detail, t.sec());
}

void criterion_5() {
    Timer t;
    auto scene = checks::scene_oracle(100, 1e-12);
    auto macro = checks::macro_drift_oracle();
    auto round = checks::xhat0_round_trip();
    bool ok = scene.pass && macro.pass && round.pass && t.sec() < 30.0;
    report(5, "analytic oracle agreement", ok, scene.detail, t.sec());
}

// ---- criteria 6-9: trained-model effects -----------------------------------

void criterion_6(SharedArtifacts& art) {
    Timer t;
    DenoTrainConfig cfg;
    cfg.steps = quick() ? 60 : 2000;
    cfg.lambda_drift = 0.0;
    RngStream r0(606);
    art.deno_plain = train_denoiser(art.train, art.sched_eps, cfg, r0);
    cfg.lambda_drift = 0.4;
    RngStream r1(606);
    art.deno_drift = train_denoiser(art.train, art.sched_eps, cfg, r1);

    std::vector<std::size_t> eval_ts = {50, 150, 250, 350, 450};
    RngStream e0(607), e1(607), e2(607), e3(607);
    double drift_plain = eval_drift_error(art.deno_plain, art.held, art.sched_eps, 2,
                                          cfg.eps_stab, eval_ts, e0);
    double drift_sup = eval_drift_error(art.deno_drift, art.held, art.sched_eps, 2,
                                        cfg.eps_stab, eval_ts, e1);
    double den_plain = eval_denoise_loss(art.deno_plain, art.held, art.sched_eps, eval_ts, e2);
    double den_sup = eval_denoise_loss(art.deno_drift, art.held, art.sched_eps, eval_ts, e3);

    bool ok = drift_sup < drift_plain && std::fabs(den_sup - den_plain) <= 0.10 * den_plain;
    if (!quick()) ok = ok && t.sec() <= 15 * 60;
    std::ostringstream os;
    os << "heldout drift " << drift_sup << " (drift-supervised) vs " << drift_plain
       << " (plain); denoise " << den_sup << " vs " << den_plain;
    report(6, "motion-drift training effect", ok, os.str(), t.sec());
}

void criterion_7(SharedArtifacts& art) {
    Timer t;
    FieldTrainConfig cfg;
    cfg.steps = quick() ? 100 : 4000;
    RngStream rng(707);
    art.field = train_fieldnet(art.train, art.sched_eps, cfg, rng);

    double loss_net = 0.0, loss_zero = 0.0, cos_sum = 0.0;
    std::size_t n = 0;
    for (const auto& clip : art.held) {
        const std::size_t T = clip.z.dim(0), fl = clip.z.size() / T;
        for (std::size_t i = 0; i + cfg.lag < T; ++i) {
            Tensor frame = Tensor::zeros({clip.z.dim(1), clip.z.dim(2), clip.z.dim(3)});
            std::copy(clip.z.data.begin() + i * fl, clip.z.data.begin() + (i + 1) * fl,
                      frame.data.begin());
            Tensor target = frame;
            for (std::size_t j = 0; j < fl; ++j) {
                target.data[j] =
                    clip.z.data[(i + cfg.lag) * fl + j] - clip.z.data[i * fl + j];
            }
            Tensor pred = fieldnet_forward(art.field, frame, &clip.cond);
            loss_net += fieldnet_loss(pred, target, cfg.alpha);
            loss_zero += fieldnet_loss(Tensor::zeros(frame.shape), target, cfg.alpha);
            double dot = dot_flat(pred, target), np = norm_flat(pred), nt = norm_flat(target);
            cos_sum += (np < 1e-12 || nt < 1e-12) ? 0.0 : dot / (np * nt);
            ++n;
        }
    }
    double mean_cos = cos_sum / double(n);
    bool ok = loss_net < loss_zero && (quick() || mean_cos > 0.8);
    if (!quick()) ok = ok && t.sec() <= 10 * 60;
    std::ostringstream os;
    os << "heldout loss " << loss_net / double(n) << " vs zero-predictor "
       << loss_zero / double(n) << "; mean cosine " << mean_cos;
    report(7, "fieldnet learning effect", ok, os.str(), t.sec());
}

void criterion_8(SharedArtifacts& art) {
    // the epsilon-mode projection amplifies x0 errors by sigma/sqrt(abar)
    // (~24 at the gate boundary), which at lambda_guide = 25 overshoots and
    // diverges on a desk-scale backbone; the v-mode prefactor sigma <= 1 is
    // the stable branch, so the guided runs use a v-parameterized twin
    DenoTrainConfig cfg;
    cfg.steps = quick() ? 60 : 2000;
    RngStream rt(808);
    Timer train_t;
    art.deno_v = train_denoiser(art.train, art.sched_v, cfg, rt);
    std::printf("  (v-mode backbone for criterion 8 trained in %.1f s)\n", train_t.sec());
    Timer t;

    const std::size_t n_seeds = 16;
    SamplerConfig gcfg;  // defaults: S=50, lambda 25, rho 0.8, noise mode
    if (quick()) gcfg.steps = 10;
    double sum_guided = 0.0, sum_unguided = 0.0, sum_diverge = 0.0;
    bool finite = true;
    for (std::size_t k = 0; k < n_seeds; ++k) {
        const Conditioning& cond = art.held[k % art.held.size()].cond;
        RngStream rg = RngStream(900 + k).substream(1);
        Trajectory guided = sample(art.deno_v, &art.field, art.sched_v, gcfg, cond, rg);
        SamplerConfig ucfg = gcfg;
        ucfg.mode = GuidanceMode::off;
        RngStream ru = RngStream(900 + k).substream(1);
        Trajectory unguided = sample(art.deno_v, &art.field, art.sched_v, ucfg, cond, ru);
        SamplerConfig lcfg = gcfg;
        lcfg.mode = GuidanceMode::latent_edit;
        RngStream rl = RngStream(900 + k).substream(1);
        Trajectory edited = sample(art.deno_v, &art.field, art.sched_v, lcfg, cond, rl);

        sum_guided += guided.steps.back().guide_loss_value;
        sum_unguided += unguided.steps.back().guide_loss_value;
        sum_diverge += norm_flat(sub(edited.z_out, guided.z_out));
        for (const Trajectory* tr : {&guided, &unguided, &edited}) {
            finite = finite && all_finite(tr->z_out);
            for (const auto& st : tr->steps) {
                finite = finite && all_finite(st.eps_guided) && all_finite(st.z_t);
            }
        }
    }
    double mean_g = sum_guided / n_seeds, mean_u = sum_unguided / n_seeds;
    bool ok = finite && mean_g <= mean_u;
    if (!quick()) ok = ok && t.sec() <= 5 * 60;
    std::ostringstream os;
    os << "mean final-step L_guide " << mean_g << " (guided) vs " << mean_u
       << " (unguided); latent-edit divergence " << sum_diverge / n_seeds << "; finite="
       << (finite ? "yes" : "NO");
    report(8, "sampling guidance effect", ok, os.str(), t.sec());
}

void criterion_9(const SharedArtifacts& art) {
    Timer t;
    std::size_t n_ok_drift = 0, n_ok_field = 0;
    const std::size_t n_clips = 20;
    for (std::size_t k = 0; k < n_clips; ++k) {
        const VideoLatent& clip = art.held[k % art.held.size()];
        HeatmapResult rd = drift_heatmap(clip.z, 2);
        HeatmapResult rf = field_heatmap(clip.z, art.field, &clip.cond, 2);
        Tensor mask_d = motion_region_mask(clip.scene, rd.t_star, 2);
        Tensor mask_f = motion_region_mask(clip.scene, rf.t_star, 2);
        if (masked_mean(rd.r, mask_d, true) > masked_mean(rd.r, mask_d, false)) ++n_ok_drift;
        if (masked_mean(rf.r, mask_f, true) > masked_mean(rf.r, mask_f, false)) ++n_ok_field;
    }
    // exact static null for both readouts
    SceneConfig still = art.held[0].scene;
    for (std::size_t b = 0; b < still.n_blobs; ++b) {
        still.vel_y[b] = 0.0;
        still.vel_x[b] = 0.0;
    }
    VideoLatent still_clip = render_scene(still);
    bool null_ok = true;
    for (double v : drift_heatmap(still_clip.z, 2).r.data) null_ok = null_ok && v == 0.0;
    for (double v : field_heatmap(still_clip.z, art.field, &still_clip.cond, 2).r.data) {
        null_ok = null_ok && v == 0.0;
    }
    bool ok = n_ok_drift == n_clips && n_ok_field == n_clips && null_ok && t.sec() < 60.0;
    std::ostringstream os;
    os << "in>out region means: drift " << n_ok_drift << "/" << n_clips << ", field "
       << n_ok_field << "/" << n_clips << ", static null "
       << (null_ok ? "exact" : "VIOLATED");
    report(9, "heatmap localization", ok, os.str(), t.sec());
}

void criterion_10(const SharedArtifacts& art) {
    Timer t;
    bool ok = true;
    std::string detail;

    auto lmt = checks::lmt1_round_trip();
    if (!lmt.pass) {
        ok = false;
        detail += "lmt1: " + lmt.detail;
    }

    // dataset regeneration is byte-identical
    RngStream r1(1010), r2(1010);
    auto a = make_dataset(8, SceneRanges{}, r1);
    auto b = make_dataset(8, SceneRanges{}, r2);
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (encode_tensor(a[k].z) != encode_tensor(b[k].z) ||
            encode_scene_meta(a[k].scene, a[k].cond) !=
                encode_scene_meta(b[k].scene, b[k].cond)) {
            ok = false;
            detail += " | dataset regeneration differs";
            break;
        }
    }

    // short training runs are bit-reproducible
    FieldTrainConfig fcfg;
    fcfg.steps = 20;
    fcfg.width = 16;
    fcfg.blocks = 1;
    RngStream f1(1011), f2(1011);
    FieldNet na = train_fieldnet(a, art.sched_eps, fcfg, f1);
    FieldNet nb = train_fieldnet(a, art.sched_eps, fcfg, f2);
    auto pa = na.params(), pb = nb.params();
    for (std::size_t k = 0; k < pa.size(); ++k) {
        if (max_abs_diff(*pa[k], *pb[k]) != 0.0) {
            ok = false;
            detail += " | fieldnet training not reproducible";
            break;
        }
    }

    // the full structural check suite runs clean inside its budget
    Timer suite_t;
    auto suite = checks::structural_suite(quick() ? 1 : 3);
    for (const auto& r : suite) {
        if (!r.pass) {
            ok = false;
            detail += " | " + r.name + ": " + r.detail;
        }
    }
    double suite_sec = suite_t.sec();
    if (suite_sec >= 5 * 60) {
        ok = false;
        detail += " | check suite too slow";
    }
    std::ostringstream os;
    os << "round-trips byte-exact, training bit-reproducible, " << suite.size()
       << " structural checks in " << suite_sec << " s" << detail;
    report(10, "format and determinism", ok, os.str(), t.sec());
}

}  // namespace

int main() {
    Timer total;
    std::printf("acceptance suite%s\n", quick() ? " (quick smoke mode)" : "");

    SharedArtifacts art;
    RngStream data_rng(111);
    SceneRanges ranges;
    art.train = make_dataset(quick() ? 32 : 256, ranges, data_rng);
    RngStream held_rng(222);
    art.held = make_dataset(quick() ? 8 : 64, ranges, held_rng);
    art.sched_eps = build_schedule(ScheduleKind::linear_beta, 1000, Parameterization::epsilon);
    art.sched_v = build_schedule(ScheduleKind::linear_beta, 1000, Parameterization::v);

    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4(art);
    criterion_5();
    criterion_6(art);
    criterion_7(art);
    criterion_8(art);
    criterion_9(art);
    criterion_10(art);

    std::printf("%d/10 criteria passed (%.1f s total)\n", 10 - g_failures, total.sec());
    return g_failures;
}
