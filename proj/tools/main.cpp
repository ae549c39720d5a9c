#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lamo/checkpoint.hpp"
#include "lamo/checks.hpp"
#include "lamo/dataset.hpp"
#include "lamo/heatmap.hpp"
#include "lamo/sampler.hpp"
#include "lamo/tensor_io.hpp"
#include "lamo/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lamo;

namespace {

// named substreams hanging off --seed, so each artifact is reproducible from
// (resolved config, seed) alone
constexpr std::uint64_t kStreamData = 1;
constexpr std::uint64_t kStreamTrain = 2;
constexpr std::uint64_t kStreamSample = 3;

json g_file_config;  // section of --config for the active subcommand

// CLI11 stores defaults before parse; file values override defaults, flags
// override the file.
void apply_config_section(CLI::App* cmd) {
    if (g_file_config.is_null()) return;
    auto it = g_file_config.find(cmd->get_name());
    if (it == g_file_config.end()) return;
    for (auto& [key, value] : it->items()) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (!opt) throw CLI::ValidationError("config key '" + key + "' is not a flag of " +
                                             cmd->get_name());
        std::string text = value.is_string() ? value.get<std::string>() : value.dump();
        opt->default_str(text);
        if (opt->empty()) {
            opt->add_result(text);
            opt->run_callback();
            opt->clear();
            opt->default_str(text);
        }
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
}

// every output directory carries the resolved config and the tool version;
// the out path itself is recorded as "." so reruns into a fresh directory
// stay byte-identical
void write_resolved_config(const fs::path& out_dir, const std::string& command, json resolved) {
    resolved["command"] = command;
    resolved["out"] = ".";
    resolved["version"] = kVersion;
    write_text(out_dir / "resolved_config.json", resolved.dump(2) + "\n");
}

Conditioning cond_from_values(double vy, double vx, double blobs, double radius) {
    Conditioning c(kCondDim, 0.0);
    c[0] = vy;
    c[1] = vx;
    c[2] = blobs;
    c[3] = radius;
    return c;
}

struct GenDataArgs {
    std::string out;
    std::size_t n = 256;
    std::uint64_t seed = 1;
    SceneRanges ranges;
};

int cmd_gen_data(const GenDataArgs& a) {
    RngStream rng = RngStream(a.seed).substream(kStreamData);
    auto clips = make_dataset(a.n, a.ranges, rng);
    fs::create_directories(a.out);
    write_dataset(clips, a.out);
    json resolved = {{"n", a.n},
                     {"seed", a.seed},
                     {"frames", a.ranges.t_frames},
                     {"channels", a.ranges.channels},
                     {"height", a.ranges.height},
                     {"width", a.ranges.width},
                     {"blobs-min", a.ranges.n_blobs_min},
                     {"blobs-max", a.ranges.n_blobs_max},
                     {"radius-min", a.ranges.radius_min},
                     {"radius-max", a.ranges.radius_max},
                     {"speed-min", a.ranges.speed_min},
                     {"speed-max", a.ranges.speed_max},
                     {"mix-min", a.ranges.mix_min},
                     {"mix-max", a.ranges.mix_max},
                     {"mix-signed", a.ranges.mix_signed}};
    write_resolved_config(a.out, "gen-data", std::move(resolved));
    std::cout << "wrote " << a.n << " clips to " << a.out << "\n";
    return 0;
}

struct TrainFieldArgs {
    std::string data, out;
    std::uint64_t seed = 1;
    FieldTrainConfig cfg;
    std::string schedule = "linear-beta";
    std::size_t s_train = 1000;
};

int cmd_train_field(const TrainFieldArgs& a) {
    auto dataset = read_dataset(a.data);
    NoiseSchedule sched = build_schedule(schedule_kind_from(a.schedule), a.s_train);
    fs::create_directories(a.out);
    std::ofstream log(fs::path(a.out) / "metrics.txt");
    RngStream rng = RngStream(a.seed).substream(kStreamTrain);
    FieldNet net = train_fieldnet(dataset, sched, a.cfg, rng, &log);
    save_fieldnet(net, a.out);
    json resolved = {{"data", a.data},       {"seed", a.seed},
                     {"steps", a.cfg.steps}, {"batch", a.cfg.batch},
                     {"lr", a.cfg.lr},       {"tau", a.cfg.lag},
                     {"alpha", a.cfg.alpha}, {"p-aug", a.cfg.p_aug},
                     {"p-drop", a.cfg.p_drop}, {"width", a.cfg.width},
                     {"blocks", a.cfg.blocks}, {"schedule", a.schedule},
                     {"s-train", a.s_train}};
    write_resolved_config(a.out, "train-field", std::move(resolved));
    std::cout << "fieldnet checkpoint in " << a.out << " (" << net.param_count()
              << " parameters)\n";
    return 0;
}

struct TrainDenoArgs {
    std::string data, out;
    std::uint64_t seed = 1;
    DenoTrainConfig cfg;
    std::string schedule = "linear-beta";
    std::string param = "epsilon";
    std::size_t s_train = 1000;
};

int cmd_train_denoiser(const TrainDenoArgs& a) {
    auto dataset = read_dataset(a.data);
    NoiseSchedule sched =
        build_schedule(schedule_kind_from(a.schedule), a.s_train, parameterization_from(a.param));
    fs::create_directories(a.out);
    std::ofstream log(fs::path(a.out) / "metrics.txt");
    RngStream rng = RngStream(a.seed).substream(kStreamTrain);
    Denoiser net = train_denoiser(dataset, sched, a.cfg, rng, &log);
    save_denoiser(net, a.out);
    json resolved = {{"data", a.data},
                     {"seed", a.seed},
                     {"steps", a.cfg.steps},
                     {"batch", a.cfg.batch},
                     {"lr", a.cfg.lr},
                     {"tau", a.cfg.lag},
                     {"lambda-drift", a.cfg.lambda_drift},
                     {"eps-stab", a.cfg.eps_stab},
                     {"p-uncond", a.cfg.p_uncond},
                     {"width", a.cfg.width},
                     {"spatial-blocks", a.cfg.spatial_blocks},
                     {"temporal-mixes", a.cfg.temporal_mixes},
                     {"schedule", a.schedule},
                     {"param", a.param},
                     {"s-train", a.s_train}};
    write_resolved_config(a.out, "train-denoiser", std::move(resolved));
    std::cout << "denoiser checkpoint in " << a.out << " (" << net.param_count()
              << " parameters)\n";
    return 0;
}

struct SampleArgs {
    std::string denoiser, fieldnet, out, cond_file;
    std::string guidance = "noise";
    std::string schedule = "linear-beta";
    std::size_t s_train = 1000;
    std::uint64_t seed = 1;
    std::size_t paired_seeds = 0;
    bool dump_trajectory = false;
    SamplerConfig cfg;
    double vy = 0.8, vx = 0.5, blobs = 1.0, radius = 2.2;
};

void dump_step(const fs::path& dir, const StepRecord& st) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "step_%03zu", st.s);
    write_tensor(st.z_t, (dir / (std::string(stem) + "_zt.lmt")).string());
    write_tensor(st.eps_cfg, (dir / (std::string(stem) + "_eps_cfg.lmt")).string());
    write_tensor(st.eps_guided, (dir / (std::string(stem) + "_eps_guided.lmt")).string());
}

int cmd_sample(const SampleArgs& a) {
    Denoiser deno = load_denoiser(a.denoiser);
    FieldNet field;
    bool have_field = !a.fieldnet.empty();
    if (have_field) field = load_fieldnet(a.fieldnet);
    SamplerConfig cfg = a.cfg;
    cfg.mode = guidance_mode_from(a.guidance);
    if (!have_field && cfg.mode != GuidanceMode::off) {
        throw std::invalid_argument("sample: --fieldnet required unless --guidance off");
    }
    NoiseSchedule sched = build_schedule(schedule_kind_from(a.schedule), a.s_train,
                                         deno.cfg.param);
    Conditioning cond;
    if (!a.cond_file.empty()) {
        std::ifstream meta(a.cond_file);
        if (!meta) throw std::runtime_error("cannot read " + a.cond_file);
        std::string text((std::istreambuf_iterator<char>(meta)),
                         std::istreambuf_iterator<char>());
        SceneConfig scene;
        decode_scene_meta(text, scene, cond);
    } else {
        cond = cond_from_values(a.vy, a.vx, a.blobs, a.radius);
    }

    fs::create_directories(a.out);
    const FieldNet* fptr = have_field ? &field : nullptr;

    if (a.paired_seeds > 0) {
        // paired guided/unguided comparison table over consecutive seeds
        std::ostringstream table;
        table << "seed guided_final_Lguide unguided_final_Lguide\n";
        double sum_g = 0.0, sum_u = 0.0;
        for (std::size_t k = 0; k < a.paired_seeds; ++k) {
            RngStream rg = RngStream(a.seed + k).substream(kStreamSample);
            Trajectory guided = sample(deno, fptr, sched, cfg, cond, rg);
            SamplerConfig off_cfg = cfg;
            off_cfg.mode = GuidanceMode::off;
            RngStream ru = RngStream(a.seed + k).substream(kStreamSample);
            Trajectory unguided = sample(deno, fptr, sched, off_cfg, cond, ru);
            double lg = guided.steps.back().guide_loss_value;
            double lu = unguided.steps.back().guide_loss_value;
            sum_g += lg;
            sum_u += lu;
            table << (a.seed + k) << " " << lg << " " << lu << "\n";
        }
        table << "mean " << sum_g / double(a.paired_seeds) << " "
              << sum_u / double(a.paired_seeds) << "\n";
        write_text(fs::path(a.out) / "paired_lguide.txt", table.str());
        std::cout << table.str();
    }

    RngStream rng = RngStream(a.seed).substream(kStreamSample);
    Trajectory traj = sample(deno, fptr, sched, cfg, cond, rng);
    write_tensor(traj.z_out, (fs::path(a.out) / "sample.lmt").string());
    std::ostringstream metrics;
    for (const auto& st : traj.steps) {
        metrics << "step " << st.s << " t " << st.t << " gate " << (st.gate ? 1 : 0)
                << " guide_loss " << st.guide_loss_value << "\n";
    }
    write_text(fs::path(a.out) / "metrics.txt", metrics.str());
    if (a.dump_trajectory) {
        fs::path traj_dir = fs::path(a.out) / "trajectory";
        fs::create_directories(traj_dir);
        for (const auto& st : traj.steps) dump_step(traj_dir, st);
    }

    json resolved = {{"denoiser", a.denoiser},
                     {"fieldnet", a.fieldnet},
                     {"cond-file", a.cond_file},
                     {"guidance", a.guidance},
                     {"schedule", a.schedule},
                     {"s-train", a.s_train},
                     {"seed", a.seed},
                     {"paired-seeds", a.paired_seeds},
                     {"steps", cfg.steps},
                     {"cfg-scale", cfg.cfg_scale},
                     {"lambda-guide", cfg.lambda_guide},
                     {"rho", cfg.rho},
                     {"tau", cfg.lag},
                     {"frames", cfg.t_frames},
                     {"height", cfg.height},
                     {"width", cfg.width},
                     {"vy", a.vy},
                     {"vx", a.vx},
                     {"blobs", a.blobs},
                     {"radius", a.radius},
                     {"dump-trajectory", a.dump_trajectory}};
    write_resolved_config(a.out, "sample", std::move(resolved));
    std::cout << "sampled clip written to " << (fs::path(a.out) / "sample.lmt").string()
              << "\n";
    return 0;
}

struct HeatmapArgs {
    std::string clip, meta, fieldnet, out;
    std::size_t lag = 2;
    double eps_hm = 1e-8;
};

int cmd_heatmap(const HeatmapArgs& a) {
    Tensor clip = read_tensor(a.clip);
    SceneConfig scene;
    Conditioning cond(kCondDim, 0.0);
    bool have_scene = false;
    if (!a.meta.empty()) {
        std::ifstream meta(a.meta);
        if (!meta) throw std::runtime_error("cannot read " + a.meta);
        std::string text((std::istreambuf_iterator<char>(meta)),
                         std::istreambuf_iterator<char>());
        decode_scene_meta(text, scene, cond);
        have_scene = true;
    }
    fs::create_directories(a.out);

    HeatmapResult drift = drift_heatmap(clip, a.lag, a.eps_hm);
    emit_image(drift.r, (fs::path(a.out) / "drift.pgm").string());
    auto [t_star, bs] = select_frame(clip, a.lag);
    double bn = 0.0;
    for (double v : bs[t_star]) bn += v * v;
    bn = std::sqrt(bn);

    std::ostringstream meta_out;
    meta_out << "t_star " << drift.t_star << "\n";
    meta_out << "b_norm " << bn << "\n";
    meta_out << "kind drift\n";
    if (have_scene) {
        Tensor mask = motion_region_mask(scene, drift.t_star, a.lag);
        meta_out << "drift_in_region_mean " << masked_mean(drift.r, mask, true) << "\n";
        meta_out << "drift_out_region_mean " << masked_mean(drift.r, mask, false) << "\n";
    }

    if (!a.fieldnet.empty()) {
        FieldNet net = load_fieldnet(a.fieldnet);
        HeatmapResult fieldr = field_heatmap(clip, net, &cond, a.lag);
        emit_image(fieldr.r, (fs::path(a.out) / "field.pgm").string());
        meta_out << "kind field\n";
        if (have_scene) {
            Tensor mask = motion_region_mask(scene, fieldr.t_star, a.lag);
            meta_out << "field_in_region_mean " << masked_mean(fieldr.r, mask, true) << "\n";
            meta_out << "field_out_region_mean " << masked_mean(fieldr.r, mask, false) << "\n";
        }
    }
    write_text(fs::path(a.out) / "heatmap_meta.txt", meta_out.str());

    json resolved = {{"clip", a.clip},
                     {"meta", a.meta},
                     {"fieldnet", a.fieldnet},
                     {"tau", a.lag},
                     {"eps-hm", a.eps_hm}};
    write_resolved_config(a.out, "heatmap", std::move(resolved));
    std::cout << "heatmaps written to " << a.out << "\n";
    return 0;
}

struct CheckArgs {
    std::string data;
    std::size_t probes = 3;
};

int cmd_check(const CheckArgs& a) {
    auto t0 = std::chrono::steady_clock::now();
    auto results = checks::structural_suite(a.probes);
    if (!a.data.empty()) results.push_back(checks::dataset_integrity(a.data));
    bool ok = true;
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name;
        if (!r.detail.empty()) std::cout << " - " << r.detail;
        std::cout << "\n";
        ok = ok && r.pass;
    }
    double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (ok ? "all checks passed" : "CHECK FAILURES") << " (" << sec << " s)\n";
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent motion prior toolkit: synthetic video latents, drift-supervised "
                 "diffusion training, motion-guided sampling, heatmaps"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its values");

    GenDataArgs gd;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic latent dataset");
    gen->add_option("--out", gd.out, "output directory")->required();
    gen->add_option("--n", gd.n, "number of clips");
    gen->add_option("--seed", gd.seed, "master seed");
    gen->add_option("--frames", gd.ranges.t_frames, "frames per clip");
    gen->add_option("--channels", gd.ranges.channels, "latent channels");
    gen->add_option("--height", gd.ranges.height, "latent height");
    gen->add_option("--width", gd.ranges.width, "latent width");
    gen->add_option("--blobs-min", gd.ranges.n_blobs_min, "min blobs per scene");
    gen->add_option("--blobs-max", gd.ranges.n_blobs_max, "max blobs per scene");
    gen->add_option("--radius-min", gd.ranges.radius_min, "min blob radius");
    gen->add_option("--radius-max", gd.ranges.radius_max, "max blob radius");
    gen->add_option("--speed-min", gd.ranges.speed_min, "min blob speed");
    gen->add_option("--speed-max", gd.ranges.speed_max, "max blob speed");
    gen->add_option("--mix-min", gd.ranges.mix_min, "min |channel mix|");
    gen->add_option("--mix-max", gd.ranges.mix_max, "max |channel mix|");
    gen->add_flag("--mix-signed", gd.ranges.mix_signed, "draw random channel-mix signs");

    TrainFieldArgs tf;
    auto* trf = app.add_subcommand("train-field", "train the motion-field predictor");
    trf->add_option("--data", tf.data, "dataset directory")->required();
    trf->add_option("--out", tf.out, "checkpoint directory")->required();
    trf->add_option("--seed", tf.seed, "master seed");
    trf->add_option("--steps", tf.cfg.steps, "optimizer steps");
    trf->add_option("--batch", tf.cfg.batch, "frames per step");
    trf->add_option("--lr", tf.cfg.lr, "learning rate");
    trf->add_option("--tau", tf.cfg.lag, "temporal lag");
    trf->add_option("--alpha", tf.cfg.alpha, "cosine term weight");
    trf->add_option("--p-aug", tf.cfg.p_aug, "noise augmentation probability");
    trf->add_option("--p-drop", tf.cfg.p_drop, "conditioning dropout probability");
    trf->add_option("--width", tf.cfg.width, "channel width");
    trf->add_option("--blocks", tf.cfg.blocks, "residual block count");
    trf->add_option("--schedule", tf.schedule, "linear-beta | cosine");
    trf->add_option("--s-train", tf.s_train, "training grid size");

    TrainDenoArgs td;
    auto* trd = app.add_subcommand("train-denoiser", "train the toy diffusion backbone");
    trd->add_option("--data", td.data, "dataset directory")->required();
    trd->add_option("--out", td.out, "checkpoint directory")->required();
    trd->add_option("--seed", td.seed, "master seed");
    trd->add_option("--steps", td.cfg.steps, "optimizer steps");
    trd->add_option("--batch", td.cfg.batch, "clips per step");
    trd->add_option("--lr", td.cfg.lr, "learning rate");
    trd->add_option("--tau", td.cfg.lag, "temporal lag");
    trd->add_option("--lambda-drift", td.cfg.lambda_drift, "drift loss weight");
    trd->add_option("--eps-stab", td.cfg.eps_stab, "drift loss stabilizer");
    trd->add_option("--p-uncond", td.cfg.p_uncond, "unconditional training probability");
    trd->add_option("--width", td.cfg.width, "channel width");
    trd->add_option("--spatial-blocks", td.cfg.spatial_blocks, "spatial residual blocks");
    trd->add_option("--temporal-mixes", td.cfg.temporal_mixes, "temporal conv mixes");
    trd->add_option("--schedule", td.schedule, "linear-beta | cosine");
    trd->add_option("--param", td.param, "epsilon | v");
    trd->add_option("--s-train", td.s_train, "training grid size");

    SampleArgs sa;
    auto* smp = app.add_subcommand("sample", "run the guided sampling loop");
    smp->add_option("--denoiser", sa.denoiser, "denoiser checkpoint")->required();
    smp->add_option("--out", sa.out, "output directory")->required();
    smp->add_option("--fieldnet", sa.fieldnet, "fieldnet checkpoint");
    smp->add_option("--guidance", sa.guidance, "noise | latent-edit | off");
    smp->add_option("--schedule", sa.schedule, "linear-beta | cosine");
    smp->add_option("--s-train", sa.s_train, "training grid size");
    smp->add_option("--seed", sa.seed, "master seed");
    smp->add_option("--paired-seeds", sa.paired_seeds,
                    "emit a guided/unguided L_guide table over this many seeds");
    smp->add_option("--steps", sa.cfg.steps, "sampling steps S");
    smp->add_option("--cfg-scale", sa.cfg.cfg_scale, "classifier-free guidance scale");
    smp->add_option("--lambda-guide", sa.cfg.lambda_guide, "guidance strength");
    smp->add_option("--rho", sa.cfg.rho, "active-window ratio");
    smp->add_option("--tau", sa.cfg.lag, "temporal lag");
    smp->add_option("--frames", sa.cfg.t_frames, "frames");
    smp->add_option("--height", sa.cfg.height, "latent height");
    smp->add_option("--width", sa.cfg.width, "latent width");
    smp->add_option("--cond-file", sa.cond_file, "scene .meta to take conditioning from");
    smp->add_option("--vy", sa.vy, "conditioning: mean y velocity");
    smp->add_option("--vx", sa.vx, "conditioning: mean x velocity");
    smp->add_option("--blobs", sa.blobs, "conditioning: blob count");
    smp->add_option("--radius", sa.radius, "conditioning: mean radius");
    smp->add_flag("--dump-trajectory", sa.dump_trajectory, "write per-step tensors");

    HeatmapArgs hm;
    auto* hmc = app.add_subcommand("heatmap", "emit drift/field heatmaps for a clip");
    hmc->add_option("--clip", hm.clip, "clip .lmt file")->required();
    hmc->add_option("--out", hm.out, "output directory")->required();
    hmc->add_option("--meta", hm.meta, "scene .meta (conditioning + blob masks)");
    hmc->add_option("--fieldnet", hm.fieldnet, "fieldnet checkpoint for the field heatmap");
    hmc->add_option("--tau", hm.lag, "temporal lag");
    hmc->add_option("--eps-hm", hm.eps_hm, "drift heatmap stabilizer");

    CheckArgs ck;
    auto* chk = app.add_subcommand("check", "run the property suite");
    chk->add_option("--data", ck.data, "dataset directory to verify");
    chk->add_option("--probes", ck.probes, "gradient-check probes per family");

    try {
        // load config defaults before full parsing so flags win
        for (int i = 1; i + 1 < argc; ++i) {
            if (std::string(argv[i]) == "--config") {
                std::ifstream f(argv[i + 1]);
                if (!f) throw CLI::ValidationError(std::string("cannot read config ") +
                                                   argv[i + 1]);
                g_file_config = json::parse(f);
            }
        }
        for (CLI::App* cmd : {gen, trf, trd, smp, hmc, chk}) apply_config_section(cmd);
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*gen) return cmd_gen_data(gd);
        if (*trf) return cmd_train_field(tf);
        if (*trd) return cmd_train_denoiser(td);
        if (*smp) return cmd_sample(sa);
        if (*hmc) return cmd_heatmap(hm);
        if (*chk) return cmd_check(ck);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
