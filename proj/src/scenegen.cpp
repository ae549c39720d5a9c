#include "lamo/scenegen.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lamo/parallel.hpp"

namespace lamo {

namespace {

// elastic reflection of u into [0, L], period 2L
double reflect(double u, double L) {
    if (L <= 0.0) return 0.0;
    double m = std::fmod(u, 2.0 * L);
    if (m < 0.0) m += 2.0 * L;
    return m <= L ? m : 2.0 * L - m;
}

void require(bool ok, const std::string& field, const std::string& why) {
    if (!ok) throw std::invalid_argument("scene config: " + field + " " + why);
}

}  // namespace

void validate_scene(const SceneConfig& cfg, std::size_t min_frames) {
    require(cfg.t_frames >= min_frames, "t_frames",
            "must be >= " + std::to_string(min_frames));
    require(cfg.channels >= 1, "channels", "must be >= 1");
    require(cfg.height >= 2, "height", "must be >= 2");
    require(cfg.width >= 2, "width", "must be >= 2");
    require(cfg.n_blobs >= 1, "n_blobs", "must be >= 1");
    require(cfg.pos_y.size() == cfg.n_blobs, "pos_y", "length must equal n_blobs");
    require(cfg.pos_x.size() == cfg.n_blobs, "pos_x", "length must equal n_blobs");
    require(cfg.vel_y.size() == cfg.n_blobs, "vel_y", "length must equal n_blobs");
    require(cfg.vel_x.size() == cfg.n_blobs, "vel_x", "length must equal n_blobs");
    require(cfg.radius.size() == cfg.n_blobs, "radius", "length must equal n_blobs");
    require(cfg.channel_mix.size() == cfg.channels * cfg.n_blobs, "channel_mix",
            "length must equal channels * n_blobs");
    for (std::size_t b = 0; b < cfg.n_blobs; ++b) {
        require(cfg.radius[b] > 0.0, "radius", "must be positive");
        require(cfg.pos_y[b] >= 0.0 && cfg.pos_y[b] <= double(cfg.height - 1), "pos_y",
                "must lie in [0, height-1]");
        require(cfg.pos_x[b] >= 0.0 && cfg.pos_x[b] <= double(cfg.width - 1), "pos_x",
                "must lie in [0, width-1]");
        require(std::isfinite(cfg.vel_y[b]) && std::isfinite(cfg.vel_x[b]), "velocity",
                "must be finite");
    }
    for (double m : cfg.channel_mix) require(std::isfinite(m), "channel_mix", "must be finite");
}

Conditioning encode_conditioning(const SceneConfig& cfg) {
    Conditioning c(kCondDim, 0.0);
    double vy = 0.0, vx = 0.0, r = 0.0;
    for (std::size_t b = 0; b < cfg.n_blobs; ++b) {
        vy += cfg.vel_y[b];
        vx += cfg.vel_x[b];
        r += cfg.radius[b];
    }
    double inv = 1.0 / double(cfg.n_blobs);
    c[0] = vy * inv;
    c[1] = vx * inv;
    c[2] = double(cfg.n_blobs);
    c[3] = r * inv;
    return c;
}

std::pair<double, double> blob_position(const SceneConfig& cfg, std::size_t blob,
                                        std::size_t frame) {
    double fy = reflect(cfg.pos_y[blob] + double(frame) * cfg.vel_y[blob], double(cfg.height - 1));
    double fx = reflect(cfg.pos_x[blob] + double(frame) * cfg.vel_x[blob], double(cfg.width - 1));
    return {fy, fx};
}

Tensor render_frame(const SceneConfig& cfg, std::size_t frame) {
    const std::size_t C = cfg.channels, H = cfg.height, W = cfg.width;
    Tensor out = Tensor::zeros({C, H, W});
    for (std::size_t b = 0; b < cfg.n_blobs; ++b) {
        auto [py, px] = blob_position(cfg, b, frame);
        double inv2r2 = 1.0 / (2.0 * cfg.radius[b] * cfg.radius[b]);
        // spatial profile shared by all channels of this blob
        std::vector<double> profile(H * W);
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t w = 0; w < W; ++w) {
                double dy = double(h) - py;
                double dx = double(w) - px;
                profile[h * W + w] = std::exp(-(dy * dy + dx * dx) * inv2r2);
            }
        }
        for (std::size_t ch = 0; ch < C; ++ch) {
            double m = cfg.mix(ch, b);
            if (m == 0.0) continue;
            double* dst = out.ptr() + ch * H * W;
            for (std::size_t i = 0; i < H * W; ++i) dst[i] += m * profile[i];
        }
    }
    return out;
}

VideoLatent render_scene(const SceneConfig& cfg) {
    validate_scene(cfg);
    const std::size_t C = cfg.channels, H = cfg.height, W = cfg.width;
    VideoLatent clip;
    clip.scene = cfg;
    clip.cond = encode_conditioning(cfg);
    clip.z = Tensor::zeros({cfg.t_frames, C, H, W});
    const std::size_t frame_len = C * H * W;
    for (std::size_t i = 0; i < cfg.t_frames; ++i) {
        Tensor f = render_frame(cfg, i);
        std::copy(f.data.begin(), f.data.end(), clip.z.data.begin() + i * frame_len);
    }
    return clip;
}

Tensor true_motion(const SceneConfig& cfg, std::size_t frame, std::size_t lag) {
    validate_scene(cfg);
    if (lag < 1 || lag >= cfg.t_frames || frame >= cfg.t_frames - lag) {
        throw std::invalid_argument("true_motion: frame " + std::to_string(frame) + " lag " +
                                    std::to_string(lag) + " out of range for T=" +
                                    std::to_string(cfg.t_frames));
    }
    return sub(render_frame(cfg, frame + lag), render_frame(cfg, frame));
}

void validate_ranges(const SceneRanges& r) {
    auto bad = [](const std::string& what) {
        throw std::invalid_argument("scene ranges: " + what);
    };
    if (r.n_blobs_min < 1 || r.n_blobs_max < r.n_blobs_min) bad("empty n_blobs range");
    if (!(r.radius_min > 0.0) || r.radius_max < r.radius_min) bad("empty radius range");
    if (r.speed_min < 0.0 || r.speed_max < r.speed_min) bad("empty speed range");
    if (r.mix_min < 0.0 || r.mix_max < r.mix_min) bad("empty mix range");
    if (r.t_frames < 2 || r.height < 2 || r.width < 2 || r.channels < 1) {
        bad("degenerate clip geometry");
    }
}

SceneConfig draw_scene(const SceneRanges& ranges, RngStream& rng) {
    SceneConfig cfg;
    cfg.t_frames = ranges.t_frames;
    cfg.channels = ranges.channels;
    cfg.height = ranges.height;
    cfg.width = ranges.width;
    cfg.n_blobs = ranges.n_blobs_min +
                  rng.next_below(ranges.n_blobs_max - ranges.n_blobs_min + 1);
    for (std::size_t b = 0; b < cfg.n_blobs; ++b) {
        cfg.pos_y.push_back(rng.uniform(0.0, double(cfg.height - 1)));
        cfg.pos_x.push_back(rng.uniform(0.0, double(cfg.width - 1)));
        double speed = rng.uniform(ranges.speed_min, ranges.speed_max);
        double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        cfg.vel_y.push_back(speed * std::sin(angle));
        cfg.vel_x.push_back(speed * std::cos(angle));
        cfg.radius.push_back(rng.uniform(ranges.radius_min, ranges.radius_max));
    }
    cfg.channel_mix.resize(cfg.channels * cfg.n_blobs);
    for (double& m : cfg.channel_mix) {
        double mag = rng.uniform(ranges.mix_min, ranges.mix_max);
        m = ranges.mix_signed && rng.bernoulli(0.5) ? -mag : mag;
    }
    return cfg;
}

std::vector<VideoLatent> make_dataset(std::size_t n_clips, const SceneRanges& ranges,
                                      const RngStream& rng) {
    if (n_clips < 1) throw std::invalid_argument("make_dataset: n_clips must be >= 1");
    validate_ranges(ranges);
    std::vector<VideoLatent> out(n_clips);
    parallel_for(n_clips, [&](std::size_t k) {
        RngStream sub = rng.substream(k);
        out[k] = render_scene(draw_scene(ranges, sub));
    });
    return out;
}

}  // namespace lamo
