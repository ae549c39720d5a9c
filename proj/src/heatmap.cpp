#include "lamo/heatmap.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "lamo/motionprior.hpp"

namespace lamo {

std::pair<std::size_t, std::vector<std::vector<double>>> select_frame(const Tensor& clip,
                                                                      std::size_t lag) {
    auto deltas = delta_tau(clip, lag);
    std::vector<std::vector<double>> bs(deltas.size());
    std::size_t best = 0;
    double best_norm = -1.0;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        bs[i] = macro_drift(deltas[i]);
        double n2 = 0.0;
        for (double v : bs[i]) n2 += v * v;
        double n = std::sqrt(n2);
        if (n > best_norm) {
            best_norm = n;
            best = i;
        }
    }
    return {best, std::move(bs)};
}

HeatmapResult drift_heatmap(const Tensor& clip, std::size_t lag, double eps_hm) {
    auto [t_star, bs] = select_frame(clip, lag);
    auto deltas = delta_tau(clip, lag);
    const Tensor& d = deltas[t_star];
    const auto& b = bs[t_star];
    const std::size_t C = d.dim(0), H = d.dim(1), W = d.dim(2);
    double bn = 0.0;
    for (double v : b) bn += v * v;
    bn = std::sqrt(bn);
    HeatmapResult res;
    res.t_star = t_star;
    res.kind = HeatmapKind::drift;
    res.r = Tensor::zeros({H, W});
    for (std::size_t p = 0; p < H * W; ++p) {
        double inner = 0.0;
        for (std::size_t c = 0; c < C; ++c) inner += d.data[c * H * W + p] * b[c];
        res.r.data[p] = std::fabs(inner) / (bn + eps_hm);
    }
    return res;
}

Tensor static_latent(const Tensor& clip) {
    if (clip.ndim() != 4) throw std::invalid_argument("static_latent: expected [T,C,H,W]");
    const std::size_t T = clip.dim(0), frame_len = clip.size() / T;
    // mean as frame0 + mean of differences: identical frames give back frame0
    // bit for bit, so the static-clip null is exact
    Tensor mean = Tensor::zeros({clip.dim(1), clip.dim(2), clip.dim(3)});
    for (std::size_t t = 1; t < T; ++t) {
        const double* src = clip.ptr() + t * frame_len;
        for (std::size_t i = 0; i < frame_len; ++i) mean.data[i] += src[i] - clip.data[i];
    }
    for (std::size_t i = 0; i < frame_len; ++i) {
        mean.data[i] = clip.data[i] + mean.data[i] / double(T);
    }
    return mean;
}

HeatmapResult field_heatmap(const Tensor& clip, const FieldNet& net, const Conditioning* cond,
                            std::size_t lag) {
    auto [t_star, bs] = select_frame(clip, lag);
    const std::size_t C = clip.dim(1), H = clip.dim(2), W = clip.dim(3);
    const std::size_t frame_len = C * H * W;
    Tensor frame = Tensor::zeros({C, H, W});
    std::copy(clip.data.begin() + t_star * frame_len,
              clip.data.begin() + (t_star + 1) * frame_len, frame.data.begin());
    Tensor f_sel = fieldnet_forward(net, frame, cond);
    Tensor f_static = fieldnet_forward(net, static_latent(clip), cond);
    HeatmapResult res;
    res.t_star = t_star;
    res.kind = HeatmapKind::field;
    res.r = Tensor::zeros({H, W});
    for (std::size_t p = 0; p < H * W; ++p) {
        double s = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            double d = f_sel.data[c * H * W + p] - f_static.data[c * H * W + p];
            s += d * d;
        }
        res.r.data[p] = std::sqrt(s);
    }
    return res;
}

namespace {

double dist_to_segment(double py, double px, double ay, double ax, double by, double bx) {
    double dy = by - ay, dx = bx - ax;
    double len2 = dy * dy + dx * dx;
    double t = 0.0;
    if (len2 > 0.0) {
        t = ((py - ay) * dy + (px - ax) * dx) / len2;
        t = std::max(0.0, std::min(1.0, t));
    }
    double cy = ay + t * dy, cx = ax + t * dx;
    return std::hypot(py - cy, px - cx);
}

}  // namespace

Tensor motion_region_mask(const SceneConfig& scene, std::size_t t_star, std::size_t lag) {
    Tensor mask = Tensor::zeros({scene.height, scene.width});
    for (std::size_t b = 0; b < scene.n_blobs; ++b) {
        auto [ay, ax] = blob_position(scene, b, t_star);
        auto [by, bx] = blob_position(scene, b, t_star + lag);
        double rad = 2.0 * scene.radius[b];
        for (std::size_t h = 0; h < scene.height; ++h) {
            for (std::size_t w = 0; w < scene.width; ++w) {
                if (dist_to_segment(double(h), double(w), ay, ax, by, bx) <= rad) {
                    mask.data[h * scene.width + w] = 1.0;
                }
            }
        }
    }
    return mask;
}

double masked_mean(const Tensor& r, const Tensor& mask, bool inside) {
    if (!r.same_shape(mask)) throw std::invalid_argument("masked_mean: shape mismatch");
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if ((mask.data[i] != 0.0) == inside) {
            s += r.data[i];
            ++n;
        }
    }
    return n == 0 ? 0.0 : s / double(n);
}

void emit_image(const Tensor& r, const std::string& path) {
    if (r.ndim() != 2) throw std::invalid_argument("emit_image: expected [H,W]");
    if (!all_finite(r)) throw std::invalid_argument("emit_image: non-finite field");
    double lo = r.data[0], hi = r.data[0];
    for (double v : r.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi - lo;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("emit_image: cannot open " + path);
    f << "P5\n" << r.dim(1) << " " << r.dim(0) << "\n255\n";
    for (double v : r.data) {
        unsigned char px = 0;
        if (span > 0.0) {
            px = static_cast<unsigned char>(std::lround((v - lo) / span * 255.0));
        }
        f.put(static_cast<char>(px));
    }
    if (!f) throw std::runtime_error("emit_image: write failed for " + path);
}

}  // namespace lamo
