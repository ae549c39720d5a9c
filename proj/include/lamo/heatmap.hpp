#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lamo/fieldnet.hpp"
#include "lamo/tensor.hpp"

namespace lamo {

enum class HeatmapKind { drift, field };

struct HeatmapResult {
    std::size_t t_star = 0;  // 0-based pair index
    Tensor r;                // [H,W], non-negative
    HeatmapKind kind = HeatmapKind::drift;
};

// Pair index with the strongest macro drift norm (ties -> smallest index),
// plus the per-pair drift vectors b_t.
std::pair<std::size_t, std::vector<std::vector<double>>> select_frame(const Tensor& clip,
                                                                      std::size_t lag);

// R(h,w) = |<Delta_{t*}(:,h,w), b_{t*}>| / (|b_{t*}| + eps_hm)
HeatmapResult drift_heatmap(const Tensor& clip, std::size_t lag, double eps_hm = 1e-8);

// R(h,w) = | f(z_{t*}, c)(:,h,w) - f(z_static, c)(:,h,w) |_2 with z_static
// the temporal mean latent; the baseline cancels the predictor's dense
// response on static content.
HeatmapResult field_heatmap(const Tensor& clip, const FieldNet& net, const Conditioning* cond,
                            std::size_t lag = 2);

// Temporal mean frame of a clip, [C,H,W].
Tensor static_latent(const Tensor& clip);

// [H,W] 0/1 mask of cells within two radii of any blob's center path between
// frames t_star and t_star + lag (distance to the swept segment).
Tensor motion_region_mask(const SceneConfig& scene, std::size_t t_star, std::size_t lag);

// Mean of r over mask cells (inside=true) or their complement.
double masked_mean(const Tensor& r, const Tensor& mask, bool inside);

// 8-bit binary graymap (P5) after min-max normalization; constant fields map
// to all-zero pixels.
void emit_image(const Tensor& r, const std::string& path);

}  // namespace lamo
