#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "lamo/rng.hpp"
#include "lamo/tensor.hpp"

namespace lamo {

// Pooled conditioning vector fed to FiLM heads. Fixed length kCondDim, laid
// out as [mean vel_y, mean vel_x, blob count, mean radius, 0...].
inline constexpr std::size_t kCondDim = 16;
using Conditioning = std::vector<double>;

// Gaussian-blob scene: n_blobs isotropic blobs translating at constant
// velocity, bouncing elastically off the walls at 0 and H-1 / W-1. Frame
// indices are 0-based throughout the codebase.
struct SceneConfig {
    std::size_t t_frames = 9;
    std::size_t channels = 8;
    std::size_t height = 16;
    std::size_t width = 16;
    std::size_t n_blobs = 1;
    std::vector<double> pos_y, pos_x;     // [n_blobs], grid units at frame 0
    std::vector<double> vel_y, vel_x;     // [n_blobs], grid units per frame
    std::vector<double> radius;           // [n_blobs], gaussian std > 0
    std::vector<double> channel_mix;      // [channels * n_blobs], row-major (ch, blob)

    double mix(std::size_t ch, std::size_t blob) const { return channel_mix[ch * n_blobs + blob]; }
};

// Throws invalid_argument naming the offending field.
// min_frames is the shortest clip the caller can use (tau_max + 1).
void validate_scene(const SceneConfig& cfg, std::size_t min_frames = 2);

struct VideoLatent {
    Tensor z;            // [T, C, H, W]
    Conditioning cond;   // deterministic in scene
    SceneConfig scene;
};

Conditioning encode_conditioning(const SceneConfig& cfg);

// Blob center at a frame, after boundary reflection. Closed form: the
// unfolded position p0 + frame*v folded into [0, L] with period 2L, so every
// rendered frame shares one code path and differencing is exact.
std::pair<double, double> blob_position(const SceneConfig& cfg, std::size_t blob,
                                        std::size_t frame);

Tensor render_frame(const SceneConfig& cfg, std::size_t frame);   // [C, H, W]
VideoLatent render_scene(const SceneConfig& cfg);

// Analytic Delta_tau oracle: render_frame(frame + lag) - render_frame(frame),
// bit-identical to differencing render_scene output. frame in [0, T-lag).
Tensor true_motion(const SceneConfig& cfg, std::size_t frame, std::size_t lag);

struct SceneRanges {
    std::size_t n_blobs_min = 1, n_blobs_max = 1;
    double radius_min = 1.6, radius_max = 3.0;
    double speed_min = 0.35, speed_max = 1.25;  // grid units per frame
    double mix_min = 0.35, mix_max = 1.0;       // magnitude
    bool mix_signed = false;                    // draw random per-channel signs
    std::size_t t_frames = 9, channels = 8, height = 16, width = 16;
};

void validate_ranges(const SceneRanges& ranges);

SceneConfig draw_scene(const SceneRanges& ranges, RngStream& rng);

// i.i.d. scenes within ranges; clip k draws only from rng.substream(k), so
// the dataset is reproducible and order-independent.
std::vector<VideoLatent> make_dataset(std::size_t n_clips, const SceneRanges& ranges,
                                      const RngStream& rng);

}  // namespace lamo
