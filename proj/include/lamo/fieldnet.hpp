#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "lamo/rng.hpp"
#include "lamo/scenegen.hpp"
#include "lamo/schedule.hpp"
#include "lamo/tensor.hpp"

namespace lamo {

// Micro motion-field predictor: per-frame CNN mapping a latent frame plus a
// pooled conditioning vector to the expected tau-step latent change.
//
//   in_proj (1x1, C -> width)
//   N blocks: conv3x3 -> silu -> conv3x3 -> SE gate -> FiLM(c) -> residual add
//   out_proj (1x1, width -> C)
//
// out_proj, every FiLM head and the null embedding start at exactly zero, so
// a fresh net is the constant-zero predictor with a zero input-Jacobian.
struct FieldNetConfig {
    std::size_t channels = 8;
    std::size_t cond_dim = kCondDim;
    std::size_t blocks = 4;
    std::size_t width = 48;

    std::size_t se_hidden() const { return width >= 4 ? width / 4 : 1; }
};

struct FieldNetBlock {
    Tensor conv1_w, conv1_b;  // [3,3,width,width], [width]
    Tensor conv2_w, conv2_b;
    Tensor se1_w, se1_b;      // [width, se_hidden], [se_hidden]
    Tensor se2_w, se2_b;      // [se_hidden, width], [width]
    Tensor film_w, film_b;    // [cond_dim, 2*width], [2*width]
};

struct FieldNet {
    FieldNetConfig cfg;
    Tensor in_w, in_b;    // [1,1,C,width], [width]
    std::vector<FieldNetBlock> blocks;
    Tensor out_w, out_b;  // [1,1,width,C], [C]
    Tensor null_embedding;  // [cond_dim]

    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
    std::vector<std::string> param_names() const;
    std::size_t param_count() const;
};

FieldNet init_fieldnet(const FieldNetConfig& cfg, RngStream& rng);

// frame is [C,H,W]; cond == nullptr selects the null embedding.
Tensor fieldnet_forward(const FieldNet& net, const Tensor& frame, const Conditioning* cond);

// Eq.-style MSE-plus-cosine loss over the flattened field.
double fieldnet_loss(const Tensor& pred, const Tensor& target, double alpha);

struct FieldSample {
    Tensor frame;        // [C,H,W] input (possibly noise-augmented)
    Conditioning cond;   // ignored when use_null
    bool use_null = false;
    Tensor target;       // clean tau-step change, [C,H,W]
};

struct FieldGrads {
    double loss = 0.0;
    std::vector<Tensor> grads;  // aligned with FieldNet::params()
};

// Exact gradients of the batch-mean loss w.r.t. every parameter.
FieldGrads fieldnet_grads(const FieldNet& net, const std::vector<FieldSample>& batch,
                          double alpha);

// J^T cotangent where J = d fieldnet_forward / d frame at (frame, cond).
Tensor fieldnet_vjp_input(const FieldNet& net, const Tensor& frame, const Conditioning* cond,
                          const Tensor& cotangent);

// One-pass forward + input VJP for cotangents that depend on the output;
// equivalent to fieldnet_forward followed by fieldnet_vjp_input.
std::pair<Tensor, Tensor> fieldnet_forward_with_vjp(
    const FieldNet& net, const Tensor& frame, const Conditioning* cond,
    const std::function<Tensor(const Tensor& value)>& cotangent_of);

struct FieldTrainConfig {
    std::size_t lag = 2;
    double alpha = 0.5;
    double p_aug = 0.5;
    double p_drop = 0.2;
    double lr = 1e-3;
    // cosine decay to lr_floor * lr over the run; 1 disables
    double lr_floor = 0.05;
    std::size_t steps = 4000;
    std::size_t batch = 4;
    std::size_t blocks = 4;
    std::size_t width = 64;
};

// Targets are always clean frame differences; inputs are noise-augmented with
// probability p_aug (t' uniform over the training grid) and the conditioning
// is dropped to the null embedding with probability p_drop.
FieldNet train_fieldnet(const std::vector<VideoLatent>& dataset, const NoiseSchedule& sched,
                        const FieldTrainConfig& cfg, RngStream& rng,
                        std::ostream* log = nullptr);

}  // namespace lamo
