#include "lamo/fieldnet.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "lamo/nn/adam.hpp"
#include "lamo/nn/ops.hpp"
#include "lamo/nn/tape.hpp"
#include "lamo/parallel.hpp"

namespace lamo {

using nn::Tape;
using nn::Var;

std::vector<Tensor*> FieldNet::params() {
    std::vector<Tensor*> out = {&in_w, &in_b};
    for (auto& b : blocks) {
        out.insert(out.end(), {&b.conv1_w, &b.conv1_b, &b.conv2_w, &b.conv2_b, &b.se1_w,
                               &b.se1_b, &b.se2_w, &b.se2_b, &b.film_w, &b.film_b});
    }
    out.insert(out.end(), {&out_w, &out_b, &null_embedding});
    return out;
}

std::vector<const Tensor*> FieldNet::params() const {
    auto mut = const_cast<FieldNet*>(this)->params();
    return {mut.begin(), mut.end()};
}

std::vector<std::string> FieldNet::param_names() const {
    std::vector<std::string> out = {"in.w", "in.b"};
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        std::string p = "block" + std::to_string(k) + ".";
        for (const char* n : {"conv1.w", "conv1.b", "conv2.w", "conv2.b", "se1.w", "se1.b",
                              "se2.w", "se2.b", "film.w", "film.b"}) {
            out.push_back(p + n);
        }
    }
    out.insert(out.end(), {"out.w", "out.b", "null_embedding"});
    return out;
}

std::size_t FieldNet::param_count() const {
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

}  // namespace

FieldNet init_fieldnet(const FieldNetConfig& cfg, RngStream& rng) {
    if (cfg.channels < 1 || cfg.cond_dim < 1 || cfg.blocks < 1 || cfg.width < 1) {
        throw std::invalid_argument("init_fieldnet: all sizes must be >= 1");
    }
    FieldNet net;
    net.cfg = cfg;
    const std::size_t C = cfg.channels, Wd = cfg.width, Hd = cfg.se_hidden(), Dc = cfg.cond_dim;
    net.in_w = randn({1, 1, C, Wd}, 1.0 / std::sqrt(double(C)), rng);
    net.in_b = Tensor::zeros({Wd});
    double conv_scale = 1.0 / std::sqrt(9.0 * double(Wd));
    for (std::size_t k = 0; k < cfg.blocks; ++k) {
        FieldNetBlock b;
        b.conv1_w = randn({3, 3, Wd, Wd}, conv_scale, rng);
        b.conv1_b = Tensor::zeros({Wd});
        b.conv2_w = randn({3, 3, Wd, Wd}, conv_scale, rng);
        b.conv2_b = Tensor::zeros({Wd});
        b.se1_w = randn({Wd, Hd}, 1.0 / std::sqrt(double(Wd)), rng);
        b.se1_b = Tensor::zeros({Hd});
        b.se2_w = randn({Hd, Wd}, 1.0 / std::sqrt(double(Hd)), rng);
        b.se2_b = Tensor::zeros({Wd});
        // zero FiLM heads give the identity modulation at launch
        b.film_w = Tensor::zeros({Dc, 2 * Wd});
        b.film_b = Tensor::zeros({2 * Wd});
        net.blocks.push_back(std::move(b));
    }
    // zero output projection: the fresh net predicts exactly zero and has a
    // zero input-Jacobian
    net.out_w = Tensor::zeros({1, 1, Wd, C});
    net.out_b = Tensor::zeros({C});
    net.null_embedding = Tensor::zeros({Dc});
    return net;
}

namespace {

struct FieldGraph {
    std::vector<Var*> leaves;  // aligned with FieldNet::params()
    Var* input = nullptr;      // [H,W,C]
    Var* output = nullptr;     // [H,W,C]
};

FieldGraph build_field_graph(Tape& tp, const FieldNet& net, const Tensor& frame_chw,
                             const Conditioning* cond, bool param_grads, bool input_grad) {
    if (frame_chw.ndim() != 3 || frame_chw.dim(0) != net.cfg.channels) {
        throw std::invalid_argument("fieldnet: frame must be [C,H,W] with C=" +
                                    std::to_string(net.cfg.channels) + ", got " +
                                    shape_str(frame_chw.shape));
    }
    if (cond && cond->size() != net.cfg.cond_dim) {
        throw std::invalid_argument("fieldnet: conditioning length " +
                                    std::to_string(cond->size()) + " != " +
                                    std::to_string(net.cfg.cond_dim));
    }
    FieldGraph g;
    auto ps = net.params();
    g.leaves.reserve(ps.size());
    for (const Tensor* p : ps) g.leaves.push_back(tp.leaf(*p, param_grads));

    const std::size_t per_block = 10;
    auto blk = [&](std::size_t k, std::size_t j) { return g.leaves[2 + k * per_block + j]; };
    Var* out_w = g.leaves[2 + net.blocks.size() * per_block];
    Var* out_b = g.leaves[2 + net.blocks.size() * per_block + 1];
    Var* null_emb = g.leaves[2 + net.blocks.size() * per_block + 2];

    g.input = tp.leaf(nn::chw_to_hwc(frame_chw), input_grad);
    Var* cvar = cond ? tp.leaf(Tensor({net.cfg.cond_dim}, *cond), false) : null_emb;

    Var* h = nn::conv2d(tp, g.input, g.leaves[0], g.leaves[1]);
    for (std::size_t k = 0; k < net.blocks.size(); ++k) {
        Var* u = nn::conv2d(tp, h, blk(k, 0), blk(k, 1));
        u = nn::silu(tp, u);
        u = nn::conv2d(tp, u, blk(k, 2), blk(k, 3));
        Var* se = nn::gpool_hw(tp, u);
        se = nn::linear(tp, se, blk(k, 4), blk(k, 5));
        se = nn::silu(tp, se);
        se = nn::linear(tp, se, blk(k, 6), blk(k, 7));
        Var* gate = nn::sigmoid(tp, se);
        u = nn::channel_scale(tp, u, gate);
        Var* ss = nn::linear(tp, cvar, blk(k, 8), blk(k, 9));
        u = nn::film(tp, u, ss);
        h = nn::add(tp, h, u);
    }
    g.output = nn::conv2d(tp, h, out_w, out_b);
    return g;
}

}  // namespace

Tensor fieldnet_forward(const FieldNet& net, const Tensor& frame, const Conditioning* cond) {
    Tape tp;
    FieldGraph g = build_field_graph(tp, net, frame, cond, false, false);
    return nn::hwc_to_chw(g.output->value);
}

double fieldnet_loss(const Tensor& pred, const Tensor& target, double alpha) {
    if (!pred.same_shape(target)) {
        throw std::invalid_argument("fieldnet_loss: shape mismatch " + shape_str(pred.shape) +
                                    " vs " + shape_str(target.shape));
    }
    double mse = 0.0, dot = 0.0, np2 = 0.0, nt2 = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred.data[i] - target.data[i];
        mse += d * d;
        dot += pred.data[i] * target.data[i];
        np2 += pred.data[i] * pred.data[i];
        nt2 += target.data[i] * target.data[i];
    }
    mse /= double(pred.size());
    double np = std::sqrt(np2), nt = std::sqrt(nt2);
    double cos_term = (np < 1e-12 || nt < 1e-12) ? 1.0 : 1.0 - dot / (np * nt);
    return mse + alpha * cos_term;
}

FieldGrads fieldnet_grads(const FieldNet& net, const std::vector<FieldSample>& batch,
                          double alpha) {
    if (batch.empty()) throw std::invalid_argument("fieldnet_grads: empty batch");
    std::vector<FieldGrads> per(batch.size());
    parallel_for(batch.size(), [&](std::size_t k) {
        const FieldSample& s = batch[k];
        Tape tp;
        FieldGraph g = build_field_graph(tp, net, s.frame, s.use_null ? nullptr : &s.cond,
                                         true, false);
        Var* m = nn::mse_const(tp, g.output, nn::chw_to_hwc(s.target));
        Var* c = nn::one_minus_cos_const(tp, g.output, nn::chw_to_hwc(s.target));
        Var* loss = nn::weighted_sum(tp, {m, c}, {1.0, alpha});
        tp.backward(loss);
        per[k].loss = loss->value.data[0];
        per[k].grads.reserve(g.leaves.size());
        for (Var* leaf : g.leaves) per[k].grads.push_back(std::move(leaf->grad));
    });
    FieldGrads total = std::move(per[0]);
    for (std::size_t k = 1; k < per.size(); ++k) {
        total.loss += per[k].loss;
        for (std::size_t j = 0; j < total.grads.size(); ++j) {
            for (std::size_t i = 0; i < total.grads[j].size(); ++i) {
                total.grads[j].data[i] += per[k].grads[j].data[i];
            }
        }
    }
    double inv = 1.0 / double(batch.size());
    total.loss *= inv;
    for (Tensor& g : total.grads) {
        for (double& v : g.data) v *= inv;
    }
    return total;
}

Tensor fieldnet_vjp_input(const FieldNet& net, const Tensor& frame, const Conditioning* cond,
                          const Tensor& cotangent) {
    if (!frame.same_shape(cotangent)) {
        throw std::invalid_argument("fieldnet_vjp_input: cotangent shape mismatch");
    }
    Tape tp;
    FieldGraph g = build_field_graph(tp, net, frame, cond, false, true);
    tp.backward_with(g.output, nn::chw_to_hwc(cotangent));
    return nn::hwc_to_chw(g.input->grad);
}

std::pair<Tensor, Tensor> fieldnet_forward_with_vjp(
    const FieldNet& net, const Tensor& frame, const Conditioning* cond,
    const std::function<Tensor(const Tensor& value)>& cotangent_of) {
    Tape tp;
    FieldGraph g = build_field_graph(tp, net, frame, cond, false, true);
    Tensor value = nn::hwc_to_chw(g.output->value);
    Tensor cot = cotangent_of(value);
    if (!cot.same_shape(frame)) {
        throw std::invalid_argument("fieldnet_forward_with_vjp: cotangent shape mismatch");
    }
    tp.backward_with(g.output, nn::chw_to_hwc(cot));
    return {std::move(value), nn::hwc_to_chw(g.input->grad)};
}

FieldNet train_fieldnet(const std::vector<VideoLatent>& dataset, const NoiseSchedule& sched,
                        const FieldTrainConfig& cfg, RngStream& rng, std::ostream* log) {
    if (dataset.empty()) throw std::invalid_argument("train_fieldnet: empty dataset");
    const Tensor& z0 = dataset[0].z;
    const std::size_t T = z0.dim(0), C = z0.dim(1), H = z0.dim(2), W = z0.dim(3);
    if (cfg.lag >= T) {
        throw std::invalid_argument("train_fieldnet: lag must be < clip length");
    }
    RngStream init_rng = rng.substream(0);
    RngStream draw_rng = rng.substream(1);
    FieldNet net = init_fieldnet({C, kCondDim, cfg.blocks, cfg.width}, init_rng);

    nn::Adam opt(net.params(), cfg.lr);
    const std::size_t frame_len = C * H * W;
    const double pi = 3.14159265358979323846;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        if (cfg.lr_floor < 1.0 && cfg.steps > 1) {
            double u = 0.5 * (1.0 + std::cos(pi * double(step) / double(cfg.steps - 1)));
            opt.set_lr(cfg.lr * (cfg.lr_floor + (1.0 - cfg.lr_floor) * u));
        }
        // sample k draws only from stream (tag, k); workers never share state
        const std::uint64_t tag = draw_rng.next_u64();
        std::vector<FieldSample> batch(cfg.batch);
        parallel_for(cfg.batch, [&](std::size_t k) {
            RngStream s_rng(tag, k);
            const VideoLatent& clip = dataset[s_rng.next_below(dataset.size())];
            std::size_t i = s_rng.next_below(T - cfg.lag);
            FieldSample& s = batch[k];
            s.frame = Tensor::zeros({C, H, W});
            std::copy(clip.z.data.begin() + i * frame_len,
                      clip.z.data.begin() + (i + 1) * frame_len, s.frame.data.begin());
            s.target = Tensor::zeros({C, H, W});
            for (std::size_t j = 0; j < frame_len; ++j) {
                s.target.data[j] =
                    clip.z.data[(i + cfg.lag) * frame_len + j] - clip.z.data[i * frame_len + j];
            }
            if (s_rng.bernoulli(cfg.p_aug)) {
                // diffusion-aligned augmentation: z + sigma_{t'} eps, t' uniform
                // over the training grid; the target stays clean
                std::size_t t_aug = 1 + s_rng.next_below(sched.s_train);
                double s_aug = sched.sig(t_aug);
                for (double& v : s.frame.data) v += s_aug * s_rng.normal();
            }
            s.cond = clip.cond;
            s.use_null = s_rng.bernoulli(cfg.p_drop);
        });
        FieldGrads g = fieldnet_grads(net, batch, cfg.alpha);
        opt.step(g.grads);
        if (log) {
            (*log) << "step " << (step + 1) << " loss " << g.loss << "\n";
        }
    }
    return net;
}

}  // namespace lamo
