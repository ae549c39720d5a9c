#include "lamo/motionprior.hpp"

#include <stdexcept>

namespace lamo {

std::vector<Tensor> delta_tau(const Tensor& clip, std::size_t lag) {
    if (clip.ndim() != 4) {
        throw std::invalid_argument("delta_tau: expected [T,C,H,W], got " + shape_str(clip.shape));
    }
    const std::size_t T = clip.dim(0);
    if (lag < 1 || lag > T - 1) {
        throw std::invalid_argument("delta_tau: lag " + std::to_string(lag) +
                                    " outside [1, " + std::to_string(T - 1) + "]");
    }
    const std::size_t frame_len = clip.dim(1) * clip.dim(2) * clip.dim(3);
    std::vector<Tensor> out;
    out.reserve(T - lag);
    for (std::size_t i = 0; i + lag < T; ++i) {
        Tensor d = Tensor::zeros({clip.dim(1), clip.dim(2), clip.dim(3)});
        const double* a = clip.ptr() + i * frame_len;
        const double* b = clip.ptr() + (i + lag) * frame_len;
        for (std::size_t k = 0; k < frame_len; ++k) d.data[k] = b[k] - a[k];
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<double> macro_drift(const Tensor& delta) {
    if (delta.ndim() != 3) {
        throw std::invalid_argument("macro_drift: expected [C,H,W], got " +
                                    shape_str(delta.shape));
    }
    const std::size_t C = delta.dim(0), HW = delta.dim(1) * delta.dim(2);
    std::vector<double> mu(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        const double* p = delta.ptr() + c * HW;
        double s = 0.0;
        for (std::size_t k = 0; k < HW; ++k) s += p[k];
        mu[c] = s / double(HW);
    }
    return mu;
}

DriftLossResult drift_loss(const std::vector<DriftPair>& pairs, double eps_stab) {
    if (pairs.empty()) throw std::invalid_argument("drift_loss: empty pair list");
    // eps_stab = 0 is allowed for the decomposition identity; training always
    // passes a positive stabilizer
    if (eps_stab < 0.0) throw std::invalid_argument("drift_loss: eps_stab must be >= 0");
    DriftLossResult res;
    res.mu_hat_grads.resize(pairs.size());
    res.mu_star_grads.resize(pairs.size());
    const double inv_n = 1.0 / double(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& p = pairs[k];
        if (p.mu_hat.size() != p.mu_star.size() || p.mu_hat.empty()) {
            throw std::invalid_argument("drift_loss: pair " + std::to_string(k) +
                                        " has mismatched channel counts");
        }
        double num = 0.0, den = eps_stab;
        for (std::size_t c = 0; c < p.mu_hat.size(); ++c) {
            double d = p.mu_hat[c] - p.mu_star[c];
            num += d * d;
            den += p.mu_star[c] * p.mu_star[c];
        }
        res.value += num / den * inv_n;
        auto& gh = res.mu_hat_grads[k];
        auto& gs = res.mu_star_grads[k];
        gh.resize(p.mu_hat.size());
        gs.resize(p.mu_hat.size());
        for (std::size_t c = 0; c < p.mu_hat.size(); ++c) {
            double g = 2.0 * (p.mu_hat[c] - p.mu_star[c]) / den * inv_n;
            gh[c] = g;
            gs[c] = -g;  // denominator is stop-gradient
        }
    }
    return res;
}

double training_loss(double denoise, double drift, double lambda_drift, double schedule_w) {
    return denoise + lambda_drift * schedule_w * drift;
}

double drift_loss_raw_l2(const std::vector<DriftPair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("drift_loss_raw_l2: empty pair list");
    double s = 0.0;
    for (const auto& p : pairs) {
        for (std::size_t c = 0; c < p.mu_hat.size(); ++c) {
            double d = p.mu_hat[c] - p.mu_star[c];
            s += d * d;
        }
    }
    return s / double(pairs.size());
}

double dense_motion_loss(const Tensor& delta_hat, const Tensor& delta_star) {
    if (!delta_hat.same_shape(delta_star)) {
        throw std::invalid_argument("dense_motion_loss: shape mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < delta_hat.size(); ++i) {
        double d = delta_hat.data[i] - delta_star.data[i];
        s += d * d;
    }
    return s / double(delta_hat.size());
}

}  // namespace lamo
