#include "lamo/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace lamo::nn {

Adam::Adam(const std::vector<Tensor*>& params, double lr, double beta1, double beta2, double eps)
    : params_(params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Tensor* p : params_) {
        m_.push_back(Tensor::zeros(p->shape));
        v_.push_back(Tensor::zeros(p->shape));
    }
}

void Adam::step(const std::vector<Tensor>& grads) {
    if (grads.size() != params_.size()) {
        throw std::invalid_argument("adam: gradient list size mismatch");
    }
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, double(t_));
    double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = *params_[k];
        const Tensor& g = grads[k];
        if (!p.same_shape(g)) throw std::invalid_argument("adam: gradient shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            double gi = g.data[i];
            m_[k].data[i] = beta1_ * m_[k].data[i] + (1.0 - beta1_) * gi;
            v_[k].data[i] = beta2_ * v_[k].data[i] + (1.0 - beta2_) * gi * gi;
            double mhat = m_[k].data[i] / bc1;
            double vhat = v_[k].data[i] / bc2;
            p.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace lamo::nn
