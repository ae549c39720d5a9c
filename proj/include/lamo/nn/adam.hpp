#pragma once

#include <vector>

#include "lamo/tensor.hpp"

namespace lamo::nn {

// First-order adaptive optimizer over a fixed parameter list. No weight
// decay. step() applies one update in parameter order, in place.
class Adam {
  public:
    Adam(const std::vector<Tensor*>& params, double lr, double beta1 = 0.9,
         double beta2 = 0.999, double eps = 1e-8);

    void step(const std::vector<Tensor>& grads);
    void set_lr(double lr) { lr_ = lr; }

  private:
    std::vector<Tensor*> params_;
    std::vector<Tensor> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

}  // namespace lamo::nn
