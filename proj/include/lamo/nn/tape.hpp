#pragma once

#include <deque>
#include <functional>

#include "lamo/tensor.hpp"

namespace lamo::nn {

// Reverse-mode tape. Nodes are created in topological order by construction,
// so backward is a single reverse sweep over the deque. Gradients accumulate
// in a fixed order, which keeps every training step bit-reproducible.
struct Var {
    Tensor value;
    Tensor grad;  // allocated (zeros) iff needs_grad
    bool needs_grad = false;
    std::function<void()> backward;  // pushes this->grad into parents
};

class Tape {
  public:
    Var* leaf(Tensor value, bool needs_grad = false);

    // Appends a node; fn runs during the backward sweep.
    Var* node(Tensor value, bool needs_grad, std::function<void()> fn);

    // Seeds d(root)/d(root) = 1; root must be scalar (size 1).
    void backward(Var* root);

    // Seeds an arbitrary cotangent at root (vector-Jacobian product).
    void backward_with(Var* root, const Tensor& cotangent);

    std::size_t size() const { return vars_.size(); }

  private:
    void sweep(Var* root);
    std::deque<Var> vars_;
};

}  // namespace lamo::nn
