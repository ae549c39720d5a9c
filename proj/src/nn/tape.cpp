#include "lamo/nn/tape.hpp"

#include <stdexcept>

namespace lamo::nn {

Var* Tape::leaf(Tensor value, bool needs_grad) {
    return node(std::move(value), needs_grad, nullptr);
}

Var* Tape::node(Tensor value, bool needs_grad, std::function<void()> fn) {
    Var v;
    v.value = std::move(value);
    v.needs_grad = needs_grad;
    if (needs_grad) v.grad = Tensor::zeros(v.value.shape);
    v.backward = std::move(fn);
    vars_.push_back(std::move(v));
    return &vars_.back();
}

void Tape::backward(Var* root) {
    if (root->value.size() != 1) {
        throw std::invalid_argument("tape backward: root must be scalar");
    }
    backward_with(root, Tensor::full({1}, 1.0));
}

void Tape::backward_with(Var* root, const Tensor& cotangent) {
    if (!root->needs_grad) {
        throw std::invalid_argument("tape backward: root does not require grad");
    }
    if (!root->value.same_shape(cotangent)) {
        throw std::invalid_argument("tape backward: cotangent shape mismatch");
    }
    root->grad = cotangent;
    sweep(root);
}

void Tape::sweep(Var* root) {
    bool seen_root = false;
    for (auto it = vars_.rbegin(); it != vars_.rend(); ++it) {
        Var& v = *it;
        if (!seen_root) {
            if (&v == root) seen_root = true;
            else continue;
        }
        if (v.needs_grad && v.backward) v.backward();
    }
}

}  // namespace lamo::nn
