#pragma once

#include <vector>

#include "lamo/nn/tape.hpp"

namespace lamo::nn {

// All ops use channels-last activations: frames [H,W,C], clips [T,H,W,C].
// Weights: conv2d [kh,kw,cin,cout], temporal conv [kt,cin,cout], linear
// [in,out]. Public module APIs stay (C,H,W); converters below bridge.

Tensor chw_to_hwc(const Tensor& x);
Tensor hwc_to_chw(const Tensor& x);
Tensor tchw_to_thwc(const Tensor& x);
Tensor thwc_to_tchw(const Tensor& x);

// stride-1 same-padding conv, odd kernel
Var* conv2d(Tape& tp, Var* x, Var* w, Var* b);
// per-frame conv over a clip with shared weights
Var* conv2d_clip(Tape& tp, Var* x, Var* w, Var* b);
// same-padding conv along T, mixing channels at each pixel
Var* conv_time(Tape& tp, Var* x, Var* w, Var* b);

Var* silu(Tape& tp, Var* x);
Var* sigmoid(Tape& tp, Var* x);
Var* add(Tape& tp, Var* a, Var* b);
// y = k*x + c (c a constant tensor, broadcast none)
Var* affine_const(Tape& tp, Var* x, double k, Tensor c);
Var* scale_const(Tape& tp, Var* x, double k);

// mean over H,W of a [H,W,C] frame -> [C]
Var* gpool_hw(Tape& tp, Var* x);
Var* linear(Tape& tp, Var* x, Var* w, Var* b);
// x[...,c] * s[c]
Var* channel_scale(Tape& tp, Var* x, Var* s);
// FiLM with packed params ss = [scale(C), shift(C)]: y = (1+scale_c)*x + shift_c
Var* film(Tape& tp, Var* x, Var* ss);

// mean over all elements of (a - target)^2
Var* mse_const(Tape& tp, Var* a, Tensor target);
// 1 - cos(angle(a, target)) over flattened values; defined as 1 when either
// norm is below 1e-12 (then constant, zero gradient)
Var* one_minus_cos_const(Tape& tp, Var* a, Tensor target);

// per-pair macro drifts of a clip: out[i][c] = mean_hw(x[i+lag] - x[i])
Var* frame_drift(Tape& tp, Var* x, std::size_t lag);
// concat [P_k, C] blocks along axis 0
Var* stack_rows(Tape& tp, const std::vector<Var*>& blocks);
// scalar y = sum_k w_k * x_k
Var* weighted_sum(Tape& tp, const std::vector<Var*>& xs, const std::vector<double>& ws);

}  // namespace lamo::nn
