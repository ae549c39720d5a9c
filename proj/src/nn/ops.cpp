#include "lamo/nn/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace lamo::nn {

namespace {

void expect(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("nn op: ") + what);
}

// ---- raw conv kernels (channels-last) ----

void conv2d_fwd(const double* x, const double* w, const double* b, double* y,
                std::size_t H, std::size_t W, std::size_t ci_n, std::size_t co_n,
                std::size_t kh_n, std::size_t kw_n) {
    const std::ptrdiff_t ph = kh_n / 2, pw = kw_n / 2;
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t ww = 0; ww < W; ++ww) {
            double* yp = y + (h * W + ww) * co_n;
            for (std::size_t co = 0; co < co_n; ++co) yp[co] = b[co];
            for (std::size_t kh = 0; kh < kh_n; ++kh) {
                std::ptrdiff_t hh = std::ptrdiff_t(h) + std::ptrdiff_t(kh) - ph;
                if (hh < 0 || hh >= std::ptrdiff_t(H)) continue;
                for (std::size_t kw = 0; kw < kw_n; ++kw) {
                    std::ptrdiff_t w2 = std::ptrdiff_t(ww) + std::ptrdiff_t(kw) - pw;
                    if (w2 < 0 || w2 >= std::ptrdiff_t(W)) continue;
                    const double* xp = x + (std::size_t(hh) * W + std::size_t(w2)) * ci_n;
                    const double* wp = w + (kh * kw_n + kw) * ci_n * co_n;
                    for (std::size_t ci = 0; ci < ci_n; ++ci) {
                        const double xv = xp[ci];
                        const double* wrow = wp + ci * co_n;
#pragma omp simd
                        for (std::size_t co = 0; co < co_n; ++co) yp[co] += xv * wrow[co];
                    }
                }
            }
        }
    }
}

// accumulates into gx (nullable), gw (nullable), gb (nullable)
void conv2d_bwd(const double* x, const double* w, const double* gy, double* gx, double* gw,
                double* gb, std::size_t H, std::size_t W, std::size_t ci_n, std::size_t co_n,
                std::size_t kh_n, std::size_t kw_n) {
    const std::ptrdiff_t ph = kh_n / 2, pw = kw_n / 2;
    if (gb) {
        for (std::size_t p = 0; p < H * W; ++p) {
            const double* gyp = gy + p * co_n;
            for (std::size_t co = 0; co < co_n; ++co) gb[co] += gyp[co];
        }
    }
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t ww = 0; ww < W; ++ww) {
            const double* gyp = gy + (h * W + ww) * co_n;
            for (std::size_t kh = 0; kh < kh_n; ++kh) {
                std::ptrdiff_t hh = std::ptrdiff_t(h) + std::ptrdiff_t(kh) - ph;
                if (hh < 0 || hh >= std::ptrdiff_t(H)) continue;
                for (std::size_t kw = 0; kw < kw_n; ++kw) {
                    std::ptrdiff_t w2 = std::ptrdiff_t(ww) + std::ptrdiff_t(kw) - pw;
                    if (w2 < 0 || w2 >= std::ptrdiff_t(W)) continue;
                    const std::size_t in_off = (std::size_t(hh) * W + std::size_t(w2)) * ci_n;
                    const std::size_t w_off = (kh * kw_n + kw) * ci_n * co_n;
                    if (gx) {
                        double* gxp = gx + in_off;
                        for (std::size_t ci = 0; ci < ci_n; ++ci) {
                            const double* wrow = w + w_off + ci * co_n;
                            double s = 0.0;
#pragma omp simd reduction(+ : s)
                            for (std::size_t co = 0; co < co_n; ++co) s += wrow[co] * gyp[co];
                            gxp[ci] += s;
                        }
                    }
                    if (gw) {
                        const double* xp = x + in_off;
                        for (std::size_t ci = 0; ci < ci_n; ++ci) {
                            const double xv = xp[ci];
                            double* gwrow = gw + w_off + ci * co_n;
#pragma omp simd
                            for (std::size_t co = 0; co < co_n; ++co) gwrow[co] += xv * gyp[co];
                        }
                    }
                }
            }
        }
    }
}

void conv_time_fwd(const double* x, const double* w, const double* b, double* y, std::size_t T,
                   std::size_t P, std::size_t ci_n, std::size_t co_n, std::size_t kt_n) {
    const std::ptrdiff_t pt = kt_n / 2;
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t p = 0; p < P; ++p) {
            double* yp = y + (t * P + p) * co_n;
            for (std::size_t co = 0; co < co_n; ++co) yp[co] = b[co];
            for (std::size_t kt = 0; kt < kt_n; ++kt) {
                std::ptrdiff_t tt = std::ptrdiff_t(t) + std::ptrdiff_t(kt) - pt;
                if (tt < 0 || tt >= std::ptrdiff_t(T)) continue;
                const double* xp = x + (std::size_t(tt) * P + p) * ci_n;
                const double* wp = w + kt * ci_n * co_n;
                for (std::size_t ci = 0; ci < ci_n; ++ci) {
                    const double xv = xp[ci];
                    const double* wrow = wp + ci * co_n;
#pragma omp simd
                    for (std::size_t co = 0; co < co_n; ++co) yp[co] += xv * wrow[co];
                }
            }
        }
    }
}

void conv_time_bwd(const double* x, const double* w, const double* gy, double* gx, double* gw,
                   double* gb, std::size_t T, std::size_t P, std::size_t ci_n, std::size_t co_n,
                   std::size_t kt_n) {
    const std::ptrdiff_t pt = kt_n / 2;
    if (gb) {
        for (std::size_t p = 0; p < T * P; ++p) {
            const double* gyp = gy + p * co_n;
            for (std::size_t co = 0; co < co_n; ++co) gb[co] += gyp[co];
        }
    }
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t p = 0; p < P; ++p) {
            const double* gyp = gy + (t * P + p) * co_n;
            for (std::size_t kt = 0; kt < kt_n; ++kt) {
                std::ptrdiff_t tt = std::ptrdiff_t(t) + std::ptrdiff_t(kt) - pt;
                if (tt < 0 || tt >= std::ptrdiff_t(T)) continue;
                const std::size_t in_off = (std::size_t(tt) * P + p) * ci_n;
                const std::size_t w_off = kt * ci_n * co_n;
                if (gx) {
                    double* gxp = gx + in_off;
                    for (std::size_t ci = 0; ci < ci_n; ++ci) {
                        const double* wrow = w + w_off + ci * co_n;
                        double s = 0.0;
#pragma omp simd reduction(+ : s)
                        for (std::size_t co = 0; co < co_n; ++co) s += wrow[co] * gyp[co];
                        gxp[ci] += s;
                    }
                }
                if (gw) {
                    const double* xp = x + in_off;
                    for (std::size_t ci = 0; ci < ci_n; ++ci) {
                        const double xv = xp[ci];
                        double* gwrow = gw + w_off + ci * co_n;
#pragma omp simd
                        for (std::size_t co = 0; co < co_n; ++co) gwrow[co] += xv * gyp[co];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor chw_to_hwc(const Tensor& x) {
    expect(x.ndim() == 3, "chw_to_hwc wants [C,H,W]");
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    Tensor out = Tensor::zeros({H, W, C});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t p = 0; p < H * W; ++p) out.data[p * C + c] = x.data[c * H * W + p];
    }
    return out;
}

Tensor hwc_to_chw(const Tensor& x) {
    expect(x.ndim() == 3, "hwc_to_chw wants [H,W,C]");
    const std::size_t H = x.dim(0), W = x.dim(1), C = x.dim(2);
    Tensor out = Tensor::zeros({C, H, W});
    for (std::size_t p = 0; p < H * W; ++p) {
        for (std::size_t c = 0; c < C; ++c) out.data[c * H * W + p] = x.data[p * C + c];
    }
    return out;
}

Tensor tchw_to_thwc(const Tensor& x) {
    expect(x.ndim() == 4, "tchw_to_thwc wants [T,C,H,W]");
    const std::size_t T = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    Tensor out = Tensor::zeros({T, x.dim(2), x.dim(3), C});
    for (std::size_t t = 0; t < T; ++t) {
        const double* src = x.ptr() + t * C * HW;
        double* dst = out.ptr() + t * C * HW;
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t p = 0; p < HW; ++p) dst[p * C + c] = src[c * HW + p];
        }
    }
    return out;
}

Tensor thwc_to_tchw(const Tensor& x) {
    expect(x.ndim() == 4, "thwc_to_tchw wants [T,H,W,C]");
    const std::size_t T = x.dim(0), HW = x.dim(1) * x.dim(2), C = x.dim(3);
    Tensor out = Tensor::zeros({T, C, x.dim(1), x.dim(2)});
    for (std::size_t t = 0; t < T; ++t) {
        const double* src = x.ptr() + t * C * HW;
        double* dst = out.ptr() + t * C * HW;
        for (std::size_t p = 0; p < HW; ++p) {
            for (std::size_t c = 0; c < C; ++c) dst[c * HW + p] = src[p * C + c];
        }
    }
    return out;
}

Var* conv2d(Tape& tp, Var* x, Var* w, Var* b) {
    expect(x->value.ndim() == 3 && w->value.ndim() == 4 && b->value.ndim() == 1,
           "conv2d shapes");
    const std::size_t H = x->value.dim(0), W = x->value.dim(1), ci = x->value.dim(2);
    const std::size_t kh = w->value.dim(0), kw = w->value.dim(1), co = w->value.dim(3);
    expect(w->value.dim(2) == ci && b->value.dim(0) == co, "conv2d channel mismatch");
    expect(kh % 2 == 1 && kw % 2 == 1, "conv2d kernel must be odd");
    Tensor y = Tensor::zeros({H, W, co});
    conv2d_fwd(x->value.ptr(), w->value.ptr(), b->value.ptr(), y.ptr(), H, W, ci, co, kh, kw);
    bool ng = x->needs_grad || w->needs_grad || b->needs_grad;
    Var* out = tp.node(std::move(y), ng, nullptr);
    if (ng) {
        out->backward = [=] {
            conv2d_bwd(x->value.ptr(), w->value.ptr(), out->grad.ptr(),
                       x->needs_grad ? x->grad.ptr() : nullptr,
                       w->needs_grad ? w->grad.ptr() : nullptr,
                       b->needs_grad ? b->grad.ptr() : nullptr, H, W, ci, co, kh, kw);
        };
    }
    return out;
}

Var* conv2d_clip(Tape& tp, Var* x, Var* w, Var* b) {
    expect(x->value.ndim() == 4 && w->value.ndim() == 4, "conv2d_clip shapes");
    const std::size_t T = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2);
    const std::size_t ci = x->value.dim(3);
    const std::size_t kh = w->value.dim(0), kw = w->value.dim(1), co = w->value.dim(3);
    expect(w->value.dim(2) == ci && b->value.dim(0) == co, "conv2d_clip channel mismatch");
    Tensor y = Tensor::zeros({T, H, W, co});
    for (std::size_t t = 0; t < T; ++t) {
        conv2d_fwd(x->value.ptr() + t * H * W * ci, w->value.ptr(), b->value.ptr(),
                   y.ptr() + t * H * W * co, H, W, ci, co, kh, kw);
    }
    bool ng = x->needs_grad || w->needs_grad || b->needs_grad;
    Var* out = tp.node(std::move(y), ng, nullptr);
    if (ng) {
        out->backward = [=] {
            for (std::size_t t = 0; t < T; ++t) {
                conv2d_bwd(x->value.ptr() + t * H * W * ci, w->value.ptr(),
                           out->grad.ptr() + t * H * W * co,
                           x->needs_grad ? x->grad.ptr() + t * H * W * ci : nullptr,
                           w->needs_grad ? w->grad.ptr() : nullptr,
                           b->needs_grad ? b->grad.ptr() : nullptr, H, W, ci, co, kh, kw);
            }
        };
    }
    return out;
}

Var* conv_time(Tape& tp, Var* x, Var* w, Var* b) {
    expect(x->value.ndim() == 4 && w->value.ndim() == 3, "conv_time shapes");
    const std::size_t T = x->value.dim(0), P = x->value.dim(1) * x->value.dim(2);
    const std::size_t ci = x->value.dim(3);
    const std::size_t kt = w->value.dim(0), co = w->value.dim(2);
    expect(w->value.dim(1) == ci && b->value.dim(0) == co, "conv_time channel mismatch");
    expect(kt % 2 == 1, "conv_time kernel must be odd");
    Tensor y = Tensor::zeros({T, x->value.dim(1), x->value.dim(2), co});
    conv_time_fwd(x->value.ptr(), w->value.ptr(), b->value.ptr(), y.ptr(), T, P, ci, co, kt);
    bool ng = x->needs_grad || w->needs_grad || b->needs_grad;
    Var* out = tp.node(std::move(y), ng, nullptr);
    if (ng) {
        out->backward = [=] {
            conv_time_bwd(x->value.ptr(), w->value.ptr(), out->grad.ptr(),
                          x->needs_grad ? x->grad.ptr() : nullptr,
                          w->needs_grad ? w->grad.ptr() : nullptr,
                          b->needs_grad ? b->grad.ptr() : nullptr, T, P, ci, co, kt);
        };
    }
    return out;
}

Var* silu(Tape& tp, Var* x) {
    Tensor y = x->value;
    for (double& v : y.data) v = v / (1.0 + std::exp(-v));
    Var* out = tp.node(std::move(y), x->needs_grad, nullptr);
    if (x->needs_grad) {
        out->backward = [=] {
            for (std::size_t i = 0; i < x->value.size(); ++i) {
                double v = x->value.data[i];
                double s = 1.0 / (1.0 + std::exp(-v));
                x->grad.data[i] += out->grad.data[i] * s * (1.0 + v * (1.0 - s));
            }
        };
    }
    return out;
}

Var* sigmoid(Tape& tp, Var* x) {
    Tensor y = x->value;
    for (double& v : y.data) v = 1.0 / (1.0 + std::exp(-v));
    Var* out = tp.node(std::move(y), x->needs_grad, nullptr);
    if (x->needs_grad) {
        out->backward = [=] {
            for (std::size_t i = 0; i < x->value.size(); ++i) {
                double s = out->value.data[i];
                x->grad.data[i] += out->grad.data[i] * s * (1.0 - s);
            }
        };
    }
    return out;
}

Var* add(Tape& tp, Var* a, Var* b) {
    expect(a->value.same_shape(b->value), "add shape mismatch");
    Tensor y = a->value;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += b->value.data[i];
    bool ng = a->needs_grad || b->needs_grad;
    Var* out = tp.node(std::move(y), ng, nullptr);
    if (ng) {
        out->backward = [=] {
            if (a->needs_grad) {
                for (std::size_t i = 0; i < a->grad.size(); ++i)
                    a->grad.data[i] += out->grad.data[i];
            }
            if (b->needs_grad) {
                for (std::size_t i = 0; i < b->grad.size(); ++i)
                    b->grad.data[i] += out->grad.data[i];
            }
        };
    }
    return out;
}

Var* affine_const(Tape& tp, Var* x, double k, Tensor c) {
    expect(x->value.same_shape(c), "affine_const shape mismatch");
    Tensor y = x->value;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = k * y.data[i] + c.data[i];
    Var* out = tp.node(std::move(y), x->needs_grad, nullptr);
    if (x->needs_grad) {
        out->backward = [=] {
            for (std::size_t i = 0; i < x->grad.size(); ++i)
                x->grad.data[i] += k * out->grad.data[i];
        };
    }
    return out;
}

Var* scale_const(Tape& tp, Var* x, double k) {
    Tensor y = x->value;
    for (double& v : y.data) v *= k;
    Var* out = tp.node(std::move(y), x->needs_grad, nullptr);
    if (x->needs_grad) {
        out->backward = [=] {
            for (std::size_t i = 0; i < x->grad.size(); ++i)
                x->grad.data[i] += k * out->grad.data[i];
        };
    }
    return out;
}

Var* gpool_hw(Tape& tp, Var* x) {
    expect(x->value.ndim() == 3, "gpool_hw wants [H,W,C]");
    const std::size_t P = x->value.dim(0) * x->value.dim(1), C = x->value.dim(2);
    Tensor y = Tensor::zeros({C});
    for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t c = 0; c < C; ++c) y.data[c] += x->value.data[p * C + c];
    }
    for (double& v : y.data) v /= double(P);
    Var* out = tp.node(std::move(y), x->needs_grad, nullptr);
    if (x->needs_grad) {
        out->backward = [=] {
            double inv = 1.0 / double(P);
            for (std::size_t p = 0; p < P; ++p) {
                for (std::size_t c = 0; c < C; ++c)
                    x->grad.data[p * C + c] += out->grad.data[c] * inv;
            }
        };
    }
    return out;
}

Var* linear(Tape& tp, Var* x, Var* w, Var* b) {
    expect(x->value.ndim() == 1 && w->value.ndim() == 2 && b->value.ndim() == 1,
           "linear shapes");
    const std::size_t n = x->value.dim(0), m = w->value.dim(1);
    expect(w->value.dim(0) == n && b->value.dim(0) == m, "linear size mismatch");
    Tensor y = b->value;
    for (std::size_t i = 0; i < n; ++i) {
        double xv = x->value.data[i];
        const double* wrow = w->value.ptr() + i * m;
        for (std::size_t o = 0; o < m; ++o) y.data[o] += xv * wrow[o];
    }
    bool ng = x->needs_grad || w->needs_grad || b->needs_grad;
    Var* out = tp.node(std::move(y), ng, nullptr);
    if (ng) {
        out->backward = [=] {
            if (b->needs_grad) {
                for (std::size_t o = 0; o < m; ++o) b->grad.data[o] += out->grad.data[o];
            }
            for (std::size_t i = 0; i < n; ++i) {
                const double* wrow = w->value.ptr() + i * m;
                if (x->needs_grad) {
                    double s = 0.0;
                    for (std::size_t o = 0; o < m; ++o) s += wrow[o] * out->grad.data[o];
                    x->grad.data[i] += s;
                }
                if (w->needs_grad) {
                    double xv = x->value.data[i];
                    double* gwrow = w->grad.ptr() + i * m;
                    for (std::size_t o = 0; o < m; ++o) gwrow[o] += xv * out->grad.data[o];
                }
            }
        };
    }
    return out;
}

Var* channel_scale(Tape& tp, Var* x, Var* s) {
    expect(s->value.ndim() == 1 && x->value.ndim() >= 1, "channel_scale shapes");
    const std::size_t C = s->value.dim(0);
    expect(x->value.shape.back() == C, "channel_scale channel mismatch");
    const std::size_t P = x->value.size() / C;
    Tensor y = x->value;
    for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t c = 0; c < C; ++c) y.data[p * C + c] *= s->value.data[c];
    }
    bool ng = x->needs_grad || s->needs_grad;
    Var* out = tp.node(std::move(y), ng, nullptr);
    if (ng) {
        out->backward = [=] {
            for (std::size_t p = 0; p < P; ++p) {
                for (std::size_t c = 0; c < C; ++c) {
                    double g = out->grad.data[p * C + c];
                    if (x->needs_grad) x->grad.data[p * C + c] += g * s->value.data[c];
                    if (s->needs_grad) s->grad.data[c] += g * x->value.data[p * C + c];
                }
            }
        };
    }
    return out;
}

Var* film(Tape& tp, Var* x, Var* ss) {
    expect(ss->value.ndim() == 1, "film params must be a vector");
    const std::size_t C = ss->value.dim(0) / 2;
    expect(C * 2 == ss->value.dim(0), "film params must have even length");
    expect(x->value.shape.back() == C, "film channel mismatch");
    const std::size_t P = x->value.size() / C;
    const double* sc = ss->value.ptr();
    const double* sh = ss->value.ptr() + C;
    Tensor y = x->value;
    for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t c = 0; c < C; ++c) {
            y.data[p * C + c] = (1.0 + sc[c]) * y.data[p * C + c] + sh[c];
        }
    }
    bool ng = x->needs_grad || ss->needs_grad;
    Var* out = tp.node(std::move(y), ng, nullptr);
    if (ng) {
        out->backward = [=] {
            const double* scv = ss->value.ptr();
            for (std::size_t p = 0; p < P; ++p) {
                for (std::size_t c = 0; c < C; ++c) {
                    double g = out->grad.data[p * C + c];
                    if (x->needs_grad) x->grad.data[p * C + c] += g * (1.0 + scv[c]);
                    if (ss->needs_grad) {
                        ss->grad.data[c] += g * x->value.data[p * C + c];
                        ss->grad.data[C + c] += g;
                    }
                }
            }
        };
    }
    return out;
}

Var* mse_const(Tape& tp, Var* a, Tensor target) {
    expect(a->value.same_shape(target), "mse_const shape mismatch");
    const std::size_t N = a->value.size();
    double v = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        double d = a->value.data[i] - target.data[i];
        v += d * d;
    }
    v /= double(N);
    Var* out = tp.node(Tensor::full({1}, v), a->needs_grad, nullptr);
    if (a->needs_grad) {
        Tensor t = std::move(target);
        out->backward = [=, t = std::move(t)] {
            double g = out->grad.data[0] * 2.0 / double(N);
            for (std::size_t i = 0; i < N; ++i) {
                a->grad.data[i] += g * (a->value.data[i] - t.data[i]);
            }
        };
    }
    return out;
}

Var* one_minus_cos_const(Tape& tp, Var* a, Tensor target) {
    expect(a->value.same_shape(target), "one_minus_cos_const shape mismatch");
    const std::size_t N = a->value.size();
    double dot = 0.0, na2 = 0.0, nt2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        dot += a->value.data[i] * target.data[i];
        na2 += a->value.data[i] * a->value.data[i];
        nt2 += target.data[i] * target.data[i];
    }
    double na = std::sqrt(na2), nt = std::sqrt(nt2);
    bool degenerate = na < 1e-12 || nt < 1e-12;
    double cosv = degenerate ? 0.0 : dot / (na * nt);
    Var* out = tp.node(Tensor::full({1}, degenerate ? 1.0 : 1.0 - cosv), a->needs_grad, nullptr);
    if (a->needs_grad && !degenerate) {
        Tensor t = std::move(target);
        out->backward = [=, t = std::move(t)] {
            double g = out->grad.data[0];
            double inv_nat = 1.0 / (na * nt), inv_na2 = 1.0 / na2;
            for (std::size_t i = 0; i < N; ++i) {
                a->grad.data[i] += g * (cosv * a->value.data[i] * inv_na2 - t.data[i] * inv_nat);
            }
        };
    }
    return out;
}

Var* frame_drift(Tape& tp, Var* x, std::size_t lag) {
    expect(x->value.ndim() == 4, "frame_drift wants [T,H,W,C]");
    const std::size_t T = x->value.dim(0), P = x->value.dim(1) * x->value.dim(2);
    const std::size_t C = x->value.dim(3);
    expect(lag >= 1 && lag < T, "frame_drift lag out of range");
    const std::size_t n_pairs = T - lag;
    Tensor y = Tensor::zeros({n_pairs, C});
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const double* f0 = x->value.ptr() + i * P * C;
        const double* f1 = x->value.ptr() + (i + lag) * P * C;
        double* yp = y.ptr() + i * C;
        for (std::size_t p = 0; p < P; ++p) {
            for (std::size_t c = 0; c < C; ++c) yp[c] += f1[p * C + c] - f0[p * C + c];
        }
        for (std::size_t c = 0; c < C; ++c) yp[c] /= double(P);
    }
    Var* out = tp.node(std::move(y), x->needs_grad, nullptr);
    if (x->needs_grad) {
        out->backward = [=] {
            double inv = 1.0 / double(P);
            for (std::size_t i = 0; i < n_pairs; ++i) {
                const double* gyp = out->grad.ptr() + i * C;
                double* g0 = x->grad.ptr() + i * P * C;
                double* g1 = x->grad.ptr() + (i + lag) * P * C;
                for (std::size_t p = 0; p < P; ++p) {
                    for (std::size_t c = 0; c < C; ++c) {
                        double g = gyp[c] * inv;
                        g1[p * C + c] += g;
                        g0[p * C + c] -= g;
                    }
                }
            }
        };
    }
    return out;
}

Var* stack_rows(Tape& tp, const std::vector<Var*>& blocks) {
    expect(!blocks.empty(), "stack_rows needs at least one block");
    const std::size_t C = blocks[0]->value.dim(1);
    std::size_t rows = 0;
    bool ng = false;
    for (Var* b : blocks) {
        expect(b->value.ndim() == 2 && b->value.dim(1) == C, "stack_rows block shape");
        rows += b->value.dim(0);
        ng = ng || b->needs_grad;
    }
    Tensor y = Tensor::zeros({rows, C});
    std::size_t at = 0;
    for (Var* b : blocks) {
        std::copy(b->value.data.begin(), b->value.data.end(), y.data.begin() + at);
        at += b->value.size();
    }
    Var* out = tp.node(std::move(y), ng, nullptr);
    if (ng) {
        std::vector<Var*> parents = blocks;
        out->backward = [=] {
            std::size_t off = 0;
            for (Var* b : parents) {
                if (b->needs_grad) {
                    for (std::size_t i = 0; i < b->grad.size(); ++i) {
                        b->grad.data[i] += out->grad.data[off + i];
                    }
                }
                off += b->value.size();
            }
        };
    }
    return out;
}

Var* weighted_sum(Tape& tp, const std::vector<Var*>& xs, const std::vector<double>& ws) {
    expect(!xs.empty() && xs.size() == ws.size(), "weighted_sum sizes");
    double v = 0.0;
    bool ng = false;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        expect(xs[k]->value.size() == 1, "weighted_sum wants scalars");
        v += ws[k] * xs[k]->value.data[0];
        ng = ng || xs[k]->needs_grad;
    }
    Var* out = tp.node(Tensor::full({1}, v), ng, nullptr);
    if (ng) {
        std::vector<Var*> parents = xs;
        std::vector<double> weights = ws;
        out->backward = [=] {
            for (std::size_t k = 0; k < parents.size(); ++k) {
                if (parents[k]->needs_grad) {
                    parents[k]->grad.data[0] += weights[k] * out->grad.data[0];
                }
            }
        };
    }
    return out;
}

}  // namespace lamo::nn
