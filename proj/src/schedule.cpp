#include "lamo/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace lamo {

std::string to_string(ScheduleKind k) {
    return k == ScheduleKind::linear_beta ? "linear-beta" : "cosine";
}

std::string to_string(Parameterization p) {
    return p == Parameterization::epsilon ? "epsilon" : "v";
}

ScheduleKind schedule_kind_from(const std::string& s) {
    if (s == "linear-beta") return ScheduleKind::linear_beta;
    if (s == "cosine") return ScheduleKind::cosine;
    throw std::invalid_argument("unknown schedule kind: " + s);
}

Parameterization parameterization_from(const std::string& s) {
    if (s == "epsilon" || s == "eps") return Parameterization::epsilon;
    if (s == "v") return Parameterization::v;
    throw std::invalid_argument("unknown parameterization: " + s);
}

NoiseSchedule build_schedule(ScheduleKind kind, std::size_t s_train, Parameterization param) {
    if (s_train < 2) throw std::invalid_argument("build_schedule: s_train must be >= 2");
    NoiseSchedule sched;
    sched.s_train = s_train;
    sched.param = param;
    sched.alpha_bar.resize(s_train);
    sched.sigma.resize(s_train);
    if (kind == ScheduleKind::linear_beta) {
        const double beta_lo = 1e-4, beta_hi = 2e-2;
        double abar = 1.0;
        for (std::size_t t = 0; t < s_train; ++t) {
            double beta = beta_lo + (beta_hi - beta_lo) * double(t) / double(s_train - 1);
            abar *= 1.0 - beta;
            sched.alpha_bar[t] = abar;
        }
    } else {
        // squared-cosine cumulative schedule, offset 0.008; floor keeps the
        // epsilon-mode projection usable at t = s_train
        const double s = 0.008;
        auto f = [&](double u) {
            double v = std::cos((u + s) / (1.0 + s) * 3.14159265358979323846 / 2.0);
            return v * v;
        };
        double f0 = f(0.0);
        double prev = 1.0;
        for (std::size_t t = 0; t < s_train; ++t) {
            double abar = f(double(t + 1) / double(s_train)) / f0;
            abar = std::max(abar, 1e-8);
            abar = std::min(abar, prev);
            sched.alpha_bar[t] = abar;
            prev = abar;
        }
    }
    for (std::size_t t = 0; t < s_train; ++t) {
        sched.sigma[t] = std::sqrt(1.0 - sched.alpha_bar[t]);
    }
    return sched;
}

static void check_t(std::size_t t, const NoiseSchedule& sched, const char* who) {
    if (t < 1 || t > sched.s_train) {
        throw std::invalid_argument(std::string(who) + ": timestep " + std::to_string(t) +
                                    " outside [1, " + std::to_string(sched.s_train) + "]");
    }
}

Tensor forward_diffuse(const Tensor& z0, std::size_t t, const Tensor& eps,
                       const NoiseSchedule& sched) {
    check_t(t, sched, "forward_diffuse");
    if (!z0.same_shape(eps)) {
        throw std::invalid_argument("forward_diffuse: shape mismatch " + shape_str(z0.shape) +
                                    " vs " + shape_str(eps.shape));
    }
    double a = std::sqrt(sched.abar(t)), s = sched.sig(t);
    Tensor out = z0;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a * z0.data[i] + s * eps.data[i];
    return out;
}

Tensor xhat0(const Tensor& model_out, const Tensor& z_t, std::size_t t,
             const NoiseSchedule& sched) {
    check_t(t, sched, "xhat0");
    if (!model_out.same_shape(z_t)) {
        throw std::invalid_argument("xhat0: shape mismatch " + shape_str(model_out.shape) +
                                    " vs " + shape_str(z_t.shape));
    }
    double abar = sched.abar(t), s = sched.sig(t);
    Tensor out = z_t;
    if (sched.param == Parameterization::epsilon) {
        if (abar < 1e-12) {
            throw std::runtime_error("xhat0: projection ill-conditioned at t=" +
                                     std::to_string(t));
        }
        double inv = 1.0 / std::sqrt(abar);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out.data[i] = (z_t.data[i] - s * model_out.data[i]) * inv;
        }
    } else {
        double a = std::sqrt(abar);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out.data[i] = a * z_t.data[i] - s * model_out.data[i];
        }
    }
    return out;
}

double xhat0_out_coeff(std::size_t t, const NoiseSchedule& sched) {
    check_t(t, sched, "xhat0_out_coeff");
    double abar = sched.abar(t), s = sched.sig(t);
    if (sched.param == Parameterization::epsilon) {
        if (abar < 1e-12) {
            throw std::runtime_error("xhat0_out_coeff: projection ill-conditioned at t=" +
                                     std::to_string(t));
        }
        return -s / std::sqrt(abar);
    }
    return -s;
}

double xhat0_zt_coeff(std::size_t t, const NoiseSchedule& sched) {
    check_t(t, sched, "xhat0_zt_coeff");
    double abar = sched.abar(t);
    if (sched.param == Parameterization::epsilon) {
        if (abar < 1e-12) {
            throw std::runtime_error("xhat0_zt_coeff: projection ill-conditioned at t=" +
                                     std::to_string(t));
        }
        return 1.0 / std::sqrt(abar);
    }
    return std::sqrt(abar);
}

double schedule_weight(const std::vector<std::size_t>& ts, const NoiseSchedule& sched) {
    if (ts.empty()) throw std::invalid_argument("schedule_weight: empty batch");
    double s = 0.0;
    for (std::size_t t : ts) {
        check_t(t, sched, "schedule_weight");
        s += sched.abar(t);
    }
    return s / double(ts.size());
}

}  // namespace lamo
