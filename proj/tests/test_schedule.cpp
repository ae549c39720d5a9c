#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lamo/rng.hpp"
#include "lamo/schedule.hpp"

using namespace lamo;

TEST_CASE("linear-beta first step") {
    NoiseSchedule s = build_schedule(ScheduleKind::linear_beta, 1000);
    CHECK(s.abar(1) == doctest::Approx(1.0 - 1e-4).epsilon(1e-14));
    CHECK(s.abar(1) >= 0.99);
    CHECK(s.abar(1000) <= 0.01);
}

TEST_CASE("sigma identity holds per entry for both kinds") {
    for (auto kind : {ScheduleKind::linear_beta, ScheduleKind::cosine}) {
        NoiseSchedule s = build_schedule(kind, 1000);
        for (std::size_t t = 1; t <= 1000; ++t) {
            CHECK(std::fabs(s.sig(t) * s.sig(t) + s.abar(t) - 1.0) <= 1e-15);
        }
    }
}

TEST_CASE("cosine schedule is monotone non-increasing") {
    NoiseSchedule s = build_schedule(ScheduleKind::cosine, 1000);
    for (std::size_t t = 2; t <= 1000; ++t) CHECK(s.abar(t) <= s.abar(t - 1));
    CHECK(s.abar(1) >= 0.99);
    CHECK(s.abar(1000) <= 0.01);
}

TEST_CASE("s_train below 2 is rejected") {
    CHECK_THROWS_AS(build_schedule(ScheduleKind::linear_beta, 1), std::invalid_argument);
}

TEST_CASE("forward_diffuse at sigma=0-like settings") {
    NoiseSchedule s = build_schedule(ScheduleKind::linear_beta, 1000);
    RngStream rng(3);
    Tensor z0 = Tensor::zeros({2, 2});
    Tensor eps = Tensor::zeros({2, 2});
    for (double& v : z0.data) v = rng.normal();

    // eps = 0 leaves only the sqrt(abar) z0 term
    Tensor z = forward_diffuse(z0, 400, eps, s);
    for (std::size_t i = 0; i < z.size(); ++i) {
        CHECK(z.data[i] == doctest::Approx(std::sqrt(s.abar(400)) * z0.data[i]).epsilon(1e-15));
    }
}

TEST_CASE("forward_diffuse matches elementwise scalar recompute") {
    NoiseSchedule s = build_schedule(ScheduleKind::linear_beta, 1000);
    RngStream rng(4);
    Tensor z0 = Tensor::zeros({3, 4, 5});
    Tensor eps = Tensor::zeros({3, 4, 5});
    for (double& v : z0.data) v = rng.normal();
    for (double& v : eps.data) v = rng.normal();
    Tensor z = forward_diffuse(z0, 500, eps, s);
    double a = std::sqrt(s.abar(500)), sg = s.sig(500);
    for (std::size_t i = 0; i < z.size(); ++i) {
        REQUIRE(z.data[i] == a * z0.data[i] + sg * eps.data[i]);
    }
    CHECK_THROWS_AS(forward_diffuse(z0, 500, Tensor::zeros({2}), s), std::invalid_argument);
    CHECK_THROWS_AS(forward_diffuse(z0, 0, eps, s), std::invalid_argument);
    CHECK_THROWS_AS(forward_diffuse(z0, 1001, eps, s), std::invalid_argument);
}

TEST_CASE("xhat0 inverts the forward process under the true model output") {
    RngStream rng(5);
    for (auto param : {Parameterization::epsilon, Parameterization::v}) {
        NoiseSchedule s = build_schedule(ScheduleKind::linear_beta, 1000, param);
        for (std::size_t t : {std::size_t(1), std::size_t(333), std::size_t(999)}) {
            Tensor z0 = Tensor::zeros({2, 3});
            Tensor eps = Tensor::zeros({2, 3});
            for (double& v : z0.data) v = rng.normal();
            for (double& v : eps.data) v = rng.normal();
            Tensor z_t = forward_diffuse(z0, t, eps, s);
            Tensor out = eps;
            if (param == Parameterization::v) {
                double a = std::sqrt(s.abar(t)), sg = s.sig(t);
                for (std::size_t i = 0; i < out.size(); ++i) {
                    out.data[i] = a * eps.data[i] - sg * z0.data[i];
                }
            }
            Tensor rec = xhat0(out, z_t, t, s);
            for (std::size_t i = 0; i < rec.size(); ++i) {
                CHECK(rec.data[i] == doctest::Approx(z0.data[i]).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("xhat0 guards the ill-conditioned epsilon projection") {
    NoiseSchedule s = build_schedule(ScheduleKind::linear_beta, 1000);
    s.alpha_bar[499] = 1e-13;  // force the guard
    Tensor z = Tensor::zeros({2});
    CHECK_THROWS_AS(xhat0(z, z, 500, s), std::runtime_error);
}

TEST_CASE("xhat0 output coefficient matches finite differences") {
    RngStream rng(6);
    for (auto param : {Parameterization::epsilon, Parameterization::v}) {
        NoiseSchedule s = build_schedule(ScheduleKind::linear_beta, 1000, param);
        const std::size_t t = 700;
        Tensor z_t = Tensor::zeros({4});
        Tensor out = Tensor::zeros({4});
        for (double& v : z_t.data) v = rng.normal();
        for (double& v : out.data) v = rng.normal();
        const double h = 1e-6;
        Tensor up = out, dn = out;
        up.data[2] += h;
        dn.data[2] -= h;
        double fd = (xhat0(up, z_t, t, s).data[2] - xhat0(dn, z_t, t, s).data[2]) / (2 * h);
        double expect = param == Parameterization::epsilon
                            ? -s.sig(t) / std::sqrt(s.abar(t))
                            : -s.sig(t);
        CHECK(fd == doctest::Approx(expect).epsilon(1e-8));
        CHECK(xhat0_out_coeff(t, s) == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("schedule_weight averages abar over the batch") {
    NoiseSchedule s = build_schedule(ScheduleKind::linear_beta, 1000);
    s.alpha_bar[10] = 0.2;
    s.alpha_bar[20] = 0.4;
    CHECK(schedule_weight({11, 21}, s) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(schedule_weight({11}, s) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK_THROWS_AS(schedule_weight({}, s), std::invalid_argument);
    // near-maximal noise drives the weight toward zero
    CHECK(schedule_weight({1000}, build_schedule(ScheduleKind::linear_beta, 1000)) < 1e-3);
}
