#include <doctest.h>

#include <cmath>
#include <limits>

#include "tbtwin/analytic.hpp"

using namespace tbtwin;
using namespace tbtwin::analytic;

namespace {

// quadrature oracle for tail probabilities, independent of the closed forms
double mixture_mass_outside(double half_window, double sigma, double w, double b) {
    auto f = [&](double t) {
        const double g =
            std::exp(-t * t / (2.0 * sigma * sigma)) / (sigma * std::sqrt(2.0 * kPi));
        const double l = std::exp(-std::fabs(t) / b) / (2.0 * b);
        return (1.0 - w) * g + w * l;
    };
    // Simpson over [-h, h], mass outside = 1 - inside
    const int n = 40000;
    const double h = half_window;
    double sum = f(-h) + f(h);
    for (int k = 1; k < n; ++k) {
        const double x = -h + 2.0 * h * k / n;
        sum += (k % 2 ? 4.0 : 2.0) * f(x);
    }
    const double inside = sum * (2.0 * h / n) / 3.0;
    return 1.0 - inside;
}

} // namespace

TEST_CASE("fringe law values") {
    CHECK(coincidence_fringe(0.7, 0.7, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(coincidence_fringe(0.7 + kPi, 0.7, 0.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(coincidence_fringe(0.7 + kPi, 0.7, 0.01) == doctest::Approx(0.01).epsilon(1e-9));
    CHECK_THROWS_AS(coincidence_fringe(0.0, 0.0, 0.7), DomainError);
}

TEST_CASE("fringe law has visibility exactly 1 - 2 eps") {
    for (double eps : {0.0, 0.01, 0.1, 0.3}) {
        double lo = 1.0, hi = 0.0;
        const double phi = 0.37;
        for (int k = 0; k < 64; ++k) {
            const double p = coincidence_fringe(phi + kPi * k / 32.0, phi, eps);
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
        const double vis = (hi - lo) / (hi + lo);
        CHECK(std::fabs(vis - (1.0 - 2.0 * eps)) < 1e-12);
    }
}

TEST_CASE("car estimate at the reference operating point") {
    const double eta = 1.0024e-3;
    const double car = estimate_car(0.03, eta, eta, 3e-6, 3e-6);
    // plug-in arithmetic oracle
    const double p_acc = (0.03 * eta + 3e-6) * (0.03 * eta + 3e-6);
    const double expect = (0.03 * eta * eta + p_acc) / p_acc;
    CHECK(car == doctest::Approx(expect).epsilon(1e-12));
    CHECK(car == doctest::Approx(28.5).epsilon(0.01));
}

TEST_CASE("car estimate limits") {
    CHECK(estimate_car(0.03, 0.5, 0.5, 0.0, 0.0) ==
          doctest::Approx(1.0 + 1.0 / 0.03).epsilon(1e-12));
    CHECK(estimate_car(1e-15, 0.5, 0.5, 1e-6, 1e-6) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::isinf(estimate_car(0.0, 0.5, 0.5, 0.0, 0.0)));
}

TEST_CASE("car estimate monotone decreasing in dark counts") {
    double prev = std::numeric_limits<double>::infinity();
    for (double dark : {0.0, 1e-6, 3e-6, 1e-5, 1e-4}) {
        const double car = estimate_car(0.03, 1e-3, 1e-3, dark, dark);
        CHECK(car < prev);
        prev = car;
    }
}

TEST_CASE("visibility from car") {
    CHECK(visibility_from_car(1.0) == doctest::Approx(0.0).scale(1.0));
    CHECK(visibility_from_car(26.0) == doctest::Approx(25.0 / 27.0).epsilon(1e-12));
    CHECK(visibility_from_car(26.0) == doctest::Approx(0.9259).epsilon(1e-4));
    CHECK(visibility_from_car(std::numeric_limits<double>::infinity()) == 1.0);
    CHECK_THROWS_AS(visibility_from_car(0.5), DomainError);
}

TEST_CASE("visibility_from_car composed with estimate_car, dark-free") {
    for (double mu : {0.01, 0.03, 0.2}) {
        const double v = visibility_from_car(estimate_car(mu, 0.3, 0.4, 0.0, 0.0));
        CHECK(v == doctest::Approx(1.0 / (1.0 + 2.0 * mu)).epsilon(1e-12));
    }
}

TEST_CASE("flux chain reproduces the reference figures") {
    const auto budget = LossBudget::table_default();
    const auto f = pair_flux(0.03, 1.0e10, budget, 0.02);
    CHECK(f.source_hz == doctest::Approx(3.0e8).epsilon(1e-12));
    CHECK(f.detected_hz == doctest::Approx(301.43).epsilon(1e-3));
    const auto ideal = pair_flux(0.03, 1.0e10, budget, 1.0);
    CHECK(ideal.detected_hz == doctest::Approx(753566.0).epsilon(1e-3));
    LossBudget improved = budget;
    improved.items[0].loss_db -= 7.0;
    const auto brighter = pair_flux(0.03, 1.0e10, improved, 1.0);
    CHECK(brighter.detected_hz == doctest::Approx(3.7768e6).epsilon(1e-3));
}

TEST_CASE("flux chain: empty budget and arm-split modes") {
    LossBudget empty;
    const auto f = pair_flux(0.03, 1.0e10, empty, 0.02);
    CHECK(f.detected_hz == doctest::Approx(3.0e8 * 0.02 * 0.02).epsilon(1e-12));
    LossBudget per_arm;
    per_arm.items = {{"all", 13.0}};
    per_arm.arm_split = ArmSplit::per_arm_total;
    LossBudget split;
    split.items = {{"all", 26.0}};
    split.arm_split = ArmSplit::split_evenly;
    CHECK(pair_flux(0.03, 1e10, per_arm, 0.02).detected_hz ==
          doctest::Approx(pair_flux(0.03, 1e10, split, 0.02).detected_hz).epsilon(1e-12));
}

TEST_CASE("flux chain invariances") {
    LossBudget a;
    a.items = {{"x", 9.0}, {"y", 12.0}, {"z", 5.0}};
    LossBudget b;
    b.items = {{"x", 3.0}, {"y", 3.0}, {"z", 20.0}};
    CHECK(pair_flux(0.05, 1e10, a, 0.1).detected_hz ==
          doctest::Approx(pair_flux(0.05, 1e10, b, 0.1).detected_hz).epsilon(1e-12));
    const double base = pair_flux(0.05, 1e10, a, 0.1).detected_hz;
    const double scaled = pair_flux(0.05, 1e10, a, 0.3).detected_hz;
    CHECK(scaled / base == doctest::Approx(9.0).epsilon(1e-12));
}

TEST_CASE("jitter leakage: gaussian closed form vs quadrature") {
    JitterSpec g;
    g.model = JitterModel::gaussian;
    g.fwhm_ps = 80.0;
    const double leak = jitter_leakage(g, 100.0);
    CHECK(leak == doctest::Approx(0.141).epsilon(2e-3));
    const double sigma = 80.0 / kGaussFwhmPerSigma;
    CHECK(leak == doctest::Approx(mixture_mass_outside(50.0, sigma, 0.0, 1.0)).epsilon(1e-6));
}

TEST_CASE("jitter leakage: trivials and monotonicity") {
    JitterSpec none;
    CHECK(jitter_leakage(none, 10.0) == 0.0);
    JitterSpec g;
    g.model = JitterModel::gaussian;
    g.fwhm_ps = 80.0;
    CHECK(jitter_leakage(g, 1e9) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    double prev = 1.0;
    for (double win : {40.0, 75.0, 100.0, 200.0, 400.0}) {
        const double leak = jitter_leakage(g, win);
        CHECK(leak < prev);
        prev = leak;
    }
    double prev_w = 0.0;
    for (double fwhm : {20.0, 40.0, 80.0, 160.0}) {
        JitterSpec j;
        j.model = JitterModel::gaussian;
        j.fwhm_ps = fwhm;
        const double leak = jitter_leakage(j, 75.0);
        CHECK(leak > prev_w);
        prev_w = leak;
    }
}

TEST_CASE("calibrate: gaussian ratio returns a pure gaussian") {
    const auto spec = calibrate_jitter(80.0, 145.8);
    CHECK(spec.model == JitterModel::gaussian);
    CHECK(spec.fwhm_ps == doctest::Approx(80.0));
    CHECK(jitter_core_sigma(spec) == doctest::Approx(33.9729).epsilon(1e-4));
}

TEST_CASE("calibrate: heavy tail hits both width targets") {
    const auto spec = calibrate_jitter(80.0, 200.0);
    REQUIRE(spec.model == JitterModel::gaussian_exp_tail);
    CHECK(spec.tail_weight > 0.0);
    CHECK(spec.tail_weight < 0.5);
    // verify by direct density evaluation
    const double sigma = jitter_core_sigma(spec);
    auto density = [&](double t) {
        const double g =
            std::exp(-t * t / (2.0 * sigma * sigma)) / (sigma * std::sqrt(2.0 * kPi));
        const double l = std::exp(-std::fabs(t) / spec.tail_scale_ps) /
                         (2.0 * spec.tail_scale_ps);
        return (1.0 - spec.tail_weight) * g + spec.tail_weight * l;
    };
    const double peak = density(0.0);
    auto width_at = [&](double frac) {
        double t = 0.0;
        while (density(t) > frac * peak) t += 0.001;
        return 2.0 * t;
    };
    const double fwhm = width_at(0.5);
    const double fwtm = width_at(0.1);
    CHECK(std::fabs(fwhm - 80.0) / 80.0 < 0.02);
    CHECK(fwtm > 190.0);
    CHECK(fwtm < 210.0);
}

TEST_CASE("calibrate: infeasible targets") {
    CHECK_THROWS_AS(calibrate_jitter(80.0, 100.0), NoSolution);
    CHECK_THROWS_AS(calibrate_jitter(80.0, 400.0), NoSolution);
}

TEST_CASE("predict visibility") {
    CHECK(predict_visibility(1.0, 0.0, 0.0) == doctest::Approx(1.0));
    CHECK(predict_visibility(0.926, 0.0, 0.01) == doctest::Approx(0.907).epsilon(1e-3));
    CHECK(predict_visibility(0.926, 0.05, 0.01) == doctest::Approx(0.821).epsilon(1e-3));
}

TEST_CASE("bell threshold") {
    CHECK(is_bell_violating(0.8532));
    CHECK_FALSE(is_bell_violating(0.70));
    CHECK_FALSE(is_bell_violating(1.0 / std::sqrt(2.0)));
}
