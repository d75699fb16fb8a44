#include <doctest.h>

#include <cmath>
#include <map>

#include "tbtwin/analysis.hpp"
#include "tbtwin/rng.hpp"

using namespace tbtwin;
using namespace tbtwin::analysis;

namespace {

mc::TimestampStream stream_of(std::vector<std::int64_t> times) {
    mc::TimestampStream s;
    s.times_ps = std::move(times);
    s.span_ps = s.times_ps.empty() ? 0 : s.times_ps.back();
    return s;
}

// O(n*m) enumeration oracle
std::vector<long long> brute_force_hist(const std::vector<std::int64_t>& starts,
                                        const std::vector<std::int64_t>& stops,
                                        double width, double lo, double hi) {
    const auto bins = static_cast<std::size_t>(std::llround((hi - lo) / width));
    std::vector<long long> counts(bins, 0);
    for (const auto t : starts)
        for (const auto u : stops) {
            const double d = static_cast<double>(u - t);
            if (d >= lo && d < hi) ++counts[static_cast<std::size_t>((d - lo) / width)];
        }
    return counts;
}

CoincidenceHistogram gaussian_histogram(double sigma, double amplitude, double width,
                                        double half_range) {
    CoincidenceHistogram hist;
    hist.bin_width_ps = width;
    hist.range_min_ps = -half_range;
    hist.range_max_ps = half_range;
    const auto bins = static_cast<std::size_t>(std::llround(2.0 * half_range / width));
    hist.counts.resize(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        const double t = hist.bin_center(k);
        hist.counts[k] =
            static_cast<long long>(std::llround(amplitude * std::exp(-t * t / (2 * sigma * sigma))));
    }
    hist.n_starts = 1;
    return hist;
}

} // namespace

TEST_CASE("histogram: single start, single stop") {
    const auto hist =
        build_histogram(stream_of({0}), stream_of({30}), 10.0, 0.0, 100.0);
    REQUIRE(hist.counts.size() == 10);
    CHECK(hist.counts[3] == 1);
    CHECK(hist.total() == 1);
    CHECK(hist.n_starts == 1);
}

TEST_CASE("histogram: pair enumeration with range clipping") {
    // delays: 0, +100, -100, 0; the -100 entry falls outside the range
    const auto hist = build_histogram(stream_of({0, 100}), stream_of({0, 100}), 10.0,
                                      -50.0, 150.0);
    std::map<double, long long> nonzero;
    for (std::size_t k = 0; k < hist.counts.size(); ++k)
        if (hist.counts[k]) nonzero[hist.bin_center(k)] = hist.counts[k];
    REQUIRE(nonzero.size() == 2);
    CHECK(nonzero[5.0] == 2);    // bin [0,10)
    CHECK(nonzero[105.0] == 1);  // bin [100,110)
}

TEST_CASE("histogram: equals brute-force enumeration") {
    rng::Stream rng(42);
    for (int trial = 0; trial < 8; ++trial) {
        std::vector<std::int64_t> starts, stops;
        const int n = 200 + static_cast<int>(rng.next_below(1800));
        const int m = 200 + static_cast<int>(rng.next_below(1800));
        std::int64_t t = 0;
        for (int k = 0; k < n; ++k) starts.push_back(t += rng.next_below(400));
        t = 0;
        for (int k = 0; k < m; ++k) stops.push_back(t += rng.next_below(400));
        const double width = 25.0, lo = -1000.0, hi = 1500.0;
        const auto hist = build_histogram(stream_of(starts), stream_of(stops), width, lo, hi);
        CHECK(hist.counts == brute_force_hist(starts, stops, width, lo, hi));
    }
}

TEST_CASE("histogram: first-stop mode keeps one entry per start") {
    const auto hist = build_histogram(stream_of({0}), stream_of({5, 7, 9}), 10.0, 0.0,
                                      100.0, true);
    CHECK(hist.total() == 1);
}

TEST_CASE("histogram: invalid ranges") {
    CHECK_THROWS_AS(build_histogram(stream_of({}), stream_of({}), 10.0, 0.0, 105.0),
                    DomainError);
    CHECK_THROWS_AS(build_histogram(stream_of({}), stream_of({}), 0.0, 0.0, 100.0),
                    DomainError);
}

TEST_CASE("histogram: empty streams give an empty histogram") {
    const auto hist = build_histogram(stream_of({}), stream_of({}), 10.0, 0.0, 100.0);
    CHECK(hist.total() == 0);
    CHECK(hist.n_starts == 0);
}

TEST_CASE("car: uniform histogram gives 1") {
    CoincidenceHistogram hist;
    hist.bin_width_ps = 1.0;
    hist.range_min_ps = -850.5;
    hist.range_max_ps = 849.5;
    hist.counts.assign(1700, 3);
    hist.n_starts = 1000;
    const auto car = car_from_histogram(hist, 100.0, 75.0, 1);
    CHECK(car.car == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("car: synthetic 260-over-10 histogram reads 26") {
    CoincidenceHistogram hist;
    hist.bin_width_ps = 1.0;
    hist.range_min_ps = -850.5;
    hist.range_max_ps = 849.5;
    hist.counts.assign(1700, 0);
    auto put_slot = [&](double center, long long total) {
        // spread the slot's counts evenly over its 75-ps window
        int filled = 0;
        for (std::size_t k = 0; k < hist.counts.size(); ++k) {
            const double c = hist.bin_center(k);
            if (c >= center - 37.5 && c < center + 37.5) {
                hist.counts[k] += total / 75;
                ++filled;
            }
        }
        REQUIRE(filled == 75);
        // remainder into the center bin
        for (std::size_t k = 0; k < hist.counts.size(); ++k)
            if (hist.bin_center(k) == center) hist.counts[k] += total % 75;
    };
    put_slot(0.0, 260);
    for (int k = 2; k <= 8; ++k) {
        put_slot(k * 100.0, 10);
        put_slot(-k * 100.0, 10);
    }
    const auto car = car_from_histogram(hist, 100.0, 75.0, 1);
    CHECK(car.true_counts == 260);
    CHECK(car.accidental_counts_mean == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(car.car == doctest::Approx(26.0).epsilon(1e-12));
}

TEST_CASE("car: uniform background strictly lowers a correlated ratio") {
    CoincidenceHistogram hist;
    hist.bin_width_ps = 1.0;
    hist.range_min_ps = -850.5;
    hist.range_max_ps = 849.5;
    hist.counts.assign(1700, 2);
    for (std::size_t k = 0; k < hist.counts.size(); ++k)
        if (std::fabs(hist.bin_center(k)) < 37.5) hist.counts[k] += 40;
    const double before = car_from_histogram(hist, 100.0, 75.0, 1).car;
    for (auto& c : hist.counts) c += 5;
    const double after = car_from_histogram(hist, 100.0, 75.0, 1).car;
    CHECK(before > 1.0);
    CHECK(after < before);
}

TEST_CASE("car: zero accidental floor returns the infinity sentinel") {
    CoincidenceHistogram hist;
    hist.bin_width_ps = 1.0;
    hist.range_min_ps = -850.5;
    hist.range_max_ps = 849.5;
    hist.counts.assign(1700, 0);
    for (std::size_t k = 0; k < hist.counts.size(); ++k)
        if (std::fabs(hist.bin_center(k)) < 37.5) hist.counts[k] = 10;
    const auto car = car_from_histogram(hist, 100.0, 75.0, 1);
    CHECK(car.zero_accidental);
    CHECK(std::isinf(car.car));
}

TEST_CASE("car: needs enough unmatched slots") {
    CoincidenceHistogram hist;
    hist.bin_width_ps = 1.0;
    hist.range_min_ps = -150.5;
    hist.range_max_ps = 149.5;
    hist.counts.assign(300, 1);
    CHECK_THROWS_AS(car_from_histogram(hist, 100.0, 75.0, 1), DomainError);
}

TEST_CASE("widths: exact gaussian histogram") {
    const auto hist = gaussian_histogram(33.9729, 100000.0, 0.5, 400.0);
    const auto w = fwhm_fwtm(hist);
    CHECK(w.fwhm_ps == doctest::Approx(80.0).epsilon(0.02));
    CHECK(w.fwtm_ps == doctest::Approx(145.8).epsilon(0.02));
}

TEST_CASE("widths: scale covariance") {
    const auto a = fwhm_fwtm(gaussian_histogram(40.0, 50000.0, 0.5, 500.0));
    const auto b = fwhm_fwtm(gaussian_histogram(20.0, 50000.0, 0.5, 500.0));
    CHECK(a.fwhm_ps / b.fwhm_ps == doctest::Approx(2.0).epsilon(0.02));
    CHECK(a.fwtm_ps / b.fwtm_ps == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("widths: flat histogram has no peak") {
    CoincidenceHistogram hist;
    hist.bin_width_ps = 1.0;
    hist.range_min_ps = -100.0;
    hist.range_max_ps = 100.0;
    hist.counts.assign(200, 7);
    CHECK_THROWS_AS(fwhm_fwtm(hist), NoPeak);
}

TEST_CASE("fit: exact recovery of a noiseless fringe") {
    FringeScan scan;
    const double a = 100.0, v = 0.8, phi0 = 0.3;
    for (int k = 0; k < 12; ++k) {
        const double theta = 2.0 * kPi * k / 12.0;
        const double c = a * (1.0 + v * std::cos(theta + phi0));
        scan.points.push_back({theta, static_cast<long long>(std::llround(c * 1000)), 1});
    }
    // counts scaled by 1000 to keep rounding error below the tolerance
    const auto fit = fit_visibility(scan);
    CHECK(fit.visibility == doctest::Approx(v).epsilon(1e-5));
    CHECK(fit.amplitude == doctest::Approx(a * 1000).epsilon(1e-5));
    CHECK(fit.phase_offset_rad == doctest::Approx(phi0).epsilon(1e-4));
    CHECK_FALSE(fit.degenerate);
}

TEST_CASE("fit: poisson replicates are unbiased and the error bar is honest") {
    rng::Stream rng(2024);
    const double a = 160.0, v_true = 0.85;
    const int points = 10, reps = 500;
    double sum_v = 0.0, sum_v2 = 0.0, sum_sigma = 0.0;
    for (int r = 0; r < reps; ++r) {
        FringeScan scan;
        for (int k = 0; k < points; ++k) {
            const double theta = 2.0 * kPi * k / points;
            const double mean = a * (1.0 + v_true * std::cos(theta + 0.4));
            scan.points.push_back({theta, rng.next_poisson(mean), 1});
        }
        const auto fit = fit_visibility(scan);
        sum_v += fit.visibility;
        sum_v2 += fit.visibility * fit.visibility;
        sum_sigma += fit.visibility_sigma;
    }
    const double mean_v = sum_v / reps;
    const double scatter = std::sqrt(sum_v2 / reps - mean_v * mean_v);
    const double mean_sigma = sum_sigma / reps;
    CHECK(std::fabs(mean_v - v_true) < 0.01);
    CHECK(std::fabs(mean_sigma - scatter) / scatter < 0.20);
}

TEST_CASE("fit: max-min estimator agrees with a dense noiseless fringe") {
    const double cmax = 100.0, cmin = 10.0;
    const double v_ratio = (cmax - cmin) / (cmax + cmin);
    FringeScan scan;
    const double a = (cmax + cmin) / 2.0;
    for (int k = 0; k < 24; ++k) {
        const double theta = 2.0 * kPi * k / 24.0;
        const double c = a * (1.0 + v_ratio * std::cos(theta));
        scan.points.push_back({theta, static_cast<long long>(std::llround(c * 100)), 1});
    }
    const auto fit = fit_visibility(scan);
    CHECK(fit.visibility == doctest::Approx(v_ratio).epsilon(1e-3));
    CHECK(fit.visibility == doctest::Approx(0.818).epsilon(1e-2));
}

TEST_CASE("fit: scaling counts leaves V fixed and shrinks sigma like 1/sqrt") {
    rng::Stream rng(77);
    FringeScan small;
    for (int k = 0; k < 12; ++k) {
        const double theta = 2.0 * kPi * k / 12.0;
        const double mean = 50.0 * (1.0 + 0.7 * std::cos(theta + 1.0));
        small.points.push_back({theta, rng.next_poisson(mean), 1000});
    }
    FringeScan big = small;
    const int factor = 16;
    for (auto& p : big.points) {
        p.coincidences *= factor;
        p.n_starts *= factor;
    }
    const auto fs = fit_visibility(small);
    const auto fb = fit_visibility(big);
    CHECK(fb.visibility == doctest::Approx(fs.visibility).epsilon(1e-9));
    CHECK(fb.visibility_sigma / fs.visibility_sigma ==
          doctest::Approx(1.0 / std::sqrt(static_cast<double>(factor))).epsilon(0.05));
}

TEST_CASE("fit: degenerate cases") {
    FringeScan scan;
    for (int k = 0; k < 6; ++k)
        scan.points.push_back({2.0 * kPi * k / 6.0, 40, 1});
    const auto fit = fit_visibility(scan);
    CHECK(fit.degenerate);
    CHECK(fit.visibility == 0.0);
    FringeScan tiny;
    tiny.points.assign(3, {0.0, 1, 1});
    CHECK_THROWS_AS(fit_visibility(tiny), DomainError);
}

TEST_CASE("temperature to phase") {
    CHECK(temperature_to_phase(25.71, 25.71, 0.8727) == doctest::Approx(0.0).scale(1.0));
    CHECK(temperature_to_phase(26.71, 25.71, kPi) == doctest::Approx(kPi).epsilon(1e-12));
    // interpreting a 1.8 degree step as a quarter fringe gives k = 0.8727
    const double k = (kPi / 2.0) / 1.8;
    CHECK(k == doctest::Approx(0.8727).epsilon(1e-4));
    CHECK_THROWS_AS(temperature_to_phase(1.0, 0.0, 0.0), DomainError);
}
