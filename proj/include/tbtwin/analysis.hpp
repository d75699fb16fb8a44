#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "tbtwin/montecarlo.hpp"
#include "tbtwin/types.hpp"

namespace tbtwin::analysis {

// Start-stop delay histogram, the time-interval-analyzer product.
struct CoincidenceHistogram {
    double bin_width_ps = 1.0;
    double range_min_ps = 0.0;
    double range_max_ps = 0.0;
    std::vector<long long> counts;
    long long n_starts = 0;

    double bin_center(std::size_t k) const {
        return range_min_ps + (static_cast<double>(k) + 0.5) * bin_width_ps;
    }
    long long total() const {
        long long t = 0;
        for (auto c : counts) t += c;
        return t;
    }
};

struct FringePoint {
    double theta_i_rad = 0.0;
    long long coincidences = 0;
    long long n_starts = 0;
};

struct FringeScan {
    double theta_s_rad = 0.0;
    std::vector<FringePoint> points;
};

struct VisibilityFit {
    double visibility = 0.0;
    double visibility_sigma = 0.0;
    double amplitude = 0.0;
    double phase_offset_rad = 0.0;
    double reduced_chi2 = 0.0;
    bool clamped = false;
    bool degenerate = false;
};

// Histograms every stop delay (t_stop - t_start) falling inside the range.
// first_stop_only restricts each start to its earliest in-range stop.
inline CoincidenceHistogram build_histogram(const mc::TimestampStream& starts,
                                            const mc::TimestampStream& stops,
                                            double bin_width_ps, double range_min_ps,
                                            double range_max_ps,
                                            bool first_stop_only = false) {
    if (!(bin_width_ps > 0.0)) throw DomainError("build_histogram: bin width must be > 0");
    const double span = range_max_ps - range_min_ps;
    if (!(span > 0.0)) throw DomainError("build_histogram: empty range");
    const double bins_real = span / bin_width_ps;
    const auto n_bins = static_cast<std::size_t>(std::llround(bins_real));
    if (std::fabs(bins_real - static_cast<double>(n_bins)) > 1e-9)
        throw DomainError("build_histogram: range must be divisible by bin width");

    CoincidenceHistogram hist;
    hist.bin_width_ps = bin_width_ps;
    hist.range_min_ps = range_min_ps;
    hist.range_max_ps = range_max_ps;
    hist.counts.assign(n_bins, 0);
    hist.n_starts = static_cast<long long>(starts.times_ps.size());

    const auto& st = starts.times_ps;
    const auto& sp = stops.times_ps;
    std::size_t lo = 0;
    for (const auto t : st) {
        const double wmin = static_cast<double>(t) + range_min_ps;
        const double wmax = static_cast<double>(t) + range_max_ps;
        while (lo < sp.size() && static_cast<double>(sp[lo]) < wmin) ++lo;
        for (std::size_t k = lo; k < sp.size() && static_cast<double>(sp[k]) < wmax; ++k) {
            const double delay = static_cast<double>(sp[k] - t);
            const auto bin = static_cast<std::size_t>(
                std::floor((delay - range_min_ps) / bin_width_ps));
            if (bin < n_bins) {
                ++hist.counts[bin];
                if (first_stop_only) break;
            }
        }
    }
    return hist;
}

struct CarResult {
    double car = 0.0;
    long long true_counts = 0;
    double accidental_counts_mean = 0.0;
    bool zero_accidental = false;
    int slots_used = 0;
};

namespace detail {

inline long long window_counts(const CoincidenceHistogram& hist, double center_ps,
                               double window_ps) {
    const double lo = center_ps - window_ps / 2.0;
    const double hi = center_ps + window_ps / 2.0;
    long long total = 0;
    for (std::size_t k = 0; k < hist.counts.size(); ++k) {
        const double c = hist.bin_center(k);
        if (c >= lo && c < hi) total += hist.counts[k];
    }
    return total;
}

} // namespace detail

// Matched-slot counts over the mean of unmatched-slot counts. Slots within
// exclude_nearest of the matched one are skipped; jitter tails reaching the
// neighbouring slots would otherwise inflate the accidental level.
inline CarResult car_from_histogram(const CoincidenceHistogram& hist, double slot_period_ps,
                                    double window_ps, int exclude_nearest = 1) {
    if (!(window_ps > 0.0) || !(slot_period_ps > 0.0))
        throw DomainError("car_from_histogram: window and slot period must be > 0");
    if (window_ps > slot_period_ps)
        throw DomainError("car_from_histogram: window wider than the slot period");
    if (exclude_nearest < 0) exclude_nearest = 0;

    const int max_left =
        static_cast<int>(std::floor((-hist.range_min_ps - window_ps / 2.0) / slot_period_ps));
    const int max_right =
        static_cast<int>(std::floor((hist.range_max_ps - window_ps / 2.0) / slot_period_ps));
    const int usable =
        std::max(0, max_left - exclude_nearest) + std::max(0, max_right - exclude_nearest);
    if (usable < 4)
        throw DomainError("car_from_histogram: need at least 4 unmatched slots in range");

    CarResult res;
    res.true_counts = detail::window_counts(hist, 0.0, window_ps);
    long long acc_total = 0;
    int slots = 0;
    for (int k = exclude_nearest + 1; k <= max_left; ++k) {
        acc_total += detail::window_counts(hist, -static_cast<double>(k) * slot_period_ps,
                                           window_ps);
        ++slots;
    }
    for (int k = exclude_nearest + 1; k <= max_right; ++k) {
        acc_total += detail::window_counts(hist, static_cast<double>(k) * slot_period_ps,
                                           window_ps);
        ++slots;
    }
    res.slots_used = slots;
    res.accidental_counts_mean = static_cast<double>(acc_total) / static_cast<double>(slots);
    if (res.accidental_counts_mean <= 0.0) {
        res.zero_accidental = true;
        res.car = std::numeric_limits<double>::infinity();
    } else {
        res.car = static_cast<double>(res.true_counts) / res.accidental_counts_mean;
    }
    return res;
}

struct PeakWidths {
    double fwhm_ps = 0.0;
    double fwtm_ps = 0.0;
};

// Peak widths by linear interpolation at 50% and 10% of the maximum after
// subtracting a background level taken from the outer quartile of bins.
inline PeakWidths fwhm_fwtm(const CoincidenceHistogram& hist) {
    const std::size_t n = hist.counts.size();
    if (n < 8) throw NoPeak("fwhm_fwtm: too few bins");

    std::vector<double> outer;
    const std::size_t eighth = std::max<std::size_t>(1, n / 8);
    for (std::size_t k = 0; k < eighth; ++k) outer.push_back(static_cast<double>(hist.counts[k]));
    for (std::size_t k = n - eighth; k < n; ++k)
        outer.push_back(static_cast<double>(hist.counts[k]));
    std::sort(outer.begin(), outer.end());
    const double background = outer[outer.size() / 2];

    // 3-bin smoothing; the raw maximum of noisy bins overestimates the peak
    // height and drags both crossings inward
    std::vector<double> y(n);
    for (std::size_t k = 0; k < n; ++k) {
        double sum = 0.0;
        int terms = 0;
        for (int d = -1; d <= 1; ++d) {
            const auto j = static_cast<long long>(k) + d;
            if (j < 0 || j >= static_cast<long long>(n)) continue;
            sum += static_cast<double>(hist.counts[static_cast<std::size_t>(j)]);
            ++terms;
        }
        y[k] = std::max(0.0, sum / terms - background);
    }

    std::size_t peak = 0;
    for (std::size_t k = 1; k < n; ++k)
        if (y[k] > y[peak]) peak = k;

    std::vector<double> sorted_counts(hist.counts.begin(), hist.counts.end());
    std::nth_element(sorted_counts.begin(), sorted_counts.begin() + n / 2, sorted_counts.end());
    const double median = sorted_counts[n / 2];
    if (static_cast<double>(hist.counts[peak]) < 5.0 * std::max(1.0, median))
        throw NoPeak("fwhm_fwtm: no dominant peak");

    auto crossing = [&](double level, int dir) -> double {
        // first bin at or below the level walking outward from the peak
        std::size_t k = peak;
        for (;;) {
            const std::size_t next = k + static_cast<std::size_t>(dir);
            if (next >= n) return dir < 0 ? hist.bin_center(0) : hist.bin_center(n - 1);
            if (y[next] <= level) {
                const double x1 = hist.bin_center(k);
                const double x2 = hist.bin_center(next);
                const double y1 = y[k];
                const double y2 = y[next];
                if (y1 == y2) return x2;
                return x1 + (x2 - x1) * (y1 - level) / (y1 - y2);
            }
            k = next;
            if ((dir < 0 && k == 0) || (dir > 0 && k == n - 1))
                return hist.bin_center(k);
        }
    };

    PeakWidths w;
    const double ymax = y[peak];
    w.fwhm_ps = crossing(0.5 * ymax, +1) - crossing(0.5 * ymax, -1);
    w.fwtm_ps = crossing(0.1 * ymax, +1) - crossing(0.1 * ymax, -1);
    return w;
}

// Weighted least squares of C(theta) = A (1 + V cos(theta + phi0)) via the
// linear form b0 + b1 cos + b2 sin with per-point Poisson variance.
inline VisibilityFit fit_visibility(const FringeScan& scan) {
    const std::size_t n = scan.points.size();
    if (n < 4) throw DomainError("fit_visibility: need at least 4 phase points");

    bool all_equal = true;
    for (std::size_t k = 1; k < n; ++k)
        if (scan.points[k].coincidences != scan.points[0].coincidences) all_equal = false;

    double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    double rhs[3] = {0, 0, 0};
    for (const auto& p : scan.points) {
        const double c = std::cos(p.theta_i_rad);
        const double s = std::sin(p.theta_i_rad);
        const double y = static_cast<double>(p.coincidences);
        const double w = 1.0 / std::max(y, 1.0);
        const double x[3] = {1.0, c, s};
        for (int a = 0; a < 3; ++a) {
            rhs[a] += w * x[a] * y;
            for (int b = 0; b < 3; ++b) m[a][b] += w * x[a] * x[b];
        }
    }

    // invert the 3x3 normal matrix
    double inv[3][3];
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    VisibilityFit fit;
    if (std::fabs(det) < 1e-12 || all_equal) {
        fit.degenerate = true;
        fit.visibility = 0.0;
        fit.visibility_sigma = 1.0;
        fit.amplitude = n ? static_cast<double>(scan.points[0].coincidences) : 0.0;
        return fit;
    }
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;

    double beta[3] = {0, 0, 0};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) beta[a] += inv[a][b] * rhs[b];

    const double r = std::hypot(beta[1], beta[2]);
    fit.amplitude = beta[0];
    fit.phase_offset_rad = std::atan2(-beta[2], beta[1]);
    double v = beta[0] != 0.0 ? r / beta[0] : 0.0;
    if (v < 0.0 || v > 1.0) {
        fit.clamped = true;
        v = std::clamp(v, 0.0, 1.0);
    }
    fit.visibility = v;

    // delta-method sigma from the parameter covariance
    if (r > 0.0 && beta[0] > 0.0) {
        const double g[3] = {-r / (beta[0] * beta[0]), beta[1] / (r * beta[0]),
                             beta[2] / (r * beta[0])};
        double var = 0.0;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) var += g[a] * inv[a][b] * g[b];
        fit.visibility_sigma = std::sqrt(std::max(0.0, var));
    } else {
        fit.visibility_sigma = 1.0;
    }

    double chi2 = 0.0;
    for (const auto& p : scan.points) {
        const double model = beta[0] + beta[1] * std::cos(p.theta_i_rad) +
                             beta[2] * std::sin(p.theta_i_rad);
        const double y = static_cast<double>(p.coincidences);
        chi2 += (y - model) * (y - model) / std::max(y, 1.0);
    }
    fit.reduced_chi2 = chi2 / static_cast<double>(n - 3);
    return fit;
}

// Counts matched-window coincidences for a sequence of idler phase settings,
// each run to the same number of start triggers.
inline FringeScan run_fringe_scan(const mc::ExperimentConfig& base,
                                  const std::vector<double>& theta_grid) {
    if (!base.has_mzis())
        throw ConfigError("run_fringe_scan: interferometers are not configured");
    FringeScan scan;
    scan.theta_s_rad = base.mzi_s->phase_rad;
    scan.points.reserve(theta_grid.size());
    for (std::size_t k = 0; k < theta_grid.size(); ++k) {
        mc::ExperimentConfig cfg = base;
        cfg.mzi_i->phase_rad = theta_grid[k];
        if (cfg.run.stop_after_starts <= 0) cfg.run.stop_after_starts = 1'000'000;
        cfg.run.rng_seed = rng::mix64(base.run.rng_seed ^ rng::mix64(k + 1));
        const mc::SimResult sim = mc::simulate(cfg);

        const double window = cfg.det_s.window_ps;
        long long coincidences = 0;
        const auto& starts = sim.signal.times_ps;
        const auto& stops = sim.idler.times_ps;
        std::size_t lo = 0;
        const double half = window / 2.0;
        for (const auto t : starts) {
            while (lo < stops.size() && static_cast<double>(stops[lo] - t) < -half) ++lo;
            for (std::size_t j = lo;
                 j < stops.size() && static_cast<double>(stops[j] - t) < half; ++j)
                ++coincidences;
        }
        scan.points.push_back(
            {theta_grid[k], coincidences, static_cast<long long>(starts.size())});
    }
    return scan;
}

// Linear temperature-to-phase mapping for configs written in degrees.
inline double temperature_to_phase(double temp_c, double t0_c, double k_rad_per_c) {
    if (k_rad_per_c == 0.0) throw DomainError("temperature_to_phase: k must be nonzero");
    return k_rad_per_c * (temp_c - t0_c);
}

} // namespace tbtwin::analysis
