#pragma once

#include <cmath>
#include <limits>

#include "tbtwin/types.hpp"

namespace tbtwin::analytic {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Interior-bin coincidence probability versus the summed analysis phase,
// normalized so an ideal interferometer pair peaks at 1:
//   P = (1 + (1 - 2 eps) * cos(theta_sum - phi_p)) / 2
inline double coincidence_fringe(double theta_sum, double phi_p, double epsilon) {
    if (epsilon < 0.0 || epsilon > 0.5)
        throw DomainError("coincidence_fringe: epsilon must lie in [0, 0.5]");
    return 0.5 * (1.0 + (1.0 - 2.0 * epsilon) * std::cos(theta_sum - phi_p));
}

// First-order coincidence-to-accidental ratio. Matched-slot probability is
// mu*eta_s*eta_i plus the accidental floor; an unmatched slot sees only the
// product of the two singles occupancies.
inline double estimate_car(double mu, double eta_s, double eta_i, double dark_s,
                           double dark_i) {
    if (mu < 0.0 || eta_s < 0.0 || eta_i < 0.0 || dark_s < 0.0 || dark_i < 0.0)
        throw DomainError("estimate_car: inputs must be >= 0");
    const double p_acc = (mu * eta_s + dark_s) * (mu * eta_i + dark_i);
    if (p_acc == 0.0) return std::numeric_limits<double>::infinity();
    return (mu * eta_s * eta_i + p_acc) / p_acc;
}

// Fringe extremes scale as signal+accidental and accidental, hence
// V = (car - 1) / (car + 1).
inline double visibility_from_car(double car) {
    if (std::isinf(car)) return 1.0;
    if (car < 1.0) throw DomainError("visibility_from_car: car must be >= 1");
    return (car - 1.0) / (car + 1.0);
}

struct FluxChain {
    double source_hz = 0.0;
    double detected_hz = 0.0;
    double ideal_qe_hz = 0.0;
};

// Source flux through the loss budget to the detected pair rate. Both
// photons traverse one arm each; under split_evenly each arm carries half
// of the budget total.
inline FluxChain pair_flux(double mu, double rep_rate_hz, const LossBudget& budget,
                           double qe) {
    if (qe <= 0.0 || qe > 1.0) throw DomainError("pair_flux: qe must lie in (0, 1]");
    budget.validate();
    FluxChain f;
    f.source_hz = mu * rep_rate_hz;
    const double t_arm = std::pow(10.0, -budget.per_arm_db() / 10.0);
    f.detected_hz = f.source_hz * (t_arm * qe) * (t_arm * qe);
    f.ideal_qe_hz = f.source_hz * t_arm * t_arm;
    return f;
}

namespace detail {

// density of (1-w) Gauss(sigma) + w Laplace(b) at offset t
inline double mixture_density(double t, double sigma, double w, double b) {
    const double g = sigma > 0.0
                         ? std::exp(-t * t / (2.0 * sigma * sigma)) /
                               (sigma * std::sqrt(2.0 * kPi))
                         : 0.0;
    const double l = b > 0.0 ? std::exp(-std::fabs(t) / b) / (2.0 * b) : 0.0;
    return (1.0 - w) * g + w * l;
}

// half-width at the given fraction of the peak; density is unimodal so the
// crossing is unique
inline double half_width_at_fraction(double sigma, double w, double b, double fraction) {
    const double peak = mixture_density(0.0, sigma, w, b);
    const double target = peak * fraction;
    double lo = 0.0;
    double hi = 10.0 * (sigma + b) + 1.0;
    while (mixture_density(hi, sigma, w, b) > target) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mixture_density(mid, sigma, w, b) > target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// sigma such that the mixture's FWHM equals the requested width
inline double solve_core_sigma(double fwhm_ps, double w, double b) {
    const double target = fwhm_ps / 2.0;
    double lo = fwhm_ps * 1e-3;
    double hi = fwhm_ps;
    auto width = [&](double s) { return half_width_at_fraction(s, w, b, 0.5); };
    while (width(hi) < target) hi *= 2.0;
    if (width(lo) > target)
        throw NoSolution("jitter tail alone is wider than the requested FWHM");
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (width(mid) < target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

// Gaussian core width implied by a JitterSpec.
inline double jitter_core_sigma(const JitterSpec& spec) {
    switch (spec.model) {
    case JitterModel::none:
        return 0.0;
    case JitterModel::gaussian:
        return spec.fwhm_ps / kGaussFwhmPerSigma;
    case JitterModel::gaussian_exp_tail:
        return detail::solve_core_sigma(spec.fwhm_ps, spec.tail_weight, spec.tail_scale_ps);
    }
    throw DomainError("jitter_core_sigma: unknown model");
}

// Probability mass of the coincidence-delay distribution outside the
// +-window/2 acceptance.
inline double jitter_leakage(const JitterSpec& spec, double window_ps) {
    if (!(window_ps > 0.0)) throw DomainError("jitter_leakage: window_ps must be > 0");
    const double h = window_ps / 2.0;
    switch (spec.model) {
    case JitterModel::none:
        return 0.0;
    case JitterModel::gaussian: {
        const double sigma = spec.fwhm_ps / kGaussFwhmPerSigma;
        return std::erfc(h / (sigma * std::sqrt(2.0)));
    }
    case JitterModel::gaussian_exp_tail: {
        const double sigma = jitter_core_sigma(spec);
        const double gauss_tail = std::erfc(h / (sigma * std::sqrt(2.0)));
        const double lap_tail = std::exp(-h / spec.tail_scale_ps);
        return (1.0 - spec.tail_weight) * gauss_tail + spec.tail_weight * lap_tail;
    }
    }
    throw DomainError("jitter_leakage: unknown model");
}

// Builds a jitter model matching measured FWHM and FWTM. A pure Gaussian has
// FWTM/FWHM = 1.8226; wider ratios need the exponential tail. The tail scale
// is pinned at fwtm/2 and the tail weight is bisected until the density's
// FWTM matches; the Gaussian core is re-solved at every step so the FWHM
// stays exact.
inline JitterSpec calibrate_jitter(double fwhm_ps, double fwtm_ps) {
    if (!(fwhm_ps > 0.0) || !(fwtm_ps > 0.0))
        throw DomainError("calibrate_jitter: widths must be > 0");
    const double ratio = fwtm_ps / fwhm_ps;
    if (ratio < kGaussFwtmOverFwhm * (1.0 - 1e-3))
        throw NoSolution("calibrate_jitter: fwtm/fwhm below the Gaussian ratio");
    if (ratio <= kGaussFwtmOverFwhm * (1.0 + 1e-3)) {
        JitterSpec spec;
        spec.model = JitterModel::gaussian;
        spec.fwhm_ps = fwhm_ps;
        spec.fwtm_ps = 0.0;
        return spec;
    }

    const double b = fwtm_ps / 2.0;
    auto realized_fwtm = [&](double w) {
        const double sigma = detail::solve_core_sigma(fwhm_ps, w, b);
        return 2.0 * detail::half_width_at_fraction(sigma, w, b, 0.1);
    };
    const double w_max = 0.5;
    if (realized_fwtm(w_max - 1e-9) < fwtm_ps)
        throw NoSolution("calibrate_jitter: targets need tail_weight above 0.5");
    double lo = 1e-9, hi = w_max - 1e-9;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (realized_fwtm(mid) < fwtm_ps) lo = mid;
        else hi = mid;
    }
    JitterSpec spec;
    spec.model = JitterModel::gaussian_exp_tail;
    spec.fwhm_ps = fwhm_ps;
    spec.fwtm_ps = fwtm_ps;
    spec.tail_weight = 0.5 * (lo + hi);
    spec.tail_scale_ps = b;
    spec.validate();
    return spec;
}

// First-order visibility predictor: leaked coincidences re-enter neighbour
// slots as a phase-independent floor. The event-level simulation is the
// ground truth; this is a coarse sanity figure.
inline double predict_visibility(double v0, double leakage, double epsilon) {
    if (v0 < 0.0 || v0 > 1.0 || leakage < 0.0 || leakage > 1.0 || epsilon < 0.0 ||
        epsilon > 1.0)
        throw DomainError("predict_visibility: arguments must lie in [0,1]");
    return v0 * (1.0 - 2.0 * epsilon) * (1.0 - leakage) / (1.0 + leakage);
}

inline bool is_bell_violating(double v) {
    if (v < 0.0 || v > 1.0) throw DomainError("is_bell_violating: v must lie in [0,1]");
    return v > 1.0 / std::sqrt(2.0);
}

} // namespace tbtwin::analytic
