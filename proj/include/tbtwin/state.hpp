#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "tbtwin/types.hpp"

namespace tbtwin {

using cdouble = std::complex<double>;

// Diagonal two-photon amplitude vector over time bins: amplitudes[k] is the
// coefficient of the bin-k signal/idler coincident term. Noncoincident and
// otherwise post-selected-away weight is tracked as a scalar.
struct TimeBinPairState {
    std::vector<cdouble> amplitudes;
    double bin_pitch_ps = 100.0;
    double discarded_weight = 0.0;

    int n_bins() const { return static_cast<int>(amplitudes.size()); }

    double norm_sq() const {
        double s = 0.0;
        for (const auto& a : amplitudes) s += std::norm(a);
        return s;
    }

    void normalize() {
        const double n = std::sqrt(norm_sq());
        if (n <= 0.0) throw DomainError("TimeBinPairState: cannot normalize null state");
        for (auto& a : amplitudes) a /= n;
    }

    std::vector<double> probabilities() const {
        std::vector<double> p(amplitudes.size());
        for (std::size_t k = 0; k < amplitudes.size(); ++k) p[k] = std::norm(amplitudes[k]);
        return p;
    }
};

// Pair state created by a coherent n-pulse train: equal magnitudes, phase
// advancing by the inter-pulse phase from bin to bin.
inline TimeBinPairState build_sequential_state(const PulseTrainSpec& train) {
    train.validate();
    const int n = train.n_pulses;
    TimeBinPairState state;
    state.bin_pitch_ps = train.period_ps;
    state.amplitudes.resize(n);
    const double mag = 1.0 / std::sqrt(static_cast<double>(n));
    for (int k = 0; k < n; ++k) {
        const double phase = train.inter_pulse_phase_rad * k;
        state.amplitudes[k] = std::polar(mag, phase);
    }
    state.discarded_weight = 0.0;
    return state;
}

// Sends both photons through their unbalanced interferometers and keeps the
// coincident bins. Bin k of the output receives the undelayed amplitude of
// input bin k plus the doubly-delayed amplitude of bin k-1 with phase
// theta_s + theta_i; first and last bins have a single contribution. Each
// photon carries amplitude 1/2 into each retained slot of the monitored
// port, so the raw coincident weight is |.|^2 / 16 and everything else
// (other ports, noncoincident slots) lands in discarded_weight.
inline TimeBinPairState apply_interferometers(const TimeBinPairState& state,
                                              const MziSpec& mzi_s, const MziSpec& mzi_i) {
    if (state.n_bins() < 1) throw DomainError("apply_interferometers: empty state");
    if (std::fabs(mzi_s.delay_ps - mzi_i.delay_ps) > 1e-9 * mzi_s.delay_ps)
        throw DelayMismatch("apply_interferometers: interferometer delays differ");
    if (std::fabs(mzi_s.delay_ps - state.bin_pitch_ps) > 1e-9 * state.bin_pitch_ps)
        throw DelayMismatch("apply_interferometers: delay does not match the bin pitch");

    const int n = state.n_bins();
    const cdouble delayed = std::polar(1.0, mzi_s.phase_rad + mzi_i.phase_rad);

    TimeBinPairState out;
    out.bin_pitch_ps = state.bin_pitch_ps;
    out.amplitudes.resize(n + 1);
    out.amplitudes[0] = state.amplitudes[0];
    for (int k = 1; k < n; ++k)
        out.amplitudes[k] = state.amplitudes[k - 1] * delayed + state.amplitudes[k];
    out.amplitudes[n] = state.amplitudes[n - 1] * delayed;

    const double kept = out.norm_sq() / 16.0;
    out.discarded_weight = 1.0 - kept;
    out.normalize();
    return out;
}

} // namespace tbtwin
