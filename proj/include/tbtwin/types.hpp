#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace tbtwin {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DelayMismatch : ConfigError {
    using ConfigError::ConfigError;
};
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoSolution : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoPeak : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct OverflowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kPi = std::numbers::pi;

// width-to-sigma factor for a Gaussian, 2*sqrt(2*ln 2)
inline constexpr double kGaussFwhmPerSigma = 2.3548200450309493;
// FWTM/FWHM of a pure Gaussian, sqrt(ln 10 / ln 2)
inline constexpr double kGaussFwtmOverFwhm = 1.8226160392;

// Pump pulse train: clocked slots of pitch period_ps, pulse duration
// pulse_fwhm_ps well below the pitch, fixed phase step between neighbours.
struct PulseTrainSpec {
    double period_ps = 100.0;
    double pulse_fwhm_ps = 40.0;
    int n_pulses = 2;
    double inter_pulse_phase_rad = 0.0;
    double rep_rate_hz = 1.0e10;

    void validate() const {
        if (n_pulses < 1) throw ConfigError("PulseTrainSpec: n_pulses must be >= 1");
        if (!(period_ps > 0.0)) throw ConfigError("PulseTrainSpec: period_ps must be > 0");
        if (!(pulse_fwhm_ps < period_ps))
            throw ConfigError("PulseTrainSpec: pulse_fwhm_ps must be below period_ps");
        const double derived = 1.0e12 / period_ps;
        if (std::fabs(rep_rate_hz - derived) > 1e-9 * derived)
            throw ConfigError("PulseTrainSpec: rep_rate_hz inconsistent with period_ps");
    }
};

// Converts a carrier wavelength and slot pitch into the slot-to-slot pump
// phase, reduced mod 2pi. The absolute phase is enormous; only the reduced
// value is observable.
inline double inter_pulse_phase_from_wavelength(double wavelength_nm, double period_ps) {
    const double c_nm_per_ps = 299792.458;
    const double cycles = c_nm_per_ps * period_ps / wavelength_nm;
    return std::fmod(cycles, 1.0) * 2.0 * kPi;
}

enum class PairNumberModel { poisson, thermal };

struct SourceSpec {
    double mean_pairs_per_pulse = 0.03;
    PairNumberModel pair_number_model = PairNumberModel::poisson;

    void validate() const {
        if (mean_pairs_per_pulse < 0.0)
            throw ConfigError("SourceSpec: mean_pairs_per_pulse must be >= 0");
    }
    // perturbative-regime guard; callers may surface this to the user
    bool wants_warning() const { return mean_pairs_per_pulse > 1.0; }
};

enum class JitterModel { none, gaussian, gaussian_exp_tail };

// Detector timing response. For gaussian_exp_tail the density is
//   (1-w) * Gauss(sigma) + w * Laplace(b)
// where sigma is always derived so the density's FWHM equals fwhm_ps.
struct JitterSpec {
    JitterModel model = JitterModel::none;
    double fwhm_ps = 0.0;
    double fwtm_ps = 0.0; // only meaningful for gaussian_exp_tail
    double tail_weight = 0.0;
    double tail_scale_ps = 0.0;

    void validate() const {
        switch (model) {
        case JitterModel::none:
            return;
        case JitterModel::gaussian:
            if (!(fwhm_ps > 0.0)) throw ConfigError("JitterSpec: fwhm_ps must be > 0");
            if (fwtm_ps > 0.0) {
                const double ratio = fwtm_ps / fwhm_ps;
                if (std::fabs(ratio / kGaussFwtmOverFwhm - 1.0) > 1e-3)
                    throw ConfigError("JitterSpec: gaussian fwtm/fwhm must equal 1.8226");
            }
            return;
        case JitterModel::gaussian_exp_tail:
            if (!(fwhm_ps > 0.0) || !(fwtm_ps > 0.0))
                throw ConfigError("JitterSpec: tail model needs fwhm_ps and fwtm_ps");
            if (tail_weight < 0.0 || tail_weight >= 1.0)
                throw ConfigError("JitterSpec: tail_weight must lie in [0,1)");
            if (!(tail_scale_ps > 0.0))
                throw ConfigError("JitterSpec: tail_scale_ps must be > 0");
            return;
        }
    }
};

struct DetectorSpec {
    double arm_loss_db = 13.0;
    double quantum_efficiency = 0.02;
    double dark_rate_hz = 4.0e4;
    double window_ps = 75.0;
    JitterSpec jitter{};
    double dead_time_ps = 0.0;

    double transmission() const { return std::pow(10.0, -arm_loss_db / 10.0); }
    double survival() const { return transmission() * quantum_efficiency; }
    double dark_prob_per_window() const { return dark_rate_hz * window_ps * 1e-12; }

    void validate() const {
        if (quantum_efficiency < 0.0 || quantum_efficiency > 1.0)
            throw ConfigError("DetectorSpec: quantum_efficiency must lie in [0,1]");
        if (dark_rate_hz < 0.0) throw ConfigError("DetectorSpec: dark_rate_hz must be >= 0");
        if (!(window_ps > 0.0)) throw ConfigError("DetectorSpec: window_ps must be > 0");
        if (dead_time_ps < 0.0) throw ConfigError("DetectorSpec: dead_time_ps must be >= 0");
        if (arm_loss_db < 0.0) throw ConfigError("DetectorSpec: arm_loss_db must be >= 0");
        jitter.validate();
    }
};

// Unbalanced analysis interferometer. delay_ps must equal the pulse pitch;
// extinction_error is the relative baseline error of the fringe.
struct MziSpec {
    double delay_ps = 100.0;
    double phase_rad = 0.0;
    double insertion_loss_db = 5.0;
    double extinction_error = 0.01;

    void validate_against(const PulseTrainSpec& train) const {
        if (std::fabs(delay_ps - train.period_ps) > 1e-9 * train.period_ps)
            throw DelayMismatch("MziSpec: delay_ps must equal the pulse period");
        if (extinction_error < 0.0 || extinction_error > 0.5)
            throw ConfigError("MziSpec: extinction_error must lie in [0, 0.5]");
        if (insertion_loss_db < 0.0)
            throw ConfigError("MziSpec: insertion_loss_db must be >= 0");
    }
};

enum class ArmSplit { per_arm_total, split_evenly };

struct LossBudget {
    struct Item {
        std::string label;
        double loss_db = 0.0;
    };
    std::vector<Item> items;
    ArmSplit arm_split = ArmSplit::split_evenly;

    double total_db() const {
        double t = 0.0;
        for (const auto& it : items) t += it.loss_db;
        return t;
    }
    double per_arm_db() const {
        return arm_split == ArmSplit::split_evenly ? total_db() / 2.0 : total_db();
    }

    void validate() const {
        for (const auto& it : items)
            if (it.loss_db < 0.0) throw ConfigError("LossBudget: loss_db must be >= 0");
    }

    static LossBudget table_default() {
        LossBudget b;
        b.items = {{"fiber_pigtail_propagation", 10.0},
                   {"fiber_u_bench_filtering", 11.0},
                   {"mzi_insertion", 5.0}};
        b.arm_split = ArmSplit::split_evenly;
        return b;
    }
};

} // namespace tbtwin
