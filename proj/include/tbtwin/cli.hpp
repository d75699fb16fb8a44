#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tbtwin/analysis.hpp"
#include "tbtwin/analytic.hpp"
#include "tbtwin/config.hpp"
#include "tbtwin/io.hpp"
#include "tbtwin/montecarlo.hpp"

namespace tbtwin::cli {

// exit codes shared by every subcommand
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kSimulationError = 3;
inline constexpr int kAnalysisError = 4;

namespace detail {

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct OutputFile {
    std::ofstream file;
    std::ostream* stream = &std::cout;

    explicit OutputFile(const std::string& path) {
        if (!path.empty()) {
            file.open(path);
            if (!file) throw io::IoError("cannot open output file: " + path);
            stream = &file;
        }
    }
    std::ostream& out() { return *stream; }
};

inline void apply_seed_overrides(mc::RunControl& run, std::optional<std::uint64_t> cli_seed) {
    if (const char* env = std::getenv("TBTWIN_SEED")) {
        char* end = nullptr;
        const auto v = std::strtoull(env, &end, 10);
        if (end != env && *end == '\0') run.rng_seed = v;
    }
    if (cli_seed) run.rng_seed = *cli_seed;
}

inline void header(std::ostream& os, const std::string& command, const cfg::ResolvedConfig& rc,
                   std::uint64_t seed) {
    os << "# tbtwin " << command << " config_hash=" << hash_hex(rc.hash) << " seed=" << seed
       << "\n";
    for (const auto& w : rc.warnings) os << "# warning: " << w << "\n";
}

// combined two-detector delay widths, used to pick the accidental-slot
// exclusion radius
inline double combined_fwtm_estimate(const mc::ExperimentConfig& e) {
    double worst = 0.0;
    for (const auto* det : {&e.det_s, &e.det_i}) {
        double est = 0.0;
        switch (det->jitter.model) {
        case JitterModel::none:
            break;
        case JitterModel::gaussian:
            est = det->jitter.fwhm_ps * std::sqrt(2.0) * kGaussFwtmOverFwhm;
            break;
        case JitterModel::gaussian_exp_tail:
            est = det->jitter.fwtm_ps * std::sqrt(2.0);
            break;
        }
        worst = std::max(worst, est);
    }
    return worst;
}

inline int exclude_radius(const mc::ExperimentConfig& e) {
    const double fwtm = combined_fwtm_estimate(e);
    if (fwtm <= e.train.period_ps / 2.0) return 1;
    return std::max(1, static_cast<int>(std::ceil(1.5 * fwtm / e.train.period_ps)));
}

inline double effective_qe(const mc::ExperimentConfig& e) {
    return std::sqrt(e.det_s.quantum_efficiency * e.det_i.quantum_efficiency);
}

} // namespace detail

struct BudgetOptions {
    std::string config_path;
    std::string out_path;
};

inline int cmd_budget(const BudgetOptions& opt) {
    try {
        const cfg::ResolvedConfig rc = cfg::load(opt.config_path);
        const auto& e = rc.experiment;
        detail::OutputFile sink(opt.out_path);
        auto& os = sink.out();
        detail::header(os, "budget", rc, e.run.rng_seed);
        os << "item,loss_db\n";
        for (const auto& item : e.budget.items) os << item.label << "," << item.loss_db << "\n";
        os << "total," << detail::fmt(e.budget.total_db()) << "\n";
        os << "per_arm," << detail::fmt(e.budget.per_arm_db()) << "\n";
        const auto flux = analytic::pair_flux(e.source.mean_pairs_per_pulse,
                                              e.train.rep_rate_hz, e.budget,
                                              detail::effective_qe(e));
        os << "source_hz," << detail::fmt(flux.source_hz) << "\n";
        os << "detected_hz," << detail::fmt(flux.detected_hz) << "\n";
        os << "ideal_qe_hz," << detail::fmt(flux.ideal_qe_hz) << "\n";
        return kOk;
    } catch (const std::exception& ex) {
        std::cerr << "budget: " << ex.what() << "\n";
        return kConfigError;
    }
}

struct EstimateOptions {
    std::string config_path;
    std::string out_path;
};

inline int cmd_estimate(const EstimateOptions& opt) {
    try {
        const cfg::ResolvedConfig rc = cfg::load(opt.config_path);
        const auto& e = rc.experiment;
        detail::OutputFile sink(opt.out_path);
        auto& os = sink.out();
        detail::header(os, "estimate", rc, e.run.rng_seed);
        os << "quantity,value\n";
        const double eta_s = e.det_s.survival();
        const double eta_i = e.det_i.survival();
        const double mu = e.source.mean_pairs_per_pulse;
        const double car = analytic::estimate_car(mu, eta_s, eta_i,
                                                  e.det_s.dark_prob_per_window(),
                                                  e.det_i.dark_prob_per_window());
        os << "eta_signal," << detail::fmt(eta_s) << "\n";
        os << "eta_idler," << detail::fmt(eta_i) << "\n";
        os << "analytic_car," << detail::fmt(car) << "\n";
        const double v_car = analytic::visibility_from_car(car);
        os << "visibility_from_car," << detail::fmt(v_car) << "\n";
        os << "leakage_signal,"
           << detail::fmt(analytic::jitter_leakage(e.det_s.jitter, e.det_s.window_ps)) << "\n";
        os << "leakage_idler,"
           << detail::fmt(analytic::jitter_leakage(e.det_i.jitter, e.det_i.window_ps)) << "\n";
        double eps_eff = 0.0;
        if (e.has_mzis()) {
            eps_eff = 0.5 * (1.0 - (1.0 - 2.0 * e.mzi_s->extinction_error) *
                                       (1.0 - 2.0 * e.mzi_i->extinction_error));
            const double leak_i = analytic::jitter_leakage(e.det_i.jitter, e.det_i.window_ps);
            os << "predicted_visibility,"
               << detail::fmt(analytic::predict_visibility(v_car, leak_i, eps_eff)) << "\n";
        }
        os << "bell_violating," << (analytic::is_bell_violating(std::min(1.0, v_car)) ? 1 : 0)
           << "\n";
        const auto flux = analytic::pair_flux(mu, e.train.rep_rate_hz, e.budget,
                                              detail::effective_qe(e));
        os << "source_hz," << detail::fmt(flux.source_hz) << "\n";
        os << "detected_hz," << detail::fmt(flux.detected_hz) << "\n";
        os << "ideal_qe_hz," << detail::fmt(flux.ideal_qe_hz) << "\n";
        return kOk;
    } catch (const std::exception& ex) {
        std::cerr << "estimate: " << ex.what() << "\n";
        return kConfigError;
    }
}

struct CarOptions {
    std::string config_path;
    std::string out_path;
    std::optional<long long> pulses;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    int slots = 12;
};

inline int cmd_car(const CarOptions& opt) {
    cfg::ResolvedConfig rc;
    try {
        rc = cfg::load(opt.config_path);
    } catch (const std::exception& ex) {
        std::cerr << "car: " << ex.what() << "\n";
        return kConfigError;
    }
    try {
        mc::ExperimentConfig e = rc.experiment;
        e.mzi_s.reset(); // direct detection, interferometers bypassed
        e.mzi_i.reset();
        if (opt.pulses) e.run.n_pulses = *opt.pulses;
        if (opt.threads) e.run.threads = *opt.threads;
        e.run.stop_after_starts = 0;
        detail::apply_seed_overrides(e.run, opt.seed);

        const mc::SimResult sim = mc::simulate(e);
        const double period = e.train.period_ps;
        const double window = e.det_s.window_ps;
        const int exclude = detail::exclude_radius(e);
        const double half_range = (opt.slots + 0.5) * period;
        const auto hist = analysis::build_histogram(sim.signal, sim.idler, 1.0,
                                                    -half_range - 0.5, half_range - 0.5);
        const auto car = analysis::car_from_histogram(hist, period, window, exclude);

        const double analytic_car = analytic::estimate_car(
            e.source.mean_pairs_per_pulse, e.det_s.survival(), e.det_i.survival(),
            e.det_s.dark_prob_per_window(), e.det_i.dark_prob_per_window());

        detail::OutputFile sink(opt.out_path);
        auto& os = sink.out();
        detail::header(os, "car", rc, e.run.rng_seed);
        os << "quantity,value\n";
        os << "pulses," << e.run.n_pulses << "\n";
        os << "car," << detail::fmt(car.car) << "\n";
        os << "true_counts," << car.true_counts << "\n";
        os << "accidental_mean," << detail::fmt(car.accidental_counts_mean) << "\n";
        os << "accidental_slots," << car.slots_used << "\n";
        os << "excluded_neighbours," << exclude << "\n";
        os << "analytic_car," << detail::fmt(analytic_car) << "\n";
        os << "singles_signal," << sim.stats.singles_s << "\n";
        os << "singles_idler," << sim.stats.singles_i << "\n";
        if (e.source.mean_pairs_per_pulse == 0.0) os << "flag,noise-floor\n";
        else if (car.zero_accidental) os << "flag,zero-accidental\n";
        return kOk;
    } catch (const OverflowError& ex) {
        std::cerr << "car: " << ex.what() << "\n";
        return kSimulationError;
    } catch (const std::exception& ex) {
        std::cerr << "car: " << ex.what() << "\n";
        return kConfigError;
    }
}

struct FringeOptions {
    std::string config_path;
    std::string out_path;
    int points = 12;
    long long starts = 1'000'000;
    std::optional<std::uint64_t> seed;
    std::optional<double> theta_s;
    std::optional<int> threads;
};

inline int cmd_fringe(const FringeOptions& opt) {
    cfg::ResolvedConfig rc;
    try {
        rc = cfg::load(opt.config_path);
        if (opt.points < 4)
            throw ConfigError("fringe: at least 4 phase points are required");
        if (!rc.experiment.has_mzis())
            throw ConfigError("fringe: config has no interferometer sections");
    } catch (const std::exception& ex) {
        std::cerr << "fringe: " << ex.what() << "\n";
        return kConfigError;
    }
    try {
        mc::ExperimentConfig e = rc.experiment;
        if (opt.theta_s) e.mzi_s->phase_rad = *opt.theta_s;
        if (opt.threads) e.run.threads = *opt.threads;
        e.run.stop_after_starts = opt.starts;
        detail::apply_seed_overrides(e.run, opt.seed);

        std::vector<double> grid(opt.points);
        for (int k = 0; k < opt.points; ++k)
            grid[k] = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(opt.points);

        const analysis::FringeScan scan = analysis::run_fringe_scan(e, grid);
        const analysis::VisibilityFit fit = analysis::fit_visibility(scan);

        detail::OutputFile sink(opt.out_path);
        auto& os = sink.out();
        detail::header(os, "fringe", rc, e.run.rng_seed);
        os << "# theta_s_rad=" << detail::fmt(scan.theta_s_rad) << "\n";
        os << "theta_i_rad,coincidences,n_starts\n";
        for (const auto& p : scan.points)
            os << detail::fmt(p.theta_i_rad) << "," << p.coincidences << "," << p.n_starts
               << "\n";
        os << "# fit_amplitude=" << detail::fmt(fit.amplitude) << "\n";
        os << "# fit_visibility=" << detail::fmt(fit.visibility) << "\n";
        os << "# fit_visibility_sigma=" << detail::fmt(fit.visibility_sigma) << "\n";
        os << "# fit_phase_offset_rad=" << detail::fmt(fit.phase_offset_rad) << "\n";
        os << "# fit_reduced_chi2=" << detail::fmt(fit.reduced_chi2) << "\n";
        os << "# bell_violating=" << (analytic::is_bell_violating(fit.visibility) ? 1 : 0)
           << "\n";
        if (fit.degenerate) {
            std::cerr << "fringe: degenerate fit\n";
            return kAnalysisError;
        }
        return kOk;
    } catch (const OverflowError& ex) {
        std::cerr << "fringe: " << ex.what() << "\n";
        return kSimulationError;
    } catch (const std::exception& ex) {
        std::cerr << "fringe: " << ex.what() << "\n";
        return kConfigError;
    }
}

struct JitterOptions {
    std::string config_path;
    std::string out_path;
    long long coincidences = 200'000;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

inline int cmd_jitter(const JitterOptions& opt) {
    cfg::ResolvedConfig rc;
    try {
        rc = cfg::load(opt.config_path);
    } catch (const std::exception& ex) {
        std::cerr << "jitter: " << ex.what() << "\n";
        return kConfigError;
    }
    try {
        mc::ExperimentConfig e = rc.experiment;
        e.mzi_s.reset();
        e.mzi_i.reset();
        if (opt.threads) e.run.threads = *opt.threads;
        e.run.stop_after_starts = 0;
        detail::apply_seed_overrides(e.run, opt.seed);

        const double pair_rate =
            e.source.mean_pairs_per_pulse * e.det_s.survival() * e.det_i.survival();
        if (pair_rate <= 0.0)
            throw ConfigError("jitter: zero coincidence rate in this config");
        e.run.n_pulses = static_cast<long long>(
            1.15 * static_cast<double>(opt.coincidences) / pair_rate);

        const mc::SimResult sim = mc::simulate(e);
        const double half_range =
            std::min(0.6 * e.train.period_ps, e.train.period_ps / 2.0) + 0.5;
        const double width = 2.0;
        const double bins = std::floor(half_range / width);
        const auto hist = analysis::build_histogram(sim.signal, sim.idler, width,
                                                    -bins * width, bins * width);
        const auto widths = analysis::fwhm_fwtm(hist);

        detail::OutputFile sink(opt.out_path);
        auto& os = sink.out();
        detail::header(os, "jitter", rc, e.run.rng_seed);
        os << "quantity,value\n";
        os << "coincidences," << hist.total() << "\n";
        os << "fwhm_ps," << detail::fmt(widths.fwhm_ps) << "\n";
        os << "fwtm_ps," << detail::fmt(widths.fwtm_ps) << "\n";
        os << "delay_ps,counts\n";
        for (std::size_t k = 0; k < hist.counts.size(); ++k)
            os << detail::fmt(hist.bin_center(k)) << "," << hist.counts[k] << "\n";
        return kOk;
    } catch (const NoPeak& ex) {
        std::cerr << "jitter: " << ex.what() << "\n";
        return kAnalysisError;
    } catch (const OverflowError& ex) {
        std::cerr << "jitter: " << ex.what() << "\n";
        return kSimulationError;
    } catch (const std::exception& ex) {
        std::cerr << "jitter: " << ex.what() << "\n";
        return kConfigError;
    }
}

struct SimulateOptions {
    std::string config_path;
    std::string out_signal;
    std::string out_idler;
    std::optional<long long> pulses;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

inline int cmd_simulate(const SimulateOptions& opt) {
    cfg::ResolvedConfig rc;
    try {
        rc = cfg::load(opt.config_path);
    } catch (const std::exception& ex) {
        std::cerr << "simulate: " << ex.what() << "\n";
        return kConfigError;
    }
    try {
        mc::ExperimentConfig e = rc.experiment;
        if (opt.pulses) e.run.n_pulses = *opt.pulses;
        if (opt.threads) e.run.threads = *opt.threads;
        detail::apply_seed_overrides(e.run, opt.seed);
        const mc::SimResult sim = mc::simulate(e);
        io::write_timestamps(opt.out_signal, sim.signal);
        io::write_timestamps(opt.out_idler, sim.idler);
        std::cout << "# tbtwin simulate config_hash=" << detail::hash_hex(rc.hash)
                  << " seed=" << e.run.rng_seed << "\n";
        std::cout << "singles_signal," << sim.stats.singles_s << "\n";
        std::cout << "singles_idler," << sim.stats.singles_i << "\n";
        std::cout << "generated_pairs," << sim.stats.generated_pairs << "\n";
        return kOk;
    } catch (const OverflowError& ex) {
        std::cerr << "simulate: " << ex.what() << "\n";
        return kSimulationError;
    } catch (const std::exception& ex) {
        std::cerr << "simulate: " << ex.what() << "\n";
        return kConfigError;
    }
}

struct HistOptions {
    std::string starts_path;
    std::string stops_path;
    std::string out_path;
    double bin_width_ps = 10.0;
    double range_min_ps = -1000.0;
    double range_max_ps = 1000.0;
    bool first_stop_only = false;
};

inline int cmd_hist(const HistOptions& opt) {
    try {
        const auto starts = io::read_timestamps(opt.starts_path, mc::DetectorId::signal);
        const auto stops = io::read_timestamps(opt.stops_path, mc::DetectorId::idler);
        const auto hist =
            analysis::build_histogram(starts, stops, opt.bin_width_ps, opt.range_min_ps,
                                      opt.range_max_ps, opt.first_stop_only);
        detail::OutputFile sink(opt.out_path);
        auto& os = sink.out();
        os << "# tbtwin hist n_starts=" << hist.n_starts << "\n";
        os << "delay_ps,counts\n";
        for (std::size_t k = 0; k < hist.counts.size(); ++k)
            os << detail::fmt(hist.bin_center(k)) << "," << hist.counts[k] << "\n";
        return kOk;
    } catch (const std::exception& ex) {
        std::cerr << "hist: " << ex.what() << "\n";
        return kConfigError;
    }
}

} // namespace tbtwin::cli
