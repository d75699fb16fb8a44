#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tbtwin/cli.hpp"

namespace {

template <typename T>
std::optional<T> opt_of(const CLI::Option* o, T value) {
    return o->count() ? std::optional<T>(value) : std::nullopt;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Digital twin of a 10-GHz sequential time-bin entangled photon-pair "
                 "experiment: event-level simulation plus the matching analysis chain"};
    app.require_subcommand(1);

    // budget
    tbtwin::cli::BudgetOptions budget;
    auto* sc_budget = app.add_subcommand("budget", "loss budget and pair-flux chain");
    sc_budget->add_option("config", budget.config_path, "experiment config file")->required();
    sc_budget->add_option("--out", budget.out_path, "output CSV path (default stdout)");

    // estimate
    tbtwin::cli::EstimateOptions estimate;
    auto* sc_estimate = app.add_subcommand("estimate", "closed-form predictions");
    sc_estimate->add_option("config", estimate.config_path)->required();
    sc_estimate->add_option("--out", estimate.out_path);

    // car
    tbtwin::cli::CarOptions car;
    double car_pulses = 0; // double so 1e11-style counts parse
    std::uint64_t car_seed = 0;
    int car_threads = 0;
    auto* sc_car = app.add_subcommand("car", "coincidence-to-accidental ratio run");
    sc_car->add_option("config", car.config_path)->required();
    auto* o_car_pulses = sc_car->add_option("--pulses", car_pulses, "pump pulses to simulate");
    auto* o_car_seed = sc_car->add_option("--seed", car_seed);
    auto* o_car_threads = sc_car->add_option("--threads", car_threads);
    sc_car->add_option("--slots", car.slots, "analysed slots per side");
    sc_car->add_option("--out", car.out_path);

    // fringe
    tbtwin::cli::FringeOptions fringe;
    std::uint64_t fringe_seed = 0;
    double fringe_theta_s = 0.0;
    int fringe_threads = 0;
    double fringe_starts = 0;
    auto* sc_fringe = app.add_subcommand("fringe", "two-photon interference fringe scan");
    sc_fringe->add_option("config", fringe.config_path)->required();
    sc_fringe->add_option("--points", fringe.points, "phase points on the 2*pi grid");
    auto* o_fr_starts = sc_fringe->add_option("--starts", fringe_starts, "start triggers per point");
    auto* o_fr_seed = sc_fringe->add_option("--seed", fringe_seed);
    auto* o_fr_theta = sc_fringe->add_option("--theta-s", fringe_theta_s, "signal phase (rad)");
    auto* o_fr_threads = sc_fringe->add_option("--threads", fringe_threads);
    sc_fringe->add_option("--out", fringe.out_path);

    // jitter
    tbtwin::cli::JitterOptions jitter;
    double jitter_coinc = 0;
    std::uint64_t jitter_seed = 0;
    int jitter_threads = 0;
    auto* sc_jitter = app.add_subcommand("jitter", "correlated-pair timing histogram");
    sc_jitter->add_option("config", jitter.config_path)->required();
    auto* o_ji_coinc = sc_jitter->add_option("--coincidences", jitter_coinc, "target coincidences");
    auto* o_ji_seed = sc_jitter->add_option("--seed", jitter_seed);
    auto* o_ji_threads = sc_jitter->add_option("--threads", jitter_threads);
    sc_jitter->add_option("--out", jitter.out_path);

    // simulate
    tbtwin::cli::SimulateOptions simulate;
    double sim_pulses = 0;
    std::uint64_t sim_seed = 0;
    int sim_threads = 0;
    auto* sc_sim = app.add_subcommand("simulate", "write raw timestamp streams");
    sc_sim->add_option("config", simulate.config_path)->required();
    sc_sim->add_option("--out-signal", simulate.out_signal, ".tbts or .txt path")->required();
    sc_sim->add_option("--out-idler", simulate.out_idler, ".tbts or .txt path")->required();
    auto* o_sim_pulses = sc_sim->add_option("--pulses", sim_pulses);
    auto* o_sim_seed = sc_sim->add_option("--seed", sim_seed);
    auto* o_sim_threads = sc_sim->add_option("--threads", sim_threads);

    // hist
    tbtwin::cli::HistOptions hist;
    auto* sc_hist = app.add_subcommand("hist", "start-stop delay histogram from files");
    sc_hist->add_option("--starts", hist.starts_path)->required();
    sc_hist->add_option("--stops", hist.stops_path)->required();
    sc_hist->add_option("--bin-width", hist.bin_width_ps);
    sc_hist->add_option("--range-min", hist.range_min_ps);
    sc_hist->add_option("--range-max", hist.range_max_ps);
    sc_hist->add_flag("--first-stop", hist.first_stop_only, "first stop per start only");
    sc_hist->add_option("--out", hist.out_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : tbtwin::cli::kConfigError;
    }

    if (sc_budget->parsed()) return tbtwin::cli::cmd_budget(budget);
    if (sc_estimate->parsed()) return tbtwin::cli::cmd_estimate(estimate);
    if (sc_car->parsed()) {
        car.pulses = opt_of(o_car_pulses, static_cast<long long>(car_pulses));
        car.seed = opt_of(o_car_seed, car_seed);
        car.threads = opt_of(o_car_threads, car_threads);
        return tbtwin::cli::cmd_car(car);
    }
    if (sc_fringe->parsed()) {
        if (o_fr_starts->count()) fringe.starts = static_cast<long long>(fringe_starts);
        fringe.seed = opt_of(o_fr_seed, fringe_seed);
        fringe.theta_s = opt_of(o_fr_theta, fringe_theta_s);
        fringe.threads = opt_of(o_fr_threads, fringe_threads);
        return tbtwin::cli::cmd_fringe(fringe);
    }
    if (sc_jitter->parsed()) {
        if (o_ji_coinc->count()) jitter.coincidences = static_cast<long long>(jitter_coinc);
        jitter.seed = opt_of(o_ji_seed, jitter_seed);
        jitter.threads = opt_of(o_ji_threads, jitter_threads);
        return tbtwin::cli::cmd_jitter(jitter);
    }
    if (sc_sim->parsed()) {
        simulate.pulses = opt_of(o_sim_pulses, static_cast<long long>(sim_pulses));
        simulate.seed = opt_of(o_sim_seed, sim_seed);
        simulate.threads = opt_of(o_sim_threads, sim_threads);
        return tbtwin::cli::cmd_simulate(simulate);
    }
    if (sc_hist->parsed()) return tbtwin::cli::cmd_hist(hist);
    return tbtwin::cli::kConfigError;
}
