#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "tbtwin/analytic.hpp"
#include "tbtwin/rng.hpp"
#include "tbtwin/types.hpp"

namespace tbtwin::mc {

enum class DetectorId : std::uint8_t { signal = 0, idler = 1 };

// Sorted detection times for one detector, in integer picoseconds.
struct TimestampStream {
    DetectorId detector_id = DetectorId::signal;
    std::vector<std::int64_t> times_ps;
    std::int64_t span_ps = 0;

    std::size_t count() const { return times_ps.size(); }
};

struct RunControl {
    long long n_pulses = 1'000'000;
    std::uint64_t rng_seed = 1;
    long long stop_after_starts = 0; // 0 = pulse-bounded run
    long long chunk_size = 1ll << 22;
    int threads = 0; // 0 = hardware concurrency
};

struct ExperimentConfig {
    PulseTrainSpec train{};
    SourceSpec source{};
    std::optional<MziSpec> mzi_s{};
    std::optional<MziSpec> mzi_i{};
    DetectorSpec det_s{};
    DetectorSpec det_i{};
    LossBudget budget = LossBudget::table_default();
    RunControl run{};

    bool has_mzis() const { return mzi_s.has_value(); }

    void validate() const {
        train.validate();
        source.validate();
        det_s.validate();
        det_i.validate();
        budget.validate();
        if (mzi_s.has_value() != mzi_i.has_value())
            throw ConfigError("ExperimentConfig: both interferometers or neither");
        if (mzi_s) {
            mzi_s->validate_against(train);
            mzi_i->validate_against(train);
        }
        if (run.n_pulses < 0) throw ConfigError("RunControl: n_pulses must be >= 0");
        if (run.chunk_size < 1) throw ConfigError("RunControl: chunk_size must be >= 1");
    }
};

struct RunStats {
    long long n_pulses = 0;
    std::uint64_t seed = 0;
    long long generated_pairs = 0;
    long long singles_s = 0;
    long long singles_i = 0;
    std::int64_t span_ps = 0;
};

struct SimResult {
    TimestampStream signal;
    TimestampStream idler;
    RunStats stats;
};

enum class TimeSlot : int { early = 0, center = 1, late = 2 };

// Joint slot distribution of one pair from an isolated two-pulse cell, both
// photons post-selected into the monitored interferometer ports. Weights in
// sixteenths: the two-path interference term sits on (center, center), the
// non-interfering edges and the adjacent splits stay flat, and the remaining
// weight is carried by the two-slot splits so the total stays normalized.
inline std::array<double, 9> pair_outcome_pmf(double phi_p, double theta_sum,
                                              double epsilon) {
    if (epsilon < 0.0 || epsilon > 0.5)
        throw DomainError("pair_outcome_pmf: epsilon must lie in [0, 0.5]");
    const double q = 2.0 * (1.0 + (1.0 - 2.0 * epsilon) * std::cos(theta_sum - phi_p));
    std::array<double, 9> p{};
    auto at = [&p](TimeSlot s, TimeSlot i) -> double& {
        return p[static_cast<int>(s) * 3 + static_cast<int>(i)];
    };
    at(TimeSlot::early, TimeSlot::early) = 1.0 / 16.0;
    at(TimeSlot::late, TimeSlot::late) = 1.0 / 16.0;
    at(TimeSlot::center, TimeSlot::center) = q / 16.0;
    at(TimeSlot::early, TimeSlot::center) = 1.0 / 16.0;
    at(TimeSlot::center, TimeSlot::early) = 1.0 / 16.0;
    at(TimeSlot::center, TimeSlot::late) = 1.0 / 16.0;
    at(TimeSlot::late, TimeSlot::center) = 1.0 / 16.0;
    at(TimeSlot::early, TimeSlot::late) = (10.0 - q) / 32.0;
    at(TimeSlot::late, TimeSlot::early) = (10.0 - q) / 32.0;
    return p;
}

inline std::pair<TimeSlot, TimeSlot> sample_pair_outcome(double phi_p, double theta_sum,
                                                         double epsilon, rng::Stream& rng) {
    const auto pmf = pair_outcome_pmf(phi_p, theta_sum, epsilon);
    double u = rng.next_unit();
    for (int k = 0; k < 9; ++k) {
        u -= pmf[k];
        if (u < 0.0)
            return {static_cast<TimeSlot>(k / 3), static_cast<TimeSlot>(k % 3)};
    }
    return {TimeSlot::late, TimeSlot::early};
}

// Resolved sampling form of a JitterSpec (core sigma solved once).
struct JitterSampler {
    JitterModel model = JitterModel::none;
    double sigma = 0.0;
    double tail_weight = 0.0;
    double tail_scale = 0.0;

    static JitterSampler from(const JitterSpec& spec) {
        JitterSampler j;
        j.model = spec.model;
        if (spec.model == JitterModel::none) return j;
        j.sigma = analytic::jitter_core_sigma(spec);
        j.tail_weight = spec.tail_weight;
        j.tail_scale = spec.tail_scale_ps;
        return j;
    }

    double draw(rng::Stream& rng) const {
        switch (model) {
        case JitterModel::none:
            return 0.0;
        case JitterModel::gaussian:
            return sigma * rng.next_gaussian();
        case JitterModel::gaussian_exp_tail:
            if (rng.next_bernoulli(tail_weight)) return rng.next_laplace(tail_scale);
            return sigma * rng.next_gaussian();
        }
        return 0.0;
    }

    std::int64_t draw_ps(rng::Stream& rng) const {
        return static_cast<std::int64_t>(std::llround(draw(rng)));
    }
};

namespace detail {

struct TaggedEvent {
    std::int64_t t;
    std::uint64_t ordinal;
};

inline void finalize_stream(std::vector<TaggedEvent>& events, std::int64_t span,
                            double dead_time_ps, std::vector<std::int64_t>& out) {
    std::sort(events.begin(), events.end(), [](const TaggedEvent& a, const TaggedEvent& b) {
        return a.t != b.t ? a.t < b.t : a.ordinal < b.ordinal;
    });
    out.clear();
    out.reserve(events.size());
    const auto dead = static_cast<std::int64_t>(std::llround(dead_time_ps));
    std::int64_t last = std::numeric_limits<std::int64_t>::min();
    for (const auto& e : events) {
        if (e.t < 0 || e.t > span) continue;
        if (dead > 0 && last != std::numeric_limits<std::int64_t>::min() && e.t - last < dead)
            continue;
        out.push_back(e.t);
        last = e.t;
    }
}

// class ids keying the per-chunk substreams
enum : std::uint32_t {
    kClassBoth = 0,
    kClassCrossSI = 1,
    kClassCrossIS = 2,
    kClassSOnly = 3,
    kClassIOnly = 4,
    kClassDarkS = 5,
    kClassDarkI = 6,
    kClassTally = 7,
    kClassThermal = 8,
};

inline std::uint64_t make_ordinal(std::uint64_t chunk, std::uint32_t klass,
                                  std::uint64_t seq) {
    return (chunk << 28) | (static_cast<std::uint64_t>(klass) << 24) | (seq & 0xFFFFFF);
}

struct ChunkOutput {
    std::vector<TaggedEvent> s_events;
    std::vector<TaggedEvent> i_events;
    long long generated_pairs = 0;
};

struct EngineRates {
    // per-pulse Poisson rates of detected-event classes
    double both = 0.0;     // photon on each detector, signal slot = idler slot
    double cross_si = 0.0; // signal one slot earlier than idler
    double cross_is = 0.0;
    double s_only = 0.0;
    double i_only = 0.0;
    bool with_mzi = false;
    double mu = 0.0;
    double eta_s = 0.0, eta_i = 0.0;
    double q = 0.0; // interference weight in sixteenths, MZI runs only
};

inline EngineRates resolve_rates(const ExperimentConfig& cfg) {
    EngineRates r;
    r.mu = cfg.source.mean_pairs_per_pulse;
    r.eta_s = cfg.det_s.survival();
    r.eta_i = cfg.det_i.survival();
    r.with_mzi = cfg.has_mzis();
    if (!r.with_mzi) {
        r.both = r.mu * r.eta_s * r.eta_i;
        r.s_only = r.mu * r.eta_s * (1.0 - r.eta_i);
        r.i_only = r.mu * r.eta_i * (1.0 - r.eta_s);
        return r;
    }
    const double vis =
        (1.0 - 2.0 * cfg.mzi_s->extinction_error) * (1.0 - 2.0 * cfg.mzi_i->extinction_error);
    const double delta =
        cfg.mzi_s->phase_rad + cfg.mzi_i->phase_rad - cfg.train.inter_pulse_phase_rad;
    r.q = 2.0 * (1.0 + vis * std::cos(delta));
    // Long-train slot picture: one pair lands coincident with weight q/16,
    // splits across neighbouring slots with weight 1/16 per direction, and
    // otherwise at most one photon survives the port selection. Per-photon
    // port marginals stay at exactly 1/2.
    r.both = r.mu * (r.q / 16.0) * r.eta_s * r.eta_i;
    r.cross_si = r.mu * (1.0 / 16.0) * r.eta_s * r.eta_i;
    r.cross_is = r.mu * (1.0 / 16.0) * r.eta_s * r.eta_i;
    const double mon_both = (r.q + 2.0) / 16.0;
    const double mon_single = (6.0 - r.q) / 16.0;
    r.s_only = r.mu * r.eta_s * (mon_both * (1.0 - r.eta_i) + mon_single);
    r.i_only = r.mu * r.eta_i * (mon_both * (1.0 - r.eta_s) + mon_single);
    return r;
}

inline double expected_starts_per_pulse(const ExperimentConfig& cfg) {
    const EngineRates r = resolve_rates(cfg);
    const double dark_per_pulse = cfg.det_s.dark_rate_hz * cfg.train.period_ps * 1e-12;
    return r.both + r.cross_si + r.cross_is + r.s_only + dark_per_pulse;
}

class Engine {
  public:
    explicit Engine(const ExperimentConfig& cfg)
        : cfg_(cfg), rates_(resolve_rates(cfg)), jit_s_(JitterSampler::from(cfg.det_s.jitter)),
          jit_i_(JitterSampler::from(cfg.det_i.jitter)), period_(cfg.train.period_ps) {}

    ChunkOutput run_chunk(std::uint64_t chunk_index, long long first_pulse,
                          long long n_pulses) const {
        ChunkOutput out;
        if (cfg_.source.pair_number_model == PairNumberModel::thermal)
            run_thermal_chunk(chunk_index, first_pulse, n_pulses, out);
        else
            run_poisson_chunk(chunk_index, first_pulse, n_pulses, out);
        run_darks(chunk_index, first_pulse, n_pulses, out);
        return out;
    }

  private:
    std::int64_t pulse_time(long long pulse) const {
        return static_cast<std::int64_t>(
            std::llround(static_cast<double>(pulse) * period_ + 0.5 * period_));
    }

    // walks a per-pulse Poisson process via exponential gaps in continuous
    // pulse coordinates; emits one event per arrival
    template <typename Fn>
    void walk_pulses(rng::Stream& rng, double rate_per_pulse, long long n_pulses,
                     Fn&& emit) const {
        if (rate_per_pulse <= 0.0) return;
        double x = rng.next_exponential() / rate_per_pulse;
        while (x < static_cast<double>(n_pulses)) {
            emit(static_cast<long long>(x), rng);
            x += rng.next_exponential() / rate_per_pulse;
        }
    }

    void run_poisson_chunk(std::uint64_t chunk, long long first_pulse, long long n,
                           ChunkOutput& out) const {
        const EngineRates& r = rates_;

        {
            rng::Stream rng(cfg_.run.rng_seed, chunk, kClassBoth);
            std::uint64_t seq = 0;
            walk_pulses(rng, r.both, n, [&](long long k, rng::Stream& g) {
                const std::int64_t t = pulse_time(first_pulse + k);
                out.s_events.push_back({t + jit_s_.draw_ps(g), make_ordinal(chunk, kClassBoth, seq)});
                out.i_events.push_back({t + jit_i_.draw_ps(g), make_ordinal(chunk, kClassBoth, seq)});
                ++seq;
            });
        }
        if (r.with_mzi) {
            const auto slot = static_cast<std::int64_t>(std::llround(period_));
            {
                rng::Stream rng(cfg_.run.rng_seed, chunk, kClassCrossSI);
                std::uint64_t seq = 0;
                walk_pulses(rng, r.cross_si, n, [&](long long k, rng::Stream& g) {
                    const std::int64_t t = pulse_time(first_pulse + k);
                    out.s_events.push_back({t + jit_s_.draw_ps(g), make_ordinal(chunk, kClassCrossSI, seq)});
                    out.i_events.push_back({t + slot + jit_i_.draw_ps(g), make_ordinal(chunk, kClassCrossSI, seq)});
                    ++seq;
                });
            }
            {
                rng::Stream rng(cfg_.run.rng_seed, chunk, kClassCrossIS);
                std::uint64_t seq = 0;
                walk_pulses(rng, r.cross_is, n, [&](long long k, rng::Stream& g) {
                    const std::int64_t t = pulse_time(first_pulse + k);
                    out.s_events.push_back({t + slot + jit_s_.draw_ps(g), make_ordinal(chunk, kClassCrossIS, seq)});
                    out.i_events.push_back({t + jit_i_.draw_ps(g), make_ordinal(chunk, kClassCrossIS, seq)});
                    ++seq;
                });
            }
        }
        {
            rng::Stream rng(cfg_.run.rng_seed, chunk, kClassSOnly);
            std::uint64_t seq = 0;
            walk_pulses(rng, r.s_only, n, [&](long long k, rng::Stream& g) {
                std::int64_t t = pulse_time(first_pulse + k);
                if (r.with_mzi && g.next_bernoulli(0.5))
                    t += static_cast<std::int64_t>(std::llround(period_));
                out.s_events.push_back({t + jit_s_.draw_ps(g), make_ordinal(chunk, kClassSOnly, seq)});
                ++seq;
            });
        }
        {
            rng::Stream rng(cfg_.run.rng_seed, chunk, kClassIOnly);
            std::uint64_t seq = 0;
            walk_pulses(rng, r.i_only, n, [&](long long k, rng::Stream& g) {
                std::int64_t t = pulse_time(first_pulse + k);
                if (r.with_mzi && g.next_bernoulli(0.5))
                    t += static_cast<std::int64_t>(std::llround(period_));
                out.i_events.push_back({t + jit_i_.draw_ps(g), make_ordinal(chunk, kClassIOnly, seq)});
                ++seq;
            });
        }
        {
            rng::Stream rng(cfg_.run.rng_seed, chunk, kClassTally);
            out.generated_pairs = rng.next_poisson(rates_.mu * static_cast<double>(n));
        }
    }

    // Thermal pair numbers are bunched, so occupied pulses are sampled
    // explicitly and every pair is followed through ports and detection.
    void run_thermal_chunk(std::uint64_t chunk, long long first_pulse, long long n,
                           ChunkOutput& out) const {
        const double mu = rates_.mu;
        if (mu <= 0.0) return;
        rng::Stream rng(cfg_.run.rng_seed, chunk, kClassThermal);
        const double p_occupied = mu / (1.0 + mu);
        const double log_miss = std::log1p(-p_occupied);
        const double p_more = mu / (1.0 + mu); // geometric continuation
        const auto slot = static_cast<std::int64_t>(std::llround(period_));
        std::uint64_t seq = 0;

        double x = std::floor(rng.next_exponential() / -log_miss);
        long long k = static_cast<long long>(x);
        while (k < n) {
            const std::int64_t t = pulse_time(first_pulse + k);
            long long pairs = 1;
            while (rng.next_bernoulli(p_more)) ++pairs;
            out.generated_pairs += pairs;
            for (long long p = 0; p < pairs; ++p) {
                emit_pair_explicit(t, slot, rng, chunk, seq, out);
                ++seq;
            }
            x += 1.0 + std::floor(rng.next_exponential() / -log_miss);
            k = static_cast<long long>(x);
        }
    }

    void emit_pair_explicit(std::int64_t t, std::int64_t slot, rng::Stream& rng,
                            std::uint64_t chunk, std::uint64_t seq, ChunkOutput& out) const {
        bool s_present = false, i_present = false;
        std::int64_t ts = t, ti = t;
        if (!rates_.with_mzi) {
            s_present = i_present = true;
        } else {
            const double q = rates_.q;
            const double u = rng.next_unit() * 16.0;
            if (u < q) {
                s_present = i_present = true; // coincident slot
            } else if (u < q + 1.0) {
                s_present = i_present = true;
                ti += slot;
            } else if (u < q + 2.0) {
                s_present = i_present = true;
                ts += slot;
            } else if (u < q + 2.0 + (6.0 - q)) {
                s_present = true;
                if (rng.next_bernoulli(0.5)) ts += slot;
            } else if (u < q + 2.0 + 2.0 * (6.0 - q)) {
                i_present = true;
                if (rng.next_bernoulli(0.5)) ti += slot;
            } else {
                return; // both photons in the unmonitored ports
            }
        }
        if (s_present) s_present = rng.next_bernoulli(rates_.eta_s);
        if (i_present) i_present = rng.next_bernoulli(rates_.eta_i);
        if (s_present)
            out.s_events.push_back({ts + jit_s_.draw_ps(rng), make_ordinal(chunk, kClassThermal, seq)});
        if (i_present)
            out.i_events.push_back({ti + jit_i_.draw_ps(rng), make_ordinal(chunk, kClassThermal, seq)});
    }

    void run_darks(std::uint64_t chunk, long long first_pulse, long long n,
                   ChunkOutput& out) const {
        const double span = static_cast<double>(n) * period_;
        const double t0 = static_cast<double>(first_pulse) * period_;
        auto emit_darks = [&](double rate_hz, std::uint32_t klass,
                              std::vector<TaggedEvent>& sink) {
            if (rate_hz <= 0.0) return;
            rng::Stream rng(cfg_.run.rng_seed, chunk, klass);
            const double rate_per_ps = rate_hz * 1e-12;
            std::uint64_t seq = 0;
            double x = rng.next_exponential() / rate_per_ps;
            while (x < span) {
                sink.push_back({static_cast<std::int64_t>(std::llround(t0 + x)),
                                make_ordinal(chunk, klass, seq++)});
                x += rng.next_exponential() / rate_per_ps;
            }
        };
        emit_darks(cfg_.det_s.dark_rate_hz, kClassDarkS, out.s_events);
        emit_darks(cfg_.det_i.dark_rate_hz, kClassDarkI, out.i_events);
    }

    const ExperimentConfig& cfg_;
    EngineRates rates_;
    JitterSampler jit_s_, jit_i_;
    double period_;
};

inline std::vector<ChunkOutput> run_chunk_range(const Engine& engine,
                                                const ExperimentConfig& cfg,
                                                std::uint64_t first_chunk,
                                                std::uint64_t n_chunks, long long total_pulses) {
    std::vector<ChunkOutput> outputs(n_chunks);
    const long long chunk_size = cfg.run.chunk_size;
    unsigned workers = cfg.run.threads > 0 ? static_cast<unsigned>(cfg.run.threads)
                                           : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, n_chunks == 0 ? 1 : static_cast<unsigned>(
                                              std::min<std::uint64_t>(n_chunks, 64)));
    std::atomic<std::uint64_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::uint64_t idx = next.fetch_add(1);
            if (idx >= n_chunks) return;
            const std::uint64_t chunk = first_chunk + idx;
            const long long first_pulse = static_cast<long long>(chunk) * chunk_size;
            const long long n =
                std::min<long long>(chunk_size, total_pulses - first_pulse);
            if (n <= 0) continue;
            outputs[idx] = engine.run_chunk(chunk, first_pulse, n);
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    return outputs;
}

} // namespace detail

// Event-level simulation of one run. Deterministic for a fixed
// (config, seed): chunks own independent keyed substreams and merge in index
// order, so the worker count never changes the output.
inline SimResult simulate(const ExperimentConfig& cfg) {
    cfg.validate();
    const double period = cfg.train.period_ps;
    const long long max_pulses = 4'000'000'000'000'000ll; // exact double pulse indices
    if (cfg.run.n_pulses > max_pulses)
        throw OverflowError("simulate: n_pulses exceeds the exact integer range");
    if (static_cast<double>(cfg.run.n_pulses) * period > 4.0e18)
        throw OverflowError("simulate: timeline exceeds the 64-bit picosecond range");

    detail::Engine engine(cfg);
    const long long chunk_size = cfg.run.chunk_size;
    std::vector<detail::ChunkOutput> outputs;

    long long covered_pulses = 0;
    std::int64_t truncate_at = std::numeric_limits<std::int64_t>::max();
    long long target_starts = cfg.run.stop_after_starts;

    if (target_starts <= 0) {
        const long long n = cfg.run.n_pulses;
        const auto n_chunks =
            static_cast<std::uint64_t>(n > 0 ? (n + chunk_size - 1) / chunk_size : 0);
        outputs = detail::run_chunk_range(engine, cfg, 0, n_chunks, n);
        covered_pulses = n;
    } else {
        const double per_pulse = detail::expected_starts_per_pulse(cfg);
        if (per_pulse <= 0.0)
            throw ConfigError("simulate: stop_after_starts unreachable with zero rates");
        // start-bounded runs extend the pulse count as needed
        const long long cap = max_pulses;
        std::uint64_t next_chunk = 0;
        long long have_starts = 0;
        std::vector<detail::TaggedEvent> merged_s;
        while (have_starts < target_starts) {
            const long long remaining_starts = target_starts - have_starts;
            const double want_pulses =
                1.10 * static_cast<double>(remaining_starts) / per_pulse +
                4.0 * std::sqrt(static_cast<double>(remaining_starts)) / per_pulse +
                static_cast<double>(chunk_size);
            const long long first_pulse = static_cast<long long>(next_chunk) * chunk_size;
            if (first_pulse >= cap)
                throw OverflowError("simulate: start target not reached within pulse cap");
            // whole chunks only; a partial chunk would leave a pulse gap
            // before the next batch
            const auto n_chunks = static_cast<std::uint64_t>(
                (static_cast<long long>(want_pulses) + chunk_size - 1) / chunk_size);
            const long long total =
                first_pulse + static_cast<long long>(n_chunks) * chunk_size;
            auto batch =
                detail::run_chunk_range(engine, cfg, next_chunk, n_chunks, total);
            next_chunk += n_chunks;
            covered_pulses = static_cast<long long>(next_chunk) * chunk_size;
            for (auto& b : batch) {
                merged_s.insert(merged_s.end(), b.s_events.begin(), b.s_events.end());
                outputs.push_back(std::move(b));
            }
            // count usable starts so far (bounds only; dead time handled below)
            have_starts = 0;
            const auto span_now = static_cast<std::int64_t>(
                std::llround(static_cast<double>(covered_pulses) * period));
            for (const auto& e : merged_s)
                if (e.t >= 0 && e.t <= span_now) ++have_starts;
        }
        // time of the target-th start defines the cut
        std::vector<std::int64_t> start_times;
        start_times.reserve(merged_s.size());
        const auto span_now = static_cast<std::int64_t>(
            std::llround(static_cast<double>(covered_pulses) * period));
        for (const auto& e : merged_s)
            if (e.t >= 0 && e.t <= span_now) start_times.push_back(e.t);
        std::nth_element(start_times.begin(), start_times.begin() + (target_starts - 1),
                         start_times.end());
        truncate_at = start_times[target_starts - 1];
    }

    auto span = static_cast<std::int64_t>(
        std::llround(static_cast<double>(covered_pulses) * period));
    if (truncate_at != std::numeric_limits<std::int64_t>::max()) {
        // keep stops a few slots past the final start
        const auto margin = static_cast<std::int64_t>(std::llround(10.0 * period));
        span = std::min<std::int64_t>(span, truncate_at + margin);
    }

    std::vector<detail::TaggedEvent> all_s, all_i;
    long long generated_pairs = 0;
    for (auto& o : outputs) {
        all_s.insert(all_s.end(), o.s_events.begin(), o.s_events.end());
        all_i.insert(all_i.end(), o.i_events.begin(), o.i_events.end());
        generated_pairs += o.generated_pairs;
    }

    SimResult res;
    res.signal.detector_id = DetectorId::signal;
    res.idler.detector_id = DetectorId::idler;
    res.signal.span_ps = span;
    res.idler.span_ps = span;
    detail::finalize_stream(all_s, span, cfg.det_s.dead_time_ps, res.signal.times_ps);
    detail::finalize_stream(all_i, span, cfg.det_i.dead_time_ps, res.idler.times_ps);

    if (target_starts > 0 &&
        static_cast<long long>(res.signal.times_ps.size()) > target_starts)
        res.signal.times_ps.resize(target_starts);

    res.stats.n_pulses = covered_pulses;
    res.stats.seed = cfg.run.rng_seed;
    res.stats.generated_pairs = generated_pairs;
    res.stats.singles_s = static_cast<long long>(res.signal.times_ps.size());
    res.stats.singles_i = static_cast<long long>(res.idler.times_ps.size());
    res.stats.span_ps = span;
    return res;
}

// Standalone detector response: loss thinning, dark injection, timing
// jitter, dead-time pruning.
inline TimestampStream apply_detector(const TimestampStream& arrivals,
                                      const DetectorSpec& det, rng::Stream& rng) {
    det.validate();
    const JitterSampler jitter = JitterSampler::from(det.jitter);
    std::vector<detail::TaggedEvent> events;
    events.reserve(arrivals.times_ps.size());
    const double survival = det.survival();
    std::uint64_t seq = 0;
    for (const auto t : arrivals.times_ps) {
        if (!rng.next_bernoulli(survival)) continue;
        events.push_back({t + jitter.draw_ps(rng), seq++});
    }
    if (det.dark_rate_hz > 0.0 && arrivals.span_ps > 0) {
        const double rate_per_ps = det.dark_rate_hz * 1e-12;
        double x = rng.next_exponential() / rate_per_ps;
        while (x < static_cast<double>(arrivals.span_ps)) {
            events.push_back(
                {static_cast<std::int64_t>(std::llround(x)) + jitter.draw_ps(rng), seq++});
            x += rng.next_exponential() / rate_per_ps;
        }
    }
    TimestampStream out;
    out.detector_id = arrivals.detector_id;
    out.span_ps = arrivals.span_ps;
    detail::finalize_stream(events, arrivals.span_ps, det.dead_time_ps, out.times_ps);
    return out;
}

} // namespace tbtwin::mc
