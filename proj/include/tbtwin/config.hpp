#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tbtwin/analytic.hpp"
#include "tbtwin/montecarlo.hpp"
#include "tbtwin/types.hpp"

namespace tbtwin::cfg {

// Flat-section key/value experiment description. Unknown sections or keys
// are errors; every message carries the offending line number.
struct ResolvedConfig {
    mc::ExperimentConfig experiment;
    std::string canonical;
    std::uint64_t hash = 0;
    std::vector<std::string> warnings;
};

namespace detail {

struct RawEntry {
    std::string value;
    int line = 0;
    bool used = false;
};

using RawConfig = std::map<std::string, RawEntry>; // key "section.key"

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline RawConfig parse_lines(std::istream& in) {
    RawConfig raw;
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.erase(hash_pos);
        const std::string text = trim(line);
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
            section = trim(text.substr(1, text.size() - 2));
            if (section.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
        const std::string full = section + "." + key;
        if (raw.count(full))
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + full);
        raw[full] = {value, lineno, false};
    }
    return raw;
}

inline double to_double(const std::string& full, RawEntry& e) {
    e.used = true;
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end);
    if (end == e.value.c_str() || *end != '\0')
        throw ConfigError("line " + std::to_string(e.line) + ": " + full +
                          " expects a number, got '" + e.value + "'");
    return v;
}

inline long long to_int(const std::string& full, RawEntry& e) {
    e.used = true;
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end); // accepts 1e8 style
    if (end == e.value.c_str() || *end != '\0' || v != std::floor(v))
        throw ConfigError("line " + std::to_string(e.line) + ": " + full +
                          " expects an integer, got '" + e.value + "'");
    return static_cast<long long>(v);
}

inline std::string to_word(RawEntry& e) {
    e.used = true;
    return e.value;
}

struct Reader {
    RawConfig& raw;

    bool has(const std::string& full) const { return raw.count(full) != 0; }
    std::optional<double> number(const std::string& full) {
        auto it = raw.find(full);
        if (it == raw.end()) return std::nullopt;
        return to_double(full, it->second);
    }
    std::optional<long long> integer(const std::string& full) {
        auto it = raw.find(full);
        if (it == raw.end()) return std::nullopt;
        return to_int(full, it->second);
    }
    std::optional<std::string> word(const std::string& full) {
        auto it = raw.find(full);
        if (it == raw.end()) return std::nullopt;
        return to_word(it->second);
    }
};

inline JitterSpec read_jitter(Reader& r, const std::string& section) {
    const auto model = r.word(section + ".jitter_model");
    JitterSpec spec;
    if (!model || *model == "gaussian") {
        // default detector response: per-detector Gaussian sized so the
        // two-detector delay spread has an 80 ps FWHM
        spec.model = JitterModel::gaussian;
        spec.fwhm_ps = r.number(section + ".jitter_fwhm_ps").value_or(80.0 / std::sqrt(2.0));
        if (auto f = r.number(section + ".jitter_fwtm_ps")) spec.fwtm_ps = *f;
        return spec;
    }
    if (*model == "none") {
        spec.model = JitterModel::none;
        return spec;
    }
    if (*model == "calibrated") {
        const auto fwhm = r.number(section + ".jitter_fwhm_ps");
        const auto fwtm = r.number(section + ".jitter_fwtm_ps");
        if (!fwhm || !fwtm)
            throw ConfigError(section +
                              ": calibrated jitter needs jitter_fwhm_ps and jitter_fwtm_ps");
        return analytic::calibrate_jitter(*fwhm, *fwtm);
    }
    if (*model == "gaussian_exp_tail") {
        spec.model = JitterModel::gaussian_exp_tail;
        spec.fwhm_ps = r.number(section + ".jitter_fwhm_ps").value_or(80.0);
        spec.fwtm_ps = r.number(section + ".jitter_fwtm_ps").value_or(200.0);
        spec.tail_weight = r.number(section + ".jitter_tail_weight").value_or(0.0);
        spec.tail_scale_ps = r.number(section + ".jitter_tail_scale_ps").value_or(0.0);
        if (spec.tail_weight == 0.0 || spec.tail_scale_ps == 0.0)
            return analytic::calibrate_jitter(spec.fwhm_ps, spec.fwtm_ps);
        return spec;
    }
    throw ConfigError(section + ".jitter_model: unknown model '" + *model + "'");
}

inline DetectorSpec read_detector(Reader& r, const std::string& section, bool& arm_loss_set) {
    DetectorSpec det;
    if (auto v = r.number(section + ".arm_loss_db")) {
        det.arm_loss_db = *v;
        arm_loss_set = true;
    }
    if (auto v = r.number(section + ".quantum_efficiency")) det.quantum_efficiency = *v;
    if (auto v = r.number(section + ".dark_rate_hz")) det.dark_rate_hz = *v;
    if (auto v = r.number(section + ".window_ps")) det.window_ps = *v;
    if (auto v = r.number(section + ".dead_time_ps")) det.dead_time_ps = *v;
    det.jitter = read_jitter(r, section);
    return det;
}

} // namespace detail

inline ResolvedConfig resolve(std::istream& in) {
    detail::RawConfig raw = detail::parse_lines(in);
    detail::Reader r{raw};
    ResolvedConfig out;
    mc::ExperimentConfig& e = out.experiment;

    if (auto v = r.number("train.period_ps")) e.train.period_ps = *v;
    if (auto v = r.number("train.pulse_fwhm_ps")) e.train.pulse_fwhm_ps = *v;
    if (auto v = r.integer("train.n_pulses")) e.train.n_pulses = static_cast<int>(*v);
    if (auto v = r.number("train.inter_pulse_phase_rad")) e.train.inter_pulse_phase_rad = *v;
    if (auto v = r.number("train.rep_rate_hz")) e.train.rep_rate_hz = *v;
    else e.train.rep_rate_hz = 1.0e12 / e.train.period_ps;

    if (auto v = r.number("source.mean_pairs_per_pulse")) e.source.mean_pairs_per_pulse = *v;
    if (auto m = r.word("source.pair_number_model")) {
        if (*m == "poisson") e.source.pair_number_model = PairNumberModel::poisson;
        else if (*m == "thermal") e.source.pair_number_model = PairNumberModel::thermal;
        else throw ConfigError("source.pair_number_model: unknown model '" + *m + "'");
    }

    // budget: every key except arm_split is one loss item
    {
        LossBudget budget;
        bool any = false;
        if (auto split = r.word("budget.arm_split")) {
            any = true;
            if (*split == "split_evenly") budget.arm_split = ArmSplit::split_evenly;
            else if (*split == "per_arm_total") budget.arm_split = ArmSplit::per_arm_total;
            else throw ConfigError("budget.arm_split: unknown mode '" + *split + "'");
        }
        for (auto& [full, entry] : raw) {
            if (full.rfind("budget.", 0) != 0 || full == "budget.arm_split") continue;
            any = true;
            budget.items.push_back(
                {full.substr(7), detail::to_double(full, entry)});
        }
        if (any) e.budget = budget;
    }

    const bool mzi_s_present = raw.count("mzi_s.phase_rad") || raw.count("mzi_s.delay_ps") ||
                               raw.count("mzi_s.insertion_loss_db") ||
                               raw.count("mzi_s.extinction_error") || r.has("mzi_s.enabled");
    const bool mzi_i_present = raw.count("mzi_i.phase_rad") || raw.count("mzi_i.delay_ps") ||
                               raw.count("mzi_i.insertion_loss_db") ||
                               raw.count("mzi_i.extinction_error") || r.has("mzi_i.enabled");
    if (mzi_s_present != mzi_i_present)
        throw ConfigError("config: provide both interferometer sections or neither");
    if (mzi_s_present && mzi_i_present) {
        auto read_mzi = [&](const std::string& section) {
            MziSpec mzi;
            mzi.delay_ps = r.number(section + ".delay_ps").value_or(e.train.period_ps);
            mzi.phase_rad = r.number(section + ".phase_rad").value_or(0.0);
            if (auto v = r.number(section + ".insertion_loss_db")) mzi.insertion_loss_db = *v;
            if (auto v = r.number(section + ".extinction_error")) mzi.extinction_error = *v;
            if (auto v = r.word(section + ".enabled"); v && *v != "true" && *v != "false")
                throw ConfigError(section + ".enabled: expected true or false");
            return mzi;
        };
        e.mzi_s = read_mzi("mzi_s");
        e.mzi_i = read_mzi("mzi_i");
    }

    bool arm_s_set = false, arm_i_set = false;
    e.det_s = detail::read_detector(r, "detector_s", arm_s_set);
    e.det_i = detail::read_detector(r, "detector_i", arm_i_set);
    if (!arm_s_set) e.det_s.arm_loss_db = e.budget.per_arm_db();
    if (!arm_i_set) e.det_i.arm_loss_db = e.budget.per_arm_db();

    if (auto v = r.integer("run.n_pulses")) e.run.n_pulses = *v;
    if (auto v = r.integer("run.rng_seed")) e.run.rng_seed = static_cast<std::uint64_t>(*v);
    if (auto v = r.integer("run.stop_after_starts")) e.run.stop_after_starts = *v;
    if (auto v = r.integer("run.chunk_size")) e.run.chunk_size = *v;
    if (auto v = r.integer("run.threads")) e.run.threads = static_cast<int>(*v);

    for (const auto& [full, entry] : raw)
        if (!entry.used)
            throw ConfigError("line " + std::to_string(entry.line) + ": unknown key " + full);

    e.validate();
    if (e.source.wants_warning())
        out.warnings.push_back("mean_pairs_per_pulse above 1: outside the perturbative regime");

    // canonical dump and hash for the reproducibility header
    {
        std::ostringstream dump;
        char buf[64];
        auto put = [&](const std::string& key, double v) {
            std::snprintf(buf, sizeof buf, "%.12g", v);
            dump << key << "=" << buf << "\n";
        };
        put("train.period_ps", e.train.period_ps);
        put("train.pulse_fwhm_ps", e.train.pulse_fwhm_ps);
        put("train.n_pulses", e.train.n_pulses);
        put("train.inter_pulse_phase_rad", e.train.inter_pulse_phase_rad);
        put("train.rep_rate_hz", e.train.rep_rate_hz);
        put("source.mean_pairs_per_pulse", e.source.mean_pairs_per_pulse);
        dump << "source.pair_number_model="
             << (e.source.pair_number_model == PairNumberModel::poisson ? "poisson" : "thermal")
             << "\n";
        for (const auto& item : e.budget.items) put("budget." + item.label, item.loss_db);
        dump << "budget.arm_split="
             << (e.budget.arm_split == ArmSplit::split_evenly ? "split_evenly" : "per_arm_total")
             << "\n";
        auto put_det = [&](const std::string& s, const DetectorSpec& d) {
            put(s + ".arm_loss_db", d.arm_loss_db);
            put(s + ".quantum_efficiency", d.quantum_efficiency);
            put(s + ".dark_rate_hz", d.dark_rate_hz);
            put(s + ".window_ps", d.window_ps);
            put(s + ".dead_time_ps", d.dead_time_ps);
            put(s + ".jitter_model", static_cast<int>(d.jitter.model));
            put(s + ".jitter_fwhm_ps", d.jitter.fwhm_ps);
            put(s + ".jitter_fwtm_ps", d.jitter.fwtm_ps);
            put(s + ".jitter_tail_weight", d.jitter.tail_weight);
            put(s + ".jitter_tail_scale_ps", d.jitter.tail_scale_ps);
        };
        put_det("detector_s", e.det_s);
        put_det("detector_i", e.det_i);
        if (e.mzi_s) {
            put("mzi_s.delay_ps", e.mzi_s->delay_ps);
            put("mzi_s.phase_rad", e.mzi_s->phase_rad);
            put("mzi_s.insertion_loss_db", e.mzi_s->insertion_loss_db);
            put("mzi_s.extinction_error", e.mzi_s->extinction_error);
            put("mzi_i.delay_ps", e.mzi_i->delay_ps);
            put("mzi_i.phase_rad", e.mzi_i->phase_rad);
            put("mzi_i.insertion_loss_db", e.mzi_i->insertion_loss_db);
            put("mzi_i.extinction_error", e.mzi_i->extinction_error);
        }
        put("run.n_pulses", static_cast<double>(e.run.n_pulses));
        put("run.rng_seed", static_cast<double>(e.run.rng_seed));
        put("run.stop_after_starts", static_cast<double>(e.run.stop_after_starts));
        put("run.chunk_size", static_cast<double>(e.run.chunk_size));
        out.canonical = dump.str();
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (const unsigned char c : out.canonical) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        out.hash = h;
    }
    return out;
}

inline ResolvedConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return resolve(in);
}

} // namespace tbtwin::cfg
