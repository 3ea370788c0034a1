#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pmp/channel.hpp"
#include "pmp/errors.hpp"
#include "pmp/link.hpp"
#include "pmp/metrics.hpp"
#include "pmp/ofdm.hpp"
#include "pmp/pmp_operator.hpp"
#include "pmp/precoders.hpp"
#include "pmp/rng.hpp"
#include "pmp/solver.hpp"
#include "pmp/toneplan.hpp"

namespace pmp {

// ---------------------------------------------------------------------------
// Configuration

struct PrecoderSpec {
    enum class Kind { ls, mf, ls_clip, pmp };
    Kind kind = Kind::ls;
    double lambda = 0.25;           // pmp
    std::size_t iterations = 2000;  // pmp
    double target_par_db = 4.0;     // ls_clip
    std::optional<TargetPrecoder> emulate;  // pmp
    std::string label;
};

struct ExperimentConfig {
    std::size_t antennas = 100;  // N
    std::size_t users = 10;      // M
    std::size_t taps = 4;        // T
    TonePlan plan = TonePlan::ieee80211n_40mhz();
    std::vector<PrecoderSpec> precoders;
    std::vector<double> snr_grid_db;
    std::size_t frames = 1000;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    std::size_t threads = 0;  // 0: hardware concurrency

    double ccdf_min_db = 0.0;
    double ccdf_step_db = 0.1;
    std::optional<double> ccdf_max_db;  // default: 10*log10(2W)

    std::size_t ser_frames = 200;
    std::size_t ser_abort_errors = 100;

    std::vector<double> lambda_list;          // tradeoff
    std::vector<std::size_t> iteration_list;  // tradeoff (K values)
    std::vector<double> clip_target_list;     // tradeoff
    std::vector<std::size_t> antenna_list;    // antenna sweep
    std::vector<std::size_t> tap_list;        // antenna sweep

    std::size_t resolved_threads() const {
        if (threads > 0) return threads;
        const unsigned hc = std::thread::hardware_concurrency();
        return hc > 0 ? hc : 1;
    }

    std::vector<double> ccdf_grid() const {
        const double hi = ccdf_max_db ? *ccdf_max_db : to_db(2.0 * static_cast<double>(plan.tones));
        std::vector<double> grid;
        for (double x = ccdf_min_db; x <= hi + 1e-12; x += ccdf_step_db) grid.push_back(x);
        return grid;
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known) throw ConfigError(item.key(), "unknown key");
    }
}

inline std::size_t as_uint(const nlohmann::json& v, const char* field) {
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw ConfigError(field, "must be a nonnegative integer");
    if (v.is_number_integer() && v.get<long long>() < 0)
        throw ConfigError(field, "must be a nonnegative integer");
    return v.get<std::size_t>();
}

inline double as_double(const nlohmann::json& v, const char* field) {
    if (!v.is_number()) throw ConfigError(field, "must be a number");
    return v.get<double>();
}

inline PrecoderSpec parse_precoder(const nlohmann::json& j, double worst_case_par_db) {
    if (!j.is_object()) throw ConfigError("precoders", "each entry must be an object");
    reject_unknown_keys(j, {"kind", "lambda", "iterations", "target_par_db", "emulate", "label"});
    if (!j.contains("kind") || !j["kind"].is_string())
        throw ConfigError("kind", "missing precoder kind");
    PrecoderSpec p;
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "ls")
        p.kind = PrecoderSpec::Kind::ls;
    else if (kind == "mf")
        p.kind = PrecoderSpec::Kind::mf;
    else if (kind == "ls_clip")
        p.kind = PrecoderSpec::Kind::ls_clip;
    else if (kind == "pmp")
        p.kind = PrecoderSpec::Kind::pmp;
    else
        throw ConfigError("kind", "expected ls, mf, ls_clip or pmp");
    if (j.contains("lambda")) {
        p.lambda = as_double(j["lambda"], "lambda");
        if (!(p.lambda >= 0.0)) throw ConfigError("lambda", "must be nonnegative");
    }
    if (j.contains("iterations")) {
        p.iterations = as_uint(j["iterations"], "iterations");
        if (p.iterations < 1) throw ConfigError("iterations", "must be at least 1");
    }
    if (j.contains("target_par_db")) {
        p.target_par_db = as_double(j["target_par_db"], "target_par_db");
        if (p.target_par_db < 0.0 || p.target_par_db > worst_case_par_db)
            throw ConfigError("target_par_db", "must lie in [0, 10*log10(2W)] dB");
    }
    if (j.contains("emulate")) {
        const std::string e = j["emulate"].get<std::string>();
        if (e == "pseudo_inverse")
            p.emulate = TargetPrecoder::pseudo_inverse;
        else if (e == "matched_filter")
            p.emulate = TargetPrecoder::matched_filter;
        else
            throw ConfigError("emulate", "expected pseudo_inverse or matched_filter");
    }
    if (j.contains("label")) p.label = j["label"].get<std::string>();
    if (p.label.empty()) p.label = kind;
    return p;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
    detail::reject_unknown_keys(
        j, {"antennas", "users", "taps", "tones", "tone_plan", "precoders", "snr_grid_db",
            "frames", "seed", "out_dir", "threads", "ccdf_grid_db", "ser_frames",
            "ser_abort_errors", "lambda_list", "iteration_list", "clip_target_list",
            "antenna_list", "tap_list"});

    ExperimentConfig cfg;
    if (j.contains("tone_plan")) {
        const auto& tp = j["tone_plan"];
        if (tp.is_string()) {
            if (tp.get<std::string>() != "80211n-40mhz")
                throw ConfigError("tone_plan", "unknown plan name (expected 80211n-40mhz)");
            cfg.plan = TonePlan::ieee80211n_40mhz();
        } else {
            cfg.plan = TonePlan::from_json(tp);
        }
    }
    if (j.contains("tones") && detail::as_uint(j["tones"], "tones") != cfg.plan.tones)
        throw ConfigError("tones", "does not match the tone plan");

    if (j.contains("antennas")) cfg.antennas = detail::as_uint(j["antennas"], "antennas");
    if (j.contains("users")) cfg.users = detail::as_uint(j["users"], "users");
    if (j.contains("taps")) cfg.taps = detail::as_uint(j["taps"], "taps");
    if (cfg.antennas == 0) throw ConfigError("antennas", "must be positive");
    if (cfg.users == 0) throw ConfigError("users", "must be positive");
    if (cfg.taps == 0) throw ConfigError("taps", "must be positive");
    if (cfg.taps > cfg.plan.tones) throw ConfigError("taps", "cannot exceed the tone count");

    const double worst_case = to_db(2.0 * static_cast<double>(cfg.plan.tones));
    if (j.contains("precoders")) {
        if (!j["precoders"].is_array()) throw ConfigError("precoders", "must be an array");
        for (const auto& pj : j["precoders"])
            cfg.precoders.push_back(detail::parse_precoder(pj, worst_case));
    }
    for (std::size_t i = 0; i < cfg.precoders.size(); ++i)
        for (std::size_t k = i + 1; k < cfg.precoders.size(); ++k)
            if (cfg.precoders[i].label == cfg.precoders[k].label)
                throw ConfigError("label", "duplicate precoder label '" + cfg.precoders[i].label + "'");

    const bool needs_inversion = std::any_of(
        cfg.precoders.begin(), cfg.precoders.end(), [](const PrecoderSpec& p) {
            return p.kind != PrecoderSpec::Kind::mf;
        });
    if (needs_inversion && cfg.users >= cfg.antennas)
        throw ConfigError("users", "must be smaller than antennas for LS/PMP experiments");

    if (j.contains("snr_grid_db")) {
        for (const auto& v : j["snr_grid_db"]) cfg.snr_grid_db.push_back(detail::as_double(v, "snr_grid_db"));
        for (std::size_t i = 1; i < cfg.snr_grid_db.size(); ++i)
            if (!(cfg.snr_grid_db[i] > cfg.snr_grid_db[i - 1]))
                throw ConfigError("snr_grid_db", "must be strictly increasing");
    }
    if (j.contains("frames")) cfg.frames = detail::as_uint(j["frames"], "frames");
    if (cfg.frames < 1) throw ConfigError("frames", "must be at least 1");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer() && !j["seed"].is_number_unsigned())
            throw ConfigError("seed", "must be an integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("threads")) cfg.threads = detail::as_uint(j["threads"], "threads");

    if (j.contains("ccdf_grid_db")) {
        const auto& g = j["ccdf_grid_db"];
        detail::reject_unknown_keys(g, {"min", "step", "max"});
        if (g.contains("min")) cfg.ccdf_min_db = detail::as_double(g["min"], "ccdf_grid_db");
        if (g.contains("step")) cfg.ccdf_step_db = detail::as_double(g["step"], "ccdf_grid_db");
        if (g.contains("max")) cfg.ccdf_max_db = detail::as_double(g["max"], "ccdf_grid_db");
        if (!(cfg.ccdf_step_db > 0.0)) throw ConfigError("ccdf_grid_db", "step must be positive");
    }
    if (j.contains("ser_frames")) cfg.ser_frames = detail::as_uint(j["ser_frames"], "ser_frames");
    if (cfg.ser_frames < 1) throw ConfigError("ser_frames", "must be at least 1");
    if (j.contains("ser_abort_errors"))
        cfg.ser_abort_errors = detail::as_uint(j["ser_abort_errors"], "ser_abort_errors");

    if (j.contains("lambda_list"))
        for (const auto& v : j["lambda_list"]) {
            const double l = detail::as_double(v, "lambda_list");
            if (!(l >= 0.0)) throw ConfigError("lambda_list", "entries must be nonnegative");
            cfg.lambda_list.push_back(l);
        }
    if (j.contains("iteration_list"))
        for (const auto& v : j["iteration_list"]) {
            const std::size_t k = detail::as_uint(v, "iteration_list");
            if (k < 1) throw ConfigError("iteration_list", "entries must be at least 1");
            cfg.iteration_list.push_back(k);
        }
    if (j.contains("clip_target_list"))
        for (const auto& v : j["clip_target_list"]) {
            const double t = detail::as_double(v, "clip_target_list");
            if (t < 0.0 || t > worst_case)
                throw ConfigError("clip_target_list", "entries must lie in [0, 10*log10(2W)] dB");
            cfg.clip_target_list.push_back(t);
        }
    if (j.contains("antenna_list"))
        for (const auto& v : j["antenna_list"]) {
            const std::size_t n = detail::as_uint(v, "antenna_list");
            if (n <= cfg.users) throw ConfigError("antenna_list", "entries must exceed the user count");
            cfg.antenna_list.push_back(n);
        }
    if (j.contains("tap_list"))
        for (const auto& v : j["tap_list"]) {
            const std::size_t t = detail::as_uint(v, "tap_list");
            if (t == 0 || t > cfg.plan.tones) throw ConfigError("tap_list", "entries must lie in [1, W]");
            cfg.tap_list.push_back(t);
        }
    return cfg;
}

// ---------------------------------------------------------------------------
// CSV output (locale-independent, shortest round-trip floats)

inline std::string fmt_double(double v) {
    std::array<char, 64> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open output file " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Parallel frame map: fn(frame_index) runs exactly once per index; callers
// store results by index so output never depends on scheduling.

template <typename Fn>
void parallel_frames(std::size_t count, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min(threads, count);
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Per-frame data shared by all precoders (fairness: identical channels,
// payloads and noise streams regardless of the precoder under test).

struct FrameData {
    ChannelRealization chan;
    std::vector<UserPayload> payloads;
    std::vector<CVec> tone_symbols;
};

inline FrameData make_frame_data(std::uint64_t seed, std::size_t frame, std::size_t antennas,
                                 std::size_t users, std::size_t taps, const TonePlan& plan,
                                 std::uint64_t channel_variant = 0) {
    FrameData fd;
    Rng chan_rng(derive_seed(seed, {frame, static_cast<std::uint64_t>(Stream::channel), channel_variant}));
    fd.chan = draw_channel(chan_rng, antennas, users, taps, plan.tones);
    const double scale = 1.0 / std::sqrt(static_cast<double>(users));
    fd.payloads.reserve(users);
    for (std::size_t u = 0; u < users; ++u) {
        Rng payload_rng(frame_seed(seed, frame, Stream::payload, u));
        fd.payloads.push_back(make_payload(payload_rng, plan.active.size(), scale));
    }
    fd.tone_symbols = assemble_tone_symbols(fd.payloads, plan.active.size());
    return fd;
}

inline TxFrame precode_with(const PrecoderSpec& p, const FrameData& fd, const TonePlan& plan) {
    switch (p.kind) {
        case PrecoderSpec::Kind::ls:
            return precode_ls(fd.tone_symbols, plan, fd.chan);
        case PrecoderSpec::Kind::mf:
            return precode_mf(fd.tone_symbols, plan, fd.chan);
        case PrecoderSpec::Kind::ls_clip:
            return precode_ls_clip(fd.tone_symbols, plan, fd.chan, p.target_par_db);
        case PrecoderSpec::Kind::pmp:
        default: {
            PmpSettings settings;
            settings.lambda = p.lambda;
            settings.iterations = p.iterations;
            settings.emulate = p.emulate;
            return precode_pmp_detailed(fd.tone_symbols, plan, fd.chan, settings).frame;
        }
    }
}

// ---------------------------------------------------------------------------
// par-ccdf

struct CcdfSeries {
    std::string label;
    std::vector<double> par_samples;  // linear, pooled over antennas and frames
    std::vector<double> obr_samples;  // linear, one per frame
    std::vector<double> curve;        // CCDF on the grid
    double par_star_db = 0.0;
};

struct CcdfOutput {
    std::vector<double> grid_db;
    std::vector<CcdfSeries> series;
};

inline CcdfOutput run_par_ccdf(const ExperimentConfig& cfg, bool write_files = true) {
    if (cfg.precoders.empty()) throw ConfigError("precoders", "at least one precoder required");
    const std::size_t p_count = cfg.precoders.size();
    std::vector<std::vector<std::vector<double>>> par(p_count,
                                                      std::vector<std::vector<double>>(cfg.frames));
    std::vector<std::vector<double>> obr(p_count, std::vector<double>(cfg.frames));

    parallel_frames(cfg.frames, cfg.resolved_threads(), [&](std::size_t f) {
        const FrameData fd = make_frame_data(cfg.seed, f, cfg.antennas, cfg.users, cfg.taps, cfg.plan);
        for (std::size_t p = 0; p < p_count; ++p) {
            const TxFrame frame = precode_with(cfg.precoders[p], fd, cfg.plan);
            std::vector<double>& samples = par[p][f];
            samples.resize(cfg.antennas);
            for (std::size_t ni = 0; ni < cfg.antennas; ++ni)
                samples[ni] = par_linear(std::span<const cplx>(frame.time.row(ni), cfg.plan.tones));
            obr[p][f] = obr_linear(frame.freq, cfg.plan);
        }
    });

    CcdfOutput out;
    out.grid_db = cfg.ccdf_grid();
    for (std::size_t p = 0; p < p_count; ++p) {
        CcdfSeries s;
        s.label = cfg.precoders[p].label;
        for (std::size_t f = 0; f < cfg.frames; ++f)
            s.par_samples.insert(s.par_samples.end(), par[p][f].begin(), par[p][f].end());
        s.obr_samples = std::move(obr[p]);
        s.curve = ccdf(s.par_samples, out.grid_db);
        s.par_star_db = par_star_db(s.par_samples);
        out.series.push_back(std::move(s));
    }

    if (write_files) {
        std::vector<std::vector<std::string>> curve_rows;
        for (const CcdfSeries& s : out.series)
            for (std::size_t g = 0; g < out.grid_db.size(); ++g)
                curve_rows.push_back({fmt_double(out.grid_db[g]), fmt_double(s.curve[g]), s.label});
        write_csv(std::filesystem::path(cfg.out_dir) / "ccdf.csv",
                  {"x_value", "y_value", "series_label"}, curve_rows);

        std::vector<std::vector<std::string>> star_rows;
        for (const CcdfSeries& s : out.series)
            star_rows.push_back({s.label, fmt_double(s.par_star_db)});
        write_csv(std::filesystem::path(cfg.out_dir) / "par_star.csv",
                  {"precoder", "par_star_db"}, star_rows);
    }
    return out;
}

// ---------------------------------------------------------------------------
// SER engine: shared by ser-sweep and the tradeoff command. Rows are
// transmit-signal variants evaluated against identical channels, payloads and
// noise streams. Early abort freezes a (row, snr) cell once enough block
// errors accumulate, evaluated at fixed batch boundaries so results do not
// depend on the thread count.

struct SerSeries {
    std::string label;
    std::vector<double> ser;             // per snr grid point
    std::vector<std::size_t> user_frames;  // denominator per point
    std::optional<double> operating_point_db;
};

namespace detail {

inline constexpr std::size_t kSerBatch = 8;

/// One transmit variant for one frame: the frame itself plus the per-tone,
/// per-user effective symbol gains for the receiver (empty = identity).
struct RowSignal {
    std::optional<TxFrame> frame;
    std::vector<double> symbol_gain;
};

/// producer(frame_data, frame_index, row_needed) returns one signal per row;
/// rows whose mask is false may be skipped.
using RowProducer =
    std::function<std::vector<RowSignal>(const FrameData&, std::size_t, const std::vector<char>&)>;

inline std::vector<SerSeries> ser_engine(const ExperimentConfig& cfg,
                                         const std::vector<std::string>& labels,
                                         const RowProducer& producer) {
    const std::size_t rows = labels.size();
    const std::size_t snr_count = cfg.snr_grid_db.size();
    if (snr_count == 0) throw ConfigError("snr_grid_db", "required for error-rate runs");

    std::vector<std::vector<std::size_t>> errors(rows, std::vector<std::size_t>(snr_count, 0));
    std::vector<std::vector<std::size_t>> totals(rows, std::vector<std::size_t>(snr_count, 0));
    std::vector<char> row_active(rows, 1);
    // frozen[r][s]: stop accumulating once the abort threshold is reached
    std::vector<std::vector<char>> frozen(rows, std::vector<char>(snr_count, 0));

    std::vector<std::vector<std::vector<std::uint8_t>>> batch_flags;  // [frame_in_batch][row][snr*users]

    for (std::size_t start = 0; start < cfg.ser_frames; start += kSerBatch) {
        const std::size_t batch = std::min(kSerBatch, cfg.ser_frames - start);
        if (std::none_of(row_active.begin(), row_active.end(), [](char a) { return a != 0; })) break;
        batch_flags.assign(batch, {});

        parallel_frames(batch, cfg.resolved_threads(), [&](std::size_t b) {
            const std::size_t f = start + b;
            const FrameData fd =
                make_frame_data(cfg.seed, f, cfg.antennas, cfg.users, cfg.taps, cfg.plan);
            const std::vector<RowSignal> signals = producer(fd, f, row_active);
            auto& flags = batch_flags[b];
            flags.assign(rows, {});
            for (std::size_t r = 0; r < rows; ++r) {
                if (!signals[r].frame) continue;
                flags[r].assign(snr_count * cfg.users, 2);  // 2 marks "not evaluated"
                for (std::size_t s = 0; s < snr_count; ++s) {
                    if (frozen[r][s]) continue;
                    Rng noise_rng(frame_seed(cfg.seed, f, Stream::noise, s));
                    const std::vector<std::uint8_t> outcome =
                        run_link(*signals[r].frame, cfg.plan, fd.chan, fd.payloads,
                                 cfg.snr_grid_db[s], noise_rng, CodeSpec{},
                                 signals[r].symbol_gain);
                    std::copy(outcome.begin(), outcome.end(), flags[r].begin() + s * cfg.users);
                }
            }
        });

        // merge in frame order, then re-evaluate freezing
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t r = 0; r < rows; ++r) {
                if (batch_flags[b][r].empty()) continue;
                for (std::size_t s = 0; s < snr_count; ++s) {
                    if (batch_flags[b][r][s * cfg.users] == 2) continue;
                    for (std::size_t u = 0; u < cfg.users; ++u)
                        errors[r][s] += batch_flags[b][r][s * cfg.users + u];
                    totals[r][s] += cfg.users;
                }
            }
        for (std::size_t r = 0; r < rows; ++r) {
            bool any = false;
            for (std::size_t s = 0; s < snr_count; ++s) {
                if (!frozen[r][s] && cfg.ser_abort_errors > 0 && errors[r][s] >= cfg.ser_abort_errors)
                    frozen[r][s] = 1;
                if (!frozen[r][s]) any = true;
            }
            row_active[r] = any ? 1 : 0;
        }
    }

    std::vector<SerSeries> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        out[r].label = labels[r];
        out[r].ser.resize(snr_count);
        out[r].user_frames = totals[r];
        for (std::size_t s = 0; s < snr_count; ++s)
            out[r].ser[s] = totals[r][s] ? static_cast<double>(errors[r][s]) /
                                               static_cast<double>(totals[r][s])
                                         : 0.0;
        try {
            out[r].operating_point_db = snr_operating_point_db(cfg.snr_grid_db, out[r].ser);
        } catch (const NotBracketedError&) {
            out[r].operating_point_db.reset();
        }
    }
    return out;
}

}  // namespace detail

struct SerOutput {
    std::vector<double> snr_grid_db;
    std::vector<SerSeries> series;
};

inline SerOutput run_ser_sweep(const ExperimentConfig& cfg, bool write_files = true) {
    if (cfg.precoders.empty()) throw ConfigError("precoders", "at least one precoder required");
    std::vector<std::string> labels;
    for (const PrecoderSpec& p : cfg.precoders) labels.push_back(p.label);

    const detail::RowProducer producer = [&](const FrameData& fd, std::size_t,
                                             const std::vector<char>& active) {
        std::vector<detail::RowSignal> signals(cfg.precoders.size());
        for (std::size_t p = 0; p < cfg.precoders.size(); ++p) {
            if (!active[p]) continue;
            signals[p].frame = precode_with(cfg.precoders[p], fd, cfg.plan);
            if (cfg.precoders[p].kind == PrecoderSpec::Kind::mf)
                signals[p].symbol_gain = mf_effective_gains(cfg.plan, fd.chan);
        }
        return signals;
    };

    SerOutput out;
    out.snr_grid_db = cfg.snr_grid_db;
    out.series = detail::ser_engine(cfg, labels, producer);

    if (write_files) {
        std::vector<std::vector<std::string>> rows;
        for (const SerSeries& s : out.series)
            for (std::size_t i = 0; i < out.snr_grid_db.size(); ++i)
                rows.push_back({fmt_double(out.snr_grid_db[i]), fmt_double(s.ser[i]), s.label});
        write_csv(std::filesystem::path(cfg.out_dir) / "ser.csv",
                  {"x_value", "y_value", "series_label"}, rows);

        std::vector<std::vector<std::string>> op_rows;
        for (const SerSeries& s : out.series)
            op_rows.push_back(
                {s.label, s.operating_point_db ? fmt_double(*s.operating_point_db) : ""});
        write_csv(std::filesystem::path(cfg.out_dir) / "operating_points.csv",
                  {"precoder", "snr_operating_point_db"}, op_rows);
    }
    return out;
}

// ---------------------------------------------------------------------------
// tradeoff: PMP rows over (lambda, K) and LS+clip rows over target PAR.
// Per frame the constraint problem and its Lipschitz constant are shared by
// all lambda rows, and every K in the list is a checkpoint of one solver run.

struct TradeoffRow {
    std::string label;
    double lambda = 0.0;            // pmp rows
    std::size_t iterations = 0;     // pmp rows
    double clip_target_db = 0.0;    // clip rows
    bool is_pmp = true;
    double par_star_db = 0.0;
    double median_obr = 0.0;  // linear
    std::optional<double> operating_point_db;
};

struct TradeoffOutput {
    std::vector<TradeoffRow> pmp_rows;
    std::vector<TradeoffRow> clip_rows;
};

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) throw StatisticsError("median of empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

inline TradeoffOutput run_tradeoff(const ExperimentConfig& cfg, bool write_files = true) {
    if (cfg.lambda_list.empty() && cfg.clip_target_list.empty())
        throw ConfigError("lambda_list", "tradeoff needs lambda_list or clip_target_list");
    std::vector<std::size_t> k_list = cfg.iteration_list;
    if (k_list.empty()) k_list.push_back(2000);
    std::sort(k_list.begin(), k_list.end());
    k_list.erase(std::unique(k_list.begin(), k_list.end()), k_list.end());
    const std::size_t k_max = k_list.back();

    struct PmpRowId {
        double lambda;
        std::size_t k;
    };
    std::vector<PmpRowId> pmp_ids;
    for (double l : cfg.lambda_list)
        for (std::size_t k : k_list) pmp_ids.push_back({l, k});
    const std::size_t pmp_rows = pmp_ids.size();
    const std::size_t clip_rows = cfg.clip_target_list.size();
    const std::size_t rows = pmp_rows + clip_rows;

    const auto produce_all = [&](const FrameData& fd) {
        std::vector<TxFrame> frames(rows);
        if (pmp_rows > 0) {
            PmpProblem problem = build_pmp_problem(fd.tone_symbols, cfg.plan, fd.chan);
            RealPmpProblem real = to_real(problem);
            double sigma;
            double inflate = 1.001;
            try {
                sigma = sigma_max(real.op, 1e-6, 3000);
            } catch (const ConvergenceError& e) {
                sigma = e.last_estimate;
                inflate = 1.01;
            }
            for (std::size_t li = 0; li < cfg.lambda_list.size(); ++li) {
                LinfLsProblem lp;
                lp.op = &real.op;
                lp.target = real.target;
                lp.lambda = cfg.lambda_list[li];
                lp.lipschitz = 2.0 * (inflate * sigma) * (inflate * sigma);
                SolverOptions opt;
                opt.iterations = k_max;
                opt.checkpoints = k_list;
                const SolverResult res = fitra(lp, opt);
                const double down = 1.0 / std::sqrt(static_cast<double>(cfg.plan.tones));
                for (std::size_t ki = 0; ki < k_list.size(); ++ki) {
                    CVec a_bar = to_complex(res.checkpoint_x[ki]);
                    CMat time(cfg.antennas, cfg.plan.tones);
                    for (std::size_t i = 0; i < a_bar.size(); ++i) time.data()[i] = a_bar[i] * down;
                    frames[li * k_list.size() + ki] = detail::frame_from_time(std::move(time));
                }
            }
        }
        for (std::size_t ci = 0; ci < clip_rows; ++ci)
            frames[pmp_rows + ci] =
                precode_ls_clip(fd.tone_symbols, cfg.plan, fd.chan, cfg.clip_target_list[ci]);
        return frames;
    };

    // PAR*/OBR pass over cfg.frames frames
    std::vector<std::vector<std::vector<double>>> par(rows,
                                                      std::vector<std::vector<double>>(cfg.frames));
    std::vector<std::vector<double>> obr(rows, std::vector<double>(cfg.frames));
    parallel_frames(cfg.frames, cfg.resolved_threads(), [&](std::size_t f) {
        const FrameData fd = make_frame_data(cfg.seed, f, cfg.antennas, cfg.users, cfg.taps, cfg.plan);
        const std::vector<TxFrame> frames = produce_all(fd);
        for (std::size_t r = 0; r < rows; ++r) {
            par[r][f].resize(cfg.antennas);
            for (std::size_t ni = 0; ni < cfg.antennas; ++ni)
                par[r][f][ni] =
                    par_linear(std::span<const cplx>(frames[r].time.row(ni), cfg.plan.tones));
            obr[r][f] = obr_linear(frames[r].freq, cfg.plan);
        }
    });

    // operating points (optional, driven by the SNR grid)
    std::vector<SerSeries> ser_series(rows);
    if (!cfg.snr_grid_db.empty()) {
        std::vector<std::string> labels(rows);
        for (std::size_t r = 0; r < pmp_rows; ++r)
            labels[r] = "pmp lambda=" + fmt_double(pmp_ids[r].lambda) +
                        " K=" + std::to_string(pmp_ids[r].k);
        for (std::size_t c = 0; c < clip_rows; ++c)
            labels[pmp_rows + c] = "ls_clip " + fmt_double(cfg.clip_target_list[c]) + "dB";
        const detail::RowProducer producer = [&](const FrameData& fd, std::size_t,
                                                 const std::vector<char>& active) {
            std::vector<TxFrame> all = produce_all(fd);
            std::vector<detail::RowSignal> out(rows);
            for (std::size_t r = 0; r < rows; ++r)
                if (active[r]) out[r].frame = std::move(all[r]);
            return out;
        };
        ser_series = detail::ser_engine(cfg, labels, producer);
    }

    TradeoffOutput out;
    const auto finish_row = [&](std::size_t r, TradeoffRow row) {
        std::vector<double> samples;
        for (std::size_t f = 0; f < cfg.frames; ++f)
            samples.insert(samples.end(), par[r][f].begin(), par[r][f].end());
        row.par_star_db = par_star_db(samples);
        row.median_obr = detail::median(obr[r]);
        if (!cfg.snr_grid_db.empty()) row.operating_point_db = ser_series[r].operating_point_db;
        return row;
    };
    for (std::size_t r = 0; r < pmp_rows; ++r) {
        TradeoffRow row;
        row.is_pmp = true;
        row.lambda = pmp_ids[r].lambda;
        row.iterations = pmp_ids[r].k;
        row.label = "pmp";
        out.pmp_rows.push_back(finish_row(r, std::move(row)));
    }
    for (std::size_t c = 0; c < clip_rows; ++c) {
        TradeoffRow row;
        row.is_pmp = false;
        row.clip_target_db = cfg.clip_target_list[c];
        row.label = "ls_clip";
        out.clip_rows.push_back(finish_row(pmp_rows + c, std::move(row)));
    }

    if (write_files) {
        std::vector<std::vector<std::string>> rows_pmp;
        for (const TradeoffRow& r : out.pmp_rows)
            rows_pmp.push_back({fmt_double(r.lambda), std::to_string(r.iterations),
                                fmt_double(r.par_star_db), fmt_double(to_db(r.median_obr)),
                                r.operating_point_db ? fmt_double(*r.operating_point_db) : ""});
        write_csv(std::filesystem::path(cfg.out_dir) / "tradeoff_pmp.csv",
                  {"lambda", "iterations", "par_star_db", "median_obr_db", "snr_operating_point_db"},
                  rows_pmp);

        std::vector<std::vector<std::string>> rows_clip;
        for (const TradeoffRow& r : out.clip_rows)
            rows_clip.push_back({fmt_double(r.clip_target_db), fmt_double(r.par_star_db),
                                 fmt_double(to_db(r.median_obr)),
                                 r.operating_point_db ? fmt_double(*r.operating_point_db) : ""});
        write_csv(std::filesystem::path(cfg.out_dir) / "tradeoff_ls_clip.csv",
                  {"target_par_db", "par_star_db", "median_obr_db", "snr_operating_point_db"},
                  rows_clip);
    }
    return out;
}

// ---------------------------------------------------------------------------
// antenna-sweep: PAR* versus N for each tap count, per precoder.

struct AntennaSweepRow {
    std::size_t antennas = 0;
    std::size_t taps = 0;
    std::string precoder;
    double par_star_db = 0.0;
};

inline std::vector<AntennaSweepRow> run_antenna_sweep(const ExperimentConfig& cfg,
                                                      bool write_files = true) {
    if (cfg.antenna_list.empty()) throw ConfigError("antenna_list", "required for antenna-sweep");
    if (cfg.tap_list.empty()) throw ConfigError("tap_list", "required for antenna-sweep");
    if (cfg.precoders.empty()) throw ConfigError("precoders", "at least one precoder required");

    std::vector<AntennaSweepRow> rows;
    for (std::size_t n : cfg.antenna_list)
        for (std::size_t t : cfg.tap_list) {
            std::vector<std::vector<std::vector<double>>> par(
                cfg.precoders.size(), std::vector<std::vector<double>>(cfg.frames));
            parallel_frames(cfg.frames, cfg.resolved_threads(), [&](std::size_t f) {
                // channel stream varies with (N, T); payloads are shared across points
                const FrameData fd = make_frame_data(cfg.seed, f, n, cfg.users, t, cfg.plan,
                                                     derive_seed(0, {n, t}));
                for (std::size_t p = 0; p < cfg.precoders.size(); ++p) {
                    const TxFrame frame = precode_with(cfg.precoders[p], fd, cfg.plan);
                    par[p][f].resize(n);
                    for (std::size_t ni = 0; ni < n; ++ni)
                        par[p][f][ni] =
                            par_linear(std::span<const cplx>(frame.time.row(ni), cfg.plan.tones));
                }
            });
            for (std::size_t p = 0; p < cfg.precoders.size(); ++p) {
                std::vector<double> samples;
                for (std::size_t f = 0; f < cfg.frames; ++f)
                    samples.insert(samples.end(), par[p][f].begin(), par[p][f].end());
                rows.push_back({n, t, cfg.precoders[p].label, par_star_db(samples)});
            }
        }

    if (write_files) {
        std::vector<std::vector<std::string>> csv_rows;
        for (const AntennaSweepRow& r : rows)
            csv_rows.push_back({std::to_string(r.antennas), std::to_string(r.taps), r.precoder,
                                fmt_double(r.par_star_db)});
        write_csv(std::filesystem::path(cfg.out_dir) / "antenna_sweep.csv",
                  {"antennas", "taps", "precoder", "par_star_db"}, csv_rows);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// solve: one-shot PMP on a serialized instance.

inline nlohmann::json solve_instance(const nlohmann::json& j, bool trace = false,
                                     const std::string& out_dir = ".") {
    if (!j.is_object()) throw ConfigError("instance", "expected a JSON object");
    detail::reject_unknown_keys(j, {"tone_plan", "taps", "symbols", "lambda", "iterations"});
    if (!j.contains("tone_plan")) throw ConfigError("tone_plan", "missing");
    TonePlan plan = j["tone_plan"].is_string() && j["tone_plan"].get<std::string>() == "80211n-40mhz"
                        ? TonePlan::ieee80211n_40mhz()
                        : TonePlan::from_json(j["tone_plan"]);

    const auto parse_c = [](const nlohmann::json& v) -> cplx {
        if (!v.is_array() || v.size() != 2) throw ConfigError("taps", "complex values are [re, im]");
        return {v[0].get<double>(), v[1].get<double>()};
    };

    if (!j.contains("taps") || !j["taps"].is_array() || j["taps"].empty())
        throw ConfigError("taps", "missing tap matrices");
    std::vector<CMat> taps;
    for (const auto& tj : j["taps"]) {
        const std::size_t m = tj.size();
        const std::size_t n = tj.empty() ? 0 : tj[0].size();
        if (m == 0 || n == 0) throw ConfigError("taps", "tap matrices must be non-empty");
        CMat tap(m, n);
        for (std::size_t r = 0; r < m; ++r) {
            if (tj[r].size() != n) throw ConfigError("taps", "ragged tap matrix");
            for (std::size_t c = 0; c < n; ++c) tap(r, c) = parse_c(tj[r][c]);
        }
        taps.push_back(std::move(tap));
    }
    const ChannelRealization chan = channel_from_taps(std::move(taps), plan.tones);

    if (!j.contains("symbols") || j["symbols"].size() != plan.active.size())
        throw ConfigError("symbols", "one symbol vector per active tone required");
    std::vector<CVec> symbols;
    for (const auto& sj : j["symbols"]) {
        CVec s;
        for (const auto& v : sj) s.push_back(parse_c(v));
        symbols.push_back(std::move(s));
    }

    PmpSettings settings;
    if (j.contains("lambda")) settings.lambda = detail::as_double(j["lambda"], "lambda");
    if (j.contains("iterations")) settings.iterations = detail::as_uint(j["iterations"], "iterations");
    if (!(settings.lambda >= 0.0)) throw ConfigError("lambda", "must be nonnegative");
    if (settings.iterations < 1) throw ConfigError("iterations", "must be at least 1");

    SolverOptions solver_opt;
    solver_opt.record_trace = trace;
    const PmpOutcome outcome =
        precode_pmp_detailed(symbols, plan, chan, settings, solver_opt);

    if (trace) {
        std::vector<std::vector<std::string>> rows;
        for (std::size_t k = 0; k < outcome.solver.objective_trace.size(); ++k)
            rows.push_back({std::to_string(k + 1), fmt_double(outcome.solver.objective_trace[k]),
                            fmt_double(outcome.solver.level_trace[k])});
        write_csv(std::filesystem::path(out_dir) / "trace.csv", {"k", "objective", "alpha"}, rows);
    }

    nlohmann::json time = nlohmann::json::array();
    for (std::size_t ni = 0; ni < chan.antennas; ++ni) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t wi = 0; wi < plan.tones; ++wi) {
            const cplx z = outcome.frame.time(ni, wi);
            row.push_back({z.real(), z.imag()});
        }
        time.push_back(std::move(row));
    }
    nlohmann::json par_db = nlohmann::json::array();
    for (std::size_t ni = 0; ni < chan.antennas; ++ni)
        par_db.push_back(
            to_db(par_linear(std::span<const cplx>(outcome.frame.time.row(ni), plan.tones))));

    return {{"time", std::move(time)},
            {"par_db", std::move(par_db)},
            {"obr_db", to_db(obr_linear(outcome.frame.freq, plan))},
            {"power", outcome.frame.power},
            {"residual", outcome.residual_norm},
            {"sigma_max", outcome.sigma_estimate}};
}

}  // namespace pmp
