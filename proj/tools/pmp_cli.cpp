// Command-line front end for the simulator: par-ccdf, ser-sweep, tradeoff,
// antenna-sweep and one-shot solve, all driven by a JSON config.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmp/experiment.hpp"

namespace {

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw pmp::Error("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw pmp::ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    return j;
}

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> threads;
    bool trace = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file")->required();
    cmd->add_option("--seed", [&args](const CLI::results_t& res) {
        args.seed = std::stoull(res[0]);
        return true;
    }, "Master seed override");
    cmd->add_option("--out", [&args](const CLI::results_t& res) {
        args.out_dir = res[0];
        return true;
    }, "Output directory override");
    cmd->add_option("--threads", [&args](const CLI::results_t& res) {
        args.threads = std::stoull(res[0]);
        return true;
    }, "Worker thread count override");
    cmd->add_flag("--trace", args.trace, "Dump solver diagnostics");
}

pmp::ExperimentConfig resolve(const CommonArgs& args) {
    pmp::ExperimentConfig cfg = pmp::parse_config(load_json(args.config_path));
    if (args.seed) cfg.seed = *args.seed;
    if (args.out_dir) cfg.out_dir = *args.out_dir;
    if (args.threads) cfg.threads = *args.threads;
    return cfg;
}

// Solver diagnostics for sweep commands: re-run frame 0 with the first
// configured penalty/iteration pair and dump the per-iteration objective and
// truncation level.
void dump_trace(const pmp::ExperimentConfig& cfg) {
    double lambda = 0.25;
    std::size_t iterations = 2000;
    bool found = false;
    for (const pmp::PrecoderSpec& p : cfg.precoders)
        if (p.kind == pmp::PrecoderSpec::Kind::pmp) {
            lambda = p.lambda;
            iterations = p.iterations;
            found = true;
            break;
        }
    if (!found && !cfg.lambda_list.empty()) {
        lambda = cfg.lambda_list.front();
        iterations = cfg.iteration_list.empty() ? 2000 : cfg.iteration_list.back();
        found = true;
    }
    if (!found) return;  // nothing solver-driven in this run

    const std::size_t antennas = cfg.antenna_list.empty() ? cfg.antennas : cfg.antenna_list.front();
    const std::size_t taps = cfg.tap_list.empty() ? cfg.taps : cfg.tap_list.front();
    const pmp::FrameData fd =
        pmp::make_frame_data(cfg.seed, 0, antennas, cfg.users, taps, cfg.plan);
    pmp::PmpSettings settings;
    settings.lambda = lambda;
    settings.iterations = iterations;
    pmp::SolverOptions opt;
    opt.record_trace = true;
    const pmp::PmpOutcome outcome =
        pmp::precode_pmp_detailed(fd.tone_symbols, cfg.plan, fd.chan, settings, opt);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < outcome.solver.objective_trace.size(); ++k)
        rows.push_back({std::to_string(k + 1), pmp::fmt_double(outcome.solver.objective_trace[k]),
                        pmp::fmt_double(outcome.solver.level_trace[k])});
    pmp::write_csv(std::filesystem::path(cfg.out_dir) / "trace.csv", {"k", "objective", "alpha"},
                   rows);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-user MIMO-OFDM downlink precoding and peak-reduction simulator"};
    app.require_subcommand(1);

    CommonArgs par_args, ser_args, tradeoff_args, antenna_args, solve_args;
    CLI::App* cmd_par = app.add_subcommand("par-ccdf", "Peak-ratio CCDF curves per precoder");
    add_common(cmd_par, par_args);
    CLI::App* cmd_ser = app.add_subcommand("ser-sweep", "Error-rate curves over an SNR grid");
    add_common(cmd_ser, ser_args);
    CLI::App* cmd_tradeoff =
        app.add_subcommand("tradeoff", "Peak/error/out-of-band trade-off tables");
    add_common(cmd_tradeoff, tradeoff_args);
    CLI::App* cmd_antenna =
        app.add_subcommand("antenna-sweep", "Peak statistics versus antenna and tap counts");
    add_common(cmd_antenna, antenna_args);
    CLI::App* cmd_solve = app.add_subcommand("solve", "One-shot solve of a serialized instance");
    add_common(cmd_solve, solve_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_par->parsed()) {
            const pmp::ExperimentConfig cfg = resolve(par_args);
            if (par_args.trace) dump_trace(cfg);
            pmp::run_par_ccdf(cfg);
        } else if (cmd_ser->parsed()) {
            const pmp::ExperimentConfig cfg = resolve(ser_args);
            if (ser_args.trace) dump_trace(cfg);
            pmp::run_ser_sweep(cfg);
        } else if (cmd_tradeoff->parsed()) {
            const pmp::ExperimentConfig cfg = resolve(tradeoff_args);
            if (tradeoff_args.trace) dump_trace(cfg);
            pmp::run_tradeoff(cfg);
        } else if (cmd_antenna->parsed()) {
            const pmp::ExperimentConfig cfg = resolve(antenna_args);
            if (antenna_args.trace) dump_trace(cfg);
            pmp::run_antenna_sweep(cfg);
        } else if (cmd_solve->parsed()) {
            const nlohmann::json instance = load_json(solve_args.config_path);
            const std::string out_dir = solve_args.out_dir.value_or(".");
            const nlohmann::json result = pmp::solve_instance(instance, solve_args.trace, out_dir);
            std::cout << result.dump() << "\n";
        }
    } catch (const pmp::ConfigError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"field", e.field}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}
