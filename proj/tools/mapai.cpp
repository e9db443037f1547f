#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mapai/config.hpp"
#include "mapai/report.hpp"

namespace {

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> rollouts;
    std::optional<double> alpha;
    std::optional<std::string> out;
    std::optional<std::string> format;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool config_required) {
    auto* config = cmd->add_option("--config", opts.config_path, "run config (JSON)");
    if (config_required) config->required();
    cmd->add_option("--seed", opts.seed, "override batch.master_seed");
    cmd->add_option("--rollouts", opts.rollouts, "override batch.n");
    cmd->add_option("--alpha", opts.alpha, "override governance.alpha");
    cmd->add_option("--out", opts.out, "output path (default: stdout)");
    cmd->add_option("--format", opts.format, "output format: json or csv");
}

mapai::RunConfig load_config(const CommonOptions& opts) {
    mapai::RunConfig config = opts.config_path.empty()
                                  ? mapai::reference_config()
                                  : mapai::RunConfig::from_file(opts.config_path);
    if (opts.seed) config.batch.master_seed = *opts.seed;
    if (opts.rollouts) config.batch.n = *opts.rollouts;
    if (opts.alpha) config.governance.alpha = *opts.alpha;
    if (opts.out) config.output.path = *opts.out;
    if (opts.format) config.output.format = *opts.format;
    config.resolve();
    return config;
}

void write_output(const mapai::RunConfig& config, const std::string& payload) {
    if (config.output.path) {
        std::ofstream out(*config.output.path, std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot open output path: " + *config.output.path);
        }
        out << payload;
    } else {
        std::cout << payload;
    }
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     start)
        .count();
}

int verdict_exit_code(const mapai::Decision& decision) {
    switch (decision.verdict) {
        case mapai::Decision::Verdict::Act: return 0;
        case mapai::Decision::Verdict::Escalate: return 2;
        case mapai::Decision::Verdict::Abort: return 3;
    }
    return 1;
}

int run_evaluate(const CommonOptions& opts) {
    const auto start = std::chrono::steady_clock::now();
    const mapai::RunConfig config = load_config(opts);
    if (config.output.format == "csv") {
        write_output(config, mapai::rollout_csv(mapai::evaluate_all(config)));
        return 0;
    }
    const auto report = mapai::evaluate_report(config);
    write_output(config, mapai::render_report(report, elapsed_ms(start)));
    return 0;
}

int run_compare(const CommonOptions& opts) {
    const auto start = std::chrono::steady_clock::now();
    const mapai::RunConfig config = load_config(opts);
    const auto report = mapai::compare_report(config);
    write_output(config, mapai::render_report(report, elapsed_ms(start)));
    return 0;
}

int run_gate(const CommonOptions& opts) {
    const auto start = std::chrono::steady_clock::now();
    const mapai::RunConfig config = load_config(opts);
    const auto outcome = mapai::gate_report(config);
    write_output(config, mapai::render_report(outcome.report, elapsed_ms(start)));
    std::cerr << "verdict: " << mapai::verdict_name(outcome.decision.verdict);
    if (outcome.decision.policy_id) std::cerr << " " << *outcome.decision.policy_id;
    std::cerr << "\n";
    return verdict_exit_code(outcome.decision);
}

int run_compile(const CommonOptions& opts, const std::string& verify_path) {
    const mapai::RunConfig config = load_config(opts);
    const auto outcome = mapai::compile_run(config);

    if (!verify_path.empty()) {
        std::ifstream in(verify_path, std::ios::binary);
        if (!in) {
            std::cerr << "error: cannot open certificate: " << verify_path << "\n";
            return 1;
        }
        std::stringstream buffer;
        buffer << in.rdbuf();
        if (buffer.str() != outcome.certificate_bytes) {
            std::cerr << "verification failed: certificate does not replay\n";
            return 1;
        }
        std::cout << "verified: " << outcome.gov_hash << "\n";
        return 0;
    }

    const std::string path = config.output.path.value_or("certificate.json");
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            std::cerr << "error: cannot open output path: " << path << "\n";
            return 1;
        }
        out << outcome.certificate_bytes;
    }
    {  // verify-on-write: the bytes on disk must replay
        std::ifstream in(path, std::ios::binary);
        std::stringstream buffer;
        buffer << in.rdbuf();
        if (buffer.str() != outcome.certificate_bytes) {
            std::cerr << "internal error: written certificate failed verification\n";
            return 1;
        }
    }
    std::cout << "gov_hash: " << outcome.gov_hash << "\n";
    std::cout << "verdict: " << mapai::verdict_name(outcome.decision.verdict);
    if (outcome.decision.policy_id) std::cout << " " << *outcome.decision.policy_id;
    std::cout << "\n" << "certificate: " << path << "\n";
    return 0;
}

int run_sweep(const CommonOptions& opts) {
    const mapai::RunConfig config = load_config(opts);
    write_output(config, mapai::sweep_csv(config));
    return 0;
}

int run_repro(const CommonOptions& opts) {
    const mapai::RunConfig defaults = mapai::reference_config();
    const std::uint64_t seed = opts.seed.value_or(defaults.batch.master_seed);
    const std::int64_t n = opts.rollouts.value_or(defaults.batch.n);
    const auto result = mapai::repro_reference(seed, n);
    std::cout << mapai::repro_table(result);
    return result.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Monte Carlo policy admissibility engine: distributional evaluation, "
        "governance gating, and proof-carrying decision compilation"};
    app.require_subcommand(1);

    CommonOptions evaluate_opts, compare_opts, gate_opts, compile_opts, sweep_opts,
        repro_opts;
    std::string verify_path;

    add_common(app.add_subcommand("evaluate",
                                  "estimate per-policy metric vectors with CIs"),
               evaluate_opts, true);
    add_common(app.add_subcommand("compare",
                                  "paired evaluation with common random numbers"),
               compare_opts, true);
    add_common(app.add_subcommand("gate", "admissibility gate and decision functional"),
               gate_opts, true);
    auto* compile_cmd = app.add_subcommand(
        "compile", "compile candidates into a decision plus certificate");
    add_common(compile_cmd, compile_opts, true);
    compile_cmd->add_option("--verify", verify_path,
                            "verify an existing certificate instead of writing one");
    add_common(app.add_subcommand("sweep", "threshold sweep over cached outcomes"),
               sweep_opts, true);
    add_common(app.add_subcommand(
                   "repro", "reproduce the built-in reference scenario quantities"),
               repro_opts, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("evaluate")) return run_evaluate(evaluate_opts);
        if (app.got_subcommand("compare")) return run_compare(compare_opts);
        if (app.got_subcommand("gate")) return run_gate(gate_opts);
        if (app.got_subcommand("compile")) return run_compile(compile_opts, verify_path);
        if (app.got_subcommand("sweep")) return run_sweep(sweep_opts);
        if (app.got_subcommand("repro")) return run_repro(repro_opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
