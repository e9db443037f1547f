#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mapai/config.hpp"
#include "mapai/gate.hpp"
#include "mapai/pcac.hpp"
#include "mapai/stats.hpp"

namespace mapai {

// One policy evaluated under the config's sampling plan. Outcome data is
// kept so gating sweeps never re-simulate.
struct PolicyEvaluation {
    PolicySpec policy;
    MetricVector metrics;
    std::optional<OutcomeSet> outcomes;       // naive / importance
    std::vector<StratumOutcome> per_stratum;  // stratified
};

PolicyEvaluation evaluate_policy(const RunConfig& config, const PolicySpec& policy);
std::vector<PolicyEvaluation> evaluate_all(const RunConfig& config);

// Percentile bootstrap interval for the mean of a raw sample (used for
// paired-difference reporting).
Interval bootstrap_mean_ci(const std::vector<double>& values, int resamples,
                           double confidence, std::uint64_t seed);

// --- subcommand payloads -----------------------------------------------------

nlohmann::ordered_json evaluate_report(const RunConfig& config);
nlohmann::ordered_json compare_report(const RunConfig& config);

struct GateOutcome {
    nlohmann::ordered_json report;
    Decision decision;
};
GateOutcome gate_report(const RunConfig& config);

struct CompileOutcome {
    Decision decision;
    Certificate certificate;
    std::string certificate_bytes;
    std::string gov_hash;
};
CompileOutcome compile_run(const RunConfig& config);

// CSV with one row per grid value: threshold, admissible ids, verdict.
std::string sweep_csv(const RunConfig& config);

// Per-rollout CSV dump for evaluate --format csv.
std::string rollout_csv(const std::vector<PolicyEvaluation>& evaluations);

// Serializes a report with canonical bytes and appends the wall-time field
// last so everything before it is reproducible.
std::string render_report(const nlohmann::ordered_json& report, double wall_time_ms);

// --- built-in scenario closed forms -------------------------------------------

// Exact distributional quantities for a base (non-intervened) action rule
// under the regime-switching generator; used by the repro harness.
struct AnalyticMetrics {
    double e_u = 0.0;
    double var_u = 0.0;
    double p_viol = 0.0;
    double cvar_fractional = 0.0;
    double cvar_threshold_set = 0.0;
};

AnalyticMetrics analytic_metrics(ActionRule rule, const UtilityModel& utility,
                                 const RegimeSwitchConfig& cfg,
                                 const ConstraintSet& constraints, double alpha);

struct ReproRow {
    std::string quantity;
    double estimate = 0.0;
    double analytic = 0.0;
    double reference = 0.0;  // published value the harness compares against
    double tolerance = 0.0;
    bool pass = false;
};

struct ReproResult {
    std::vector<ReproRow> rows;
    bool all_pass = false;
};

// Runs both reference policies at the given size/seed and checks estimates
// against closed forms; tolerances are four standard errors scaled from the
// n=200000 bands.
ReproResult repro_reference(std::uint64_t seed, std::int64_t n);

std::string repro_table(const ReproResult& result);

}  // namespace mapai
