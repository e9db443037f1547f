#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mapai/core.hpp"
#include "mapai/engine.hpp"

namespace mapai {

// Config/semantic validation failure with a JSON-path-addressed message.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& message)
        : std::runtime_error(message) {}
};

struct ScenarioConfig {
    double p = 0.02;
    int horizon = 20;
    std::optional<double> proposal_p;
    std::optional<std::vector<OnsetRange>> strata;

    RegimeSwitchConfig regime_config() const { return {p, horizon}; }
};

struct SweepConfig {
    MetricId metric = MetricId::PViol;
    std::vector<double> values;
};

struct OutputConfig {
    std::optional<std::string> path;
    std::string format = "json";  // "json" or "csv"
};

// Declarative run description consumed by every CLI subcommand. Parsing is
// strict: unknown keys are rejected so a misspelled governance threshold can
// never silently fall back to a default.
struct RunConfig {
    ScenarioConfig scenario;
    UtilityModel utility;
    std::vector<PolicySpec> policies;
    ConstraintSet constraints;
    GovernanceSpec governance = reference_governance();
    BatchConfig batch;
    std::string champion_id;
    std::optional<std::string> escalation_policy_id;
    std::optional<SweepConfig> sweep;
    OutputConfig output;

    void validate() const;

    // Fills derived defaults: champion (first policy), escalation (first
    // AlwaysDefer policy), sampled-theta uniform ranges. Idempotent.
    void resolve();

    // Fully resolved config as JSON; re-parsing it yields this config.
    nlohmann::ordered_json to_json() const;

    static RunConfig from_json(const nlohmann::ordered_json& j);
    static RunConfig from_text(const std::string& text);
    static RunConfig from_file(const std::string& path);

    const PolicySpec& policy_by_id(const std::string& id) const;
};

// Built-in two-policy reference setup (aggressive vs conservative champion-
// challenger with a defer escalation candidate) at n=200000.
RunConfig reference_config();

}  // namespace mapai
