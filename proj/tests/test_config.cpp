#include "doctest.h"

#include <fstream>
#include <sstream>

#include "mapai/canonical.hpp"
#include "mapai/config.hpp"

using namespace mapai;

namespace {

std::string reference_text() {
    std::ifstream in(std::string(MAPAI_SOURCE_DIR) + "/configs/reference.json");
    REQUIRE(in.good());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

TEST_CASE("reference config parses and resolves") {
    const RunConfig config = RunConfig::from_text(reference_text());
    CHECK(config.scenario.p == 0.02);
    CHECK(config.scenario.horizon == 20);
    CHECK(config.policies.size() == 3);
    CHECK(config.policies[0].rule == ActionRule::AlwaysAggressive);
    CHECK(config.constraints.rules.size() == 1);
    CHECK(config.constraints.rules[0].threshold == -40.0);
    CHECK(config.governance.hard.size() == 2);
    CHECK(config.batch.n == 200000);
    CHECK(config.champion_id == "pi_a");
    REQUIRE(config.escalation_policy_id.has_value());
    CHECK(*config.escalation_policy_id == "defer");

    // Matches the built-in reference setup.
    const RunConfig builtin = reference_config();
    CHECK(canonical_dump(config.to_json()) == canonical_dump(builtin.to_json()));
}

TEST_CASE("config round-trips through resolved JSON") {
    const RunConfig config = RunConfig::from_text(reference_text());
    const auto resolved = config.to_json();
    const RunConfig reparsed = RunConfig::from_json(resolved);
    CHECK(canonical_dump(reparsed.to_json()) == canonical_dump(resolved));
}

TEST_CASE("unknown fields are rejected with a path") {
    const std::string text = R"({
        "policies": [{"id": "a", "rule": "always_defer"}],
        "scenario": {"p": 0.02, "horizn": 20}
    })";
    CHECK_THROWS_WITH_AS(RunConfig::from_text(text),
                         "config: /scenario/horizn: unknown field", ConfigError);

    CHECK_THROWS_AS(
        RunConfig::from_text(R"({"policies": [{"id": "a", "rule": "sometimes"}]})"),
        ConfigError);
    CHECK_THROWS_AS(RunConfig::from_text(R"({"policies": []})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_text("{not json"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_text("{}"), ConfigError);  // policies required
}

TEST_CASE("defaults fill in when sections are omitted") {
    const RunConfig config = RunConfig::from_text(
        R"({"policies": [{"id": "z", "rule": "always_conservative"},
                          {"id": "idle", "rule": "always_defer"}]})");
    CHECK(config.scenario.p == 0.02);
    CHECK(config.utility.r_aggressive_normal == 1.2);
    CHECK(config.constraints.rules[0].threshold == -40.0);
    CHECK(config.governance.hard.size() == 2);
    CHECK(config.champion_id == "z");                 // first policy
    CHECK(*config.escalation_policy_id == "idle");    // lone defer policy
    CHECK(config.batch.n == 1);
    CHECK(config.output.format == "json");
}

TEST_CASE("intervened policies parse with an inline base") {
    const RunConfig config = RunConfig::from_text(R"({
        "policies": [
            {"id": "pi_a", "rule": "always_aggressive"},
            {"id": "gated", "rule": "intervened",
             "base": {"id": "pi_a", "rule": "always_aggressive"},
             "detect_prob": 0.5, "latency": 2}
        ]
    })");
    const PolicySpec& gated = config.policy_by_id("gated");
    REQUIRE(gated.intervention.has_value());
    CHECK(gated.rule == ActionRule::AlwaysAggressive);
    CHECK(gated.intervention->base_id == "pi_a");
    CHECK(gated.intervention->detect_prob == 0.5);
    CHECK(gated.intervention->latency == 2);

    // Nested wrappers are rejected.
    CHECK_THROWS_AS(RunConfig::from_text(R"({
        "policies": [
            {"id": "gg", "rule": "intervened",
             "base": {"id": "g", "rule": "intervened",
                      "base": {"id": "pi_a", "rule": "always_aggressive"},
                      "detect_prob": 1.0, "latency": 0},
             "detect_prob": 1.0, "latency": 0}
        ]
    })"),
                    ConfigError);
}

TEST_CASE("plan prerequisites are validated") {
    CHECK_THROWS_AS(RunConfig::from_text(R"({
        "policies": [{"id": "a", "rule": "always_defer"}],
        "batch": {"sampling_plan": {"kind": "importance"}}
    })"),
                    ConfigError);
    CHECK_THROWS_AS(RunConfig::from_text(R"({
        "policies": [{"id": "a", "rule": "always_defer"}],
        "batch": {"sampling_plan": {"kind": "stratified"}}
    })"),
                    ConfigError);

    const RunConfig stratified = RunConfig::from_text(R"({
        "policies": [{"id": "a", "rule": "always_defer"}],
        "scenario": {"strata": [{"never": true}, {"onsets": [0, 19]}]},
        "batch": {"n": 100, "sampling_plan": {"kind": "stratified", "allocation": "equal"}}
    })");
    const auto& plan = std::get<StratifiedPlan>(stratified.batch.sampling_plan);
    CHECK(plan.partition.size() == 2);
    CHECK(plan.allocation == Allocation::Equal);

    const RunConfig importance = RunConfig::from_text(R"({
        "policies": [{"id": "a", "rule": "always_defer"}],
        "scenario": {"proposal_p": 0.1},
        "batch": {"sampling_plan": {"kind": "importance"}}
    })");
    CHECK(std::get<ImportancePlan>(importance.batch.sampling_plan).proposal_p == 0.1);
}

TEST_CASE("sweep section parses and demands values") {
    const RunConfig config = RunConfig::from_text(R"({
        "policies": [{"id": "a", "rule": "always_defer"}],
        "sweep": {"metric": "p_viol", "values": [0.01, 0.05, 0.1]}
    })");
    REQUIRE(config.sweep.has_value());
    CHECK(config.sweep->metric == MetricId::PViol);
    CHECK(config.sweep->values.size() == 3);

    CHECK_THROWS_AS(RunConfig::from_text(R"({
        "policies": [{"id": "a", "rule": "always_defer"}],
        "sweep": {"metric": "p_viol", "values": []}
    })"),
                    ConfigError);
    CHECK_THROWS_AS(RunConfig::from_text(R"({
        "policies": [{"id": "a", "rule": "always_defer"}],
        "sweep": {"metric": "banana", "values": [1.0]}
    })"),
                    ConfigError);
}

TEST_CASE("sampled theta resolves default uniform ranges") {
    RunConfig config = RunConfig::from_text(R"({
        "policies": [{"id": "a", "rule": "always_conservative"}],
        "batch": {"theta_mode": "sampled"}
    })");
    REQUIRE(config.utility.theta_distribution.has_value());
    const auto& dist = *config.utility.theta_distribution;
    REQUIRE(dist.r_adverse.has_value());
    CHECK(dist.r_adverse->lo == doctest::Approx(-2.2));
    CHECK(dist.r_adverse->hi == doctest::Approx(-1.8));

    // Resolution is idempotent: resolved output re-parses to itself.
    const auto resolved = config.to_json();
    CHECK(canonical_dump(RunConfig::from_json(resolved).to_json()) ==
          canonical_dump(resolved));
}
