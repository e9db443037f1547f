#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mapai/core.hpp"
#include "mapai/rng.hpp"
#include "mapai/scenario.hpp"

namespace mapai {

enum class Allocation : std::uint8_t { Proportional, Equal };

struct NaivePlan {};

struct StratifiedPlan {
    std::vector<OnsetRange> partition;
    Allocation allocation = Allocation::Proportional;
};

struct ImportancePlan {
    double proposal_p = 0.1;
};

using SamplingPlan = std::variant<NaivePlan, StratifiedPlan, ImportancePlan>;

struct ThetaMode {
    bool sampled = false;

    static ThetaMode fixed() { return {false}; }
    static ThetaMode sampled_from_model() { return {true}; }
};

struct BatchConfig {
    std::int64_t n = 1;
    std::uint64_t master_seed = 0;
    SamplingPlan sampling_plan = NaivePlan{};
    ThetaMode theta_mode;

    void validate() const;
};

// Trajectory summary kept per rollout; full step lists are only materialized
// by rollout() itself.
struct OutcomeRecord {
    double utility = 0.0;
    double loss = 0.0;
    bool violated = false;
    double weight = 1.0;
    std::optional<int> onset;
};

struct Provenance {
    std::string policy_id;
    RegimeSwitchConfig scenario;
    BatchConfig batch;
    std::optional<std::string> stratum_id;
};

struct OutcomeSet {
    std::vector<OutcomeRecord> records;
    Provenance provenance;

    bool weighted() const {
        return std::holds_alternative<ImportancePlan>(provenance.batch.sampling_plan);
    }
};

struct StratumOutcome {
    Stratum stratum;
    OutcomeSet outcomes;
};

// Executes one policy over one sampled world. The stream is consumed only by
// intervention detection; base action rules are deterministic.
Trajectory rollout(const PolicySpec& policy, const WorldRealization& world,
                   const UtilityModel& utility, int horizon, RngStream& rng);

// N naive rollouts. Record i draws its world from a policy-independent
// substream keyed by i (the basis of common random numbers) and its
// policy/intervention noise from a substream keyed by the policy and i.
// Output is bit-identical for identical inputs regardless of worker count.
OutcomeSet run_batch(const PolicySpec& policy, const RegimeSwitchConfig& cfg,
                     const UtilityModel& utility, const BatchConfig& batch,
                     const ConstraintSet& constraints);

// Common-random-number evaluation: record i of every policy's outcome set
// sees the same world realization.
std::map<std::string, OutcomeSet> run_paired(const std::vector<PolicySpec>& policies,
                                             const RegimeSwitchConfig& cfg,
                                             const UtilityModel& utility,
                                             const BatchConfig& batch,
                                             const ConstraintSet& constraints);

// Importance sampling: worlds drawn from the proposal, records weighted by
// the base/proposal likelihood ratio.
OutcomeSet run_importance(const PolicySpec& policy, const RegimeSwitchConfig& base_cfg,
                          const RegimeSwitchConfig& proposal_cfg,
                          const UtilityModel& utility, const BatchConfig& batch,
                          const ConstraintSet& constraints);

// Stratified sampling over an onset partition; allocations sum to batch.n.
std::vector<StratumOutcome> run_stratified(const PolicySpec& policy,
                                           const RegimeSwitchConfig& cfg,
                                           const UtilityModel& utility,
                                           const BatchConfig& batch,
                                           const ConstraintSet& constraints);

// Stratum sample counts for a given allocation rule (exposed for tests).
std::vector<std::int64_t> allocate_rollouts(const std::vector<Stratum>& strata,
                                            std::int64_t n, Allocation allocation);

// Worker cap: MAPAI_THREADS when set, hardware concurrency otherwise.
unsigned worker_count();

// Runs fn(i) for i in [0, n) across workers in contiguous chunks. Callers
// write results by index, so output never depends on scheduling.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace mapai
