#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mapai {

inline void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument(message);
}

// ---------------------------------------------------------------------------
// World and trajectory
// ---------------------------------------------------------------------------

// One sampled exogenous condition: the step at which the latent regime turns
// Adverse. Absent onset means the regime stays Normal over the whole horizon.
struct WorldRealization {
    std::optional<int> onset_step;

    bool never() const { return !onset_step.has_value(); }
    static WorldRealization at(int step) { return {step}; }
    static WorldRealization never_adverse() { return {std::nullopt}; }
};

enum class Regime : std::uint8_t { Normal, Adverse };
enum class ActionId : std::uint8_t { Aggressive, Conservative, Defer };

struct TrajectoryStep {
    int step_index;
    Regime regime;
    ActionId action;
    double reward;
};

// A rolled-out step sequence. The onset penalty, when it applies, is folded
// into the onset step's reward so cumulative utility is always a plain sum.
struct Trajectory {
    std::vector<TrajectoryStep> steps;
    std::optional<int> halted_at;
};

double utility_of(const Trajectory& trajectory);
double loss_of(const Trajectory& trajectory);

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

enum class ActionRule : std::uint8_t {
    AlwaysAggressive,
    AlwaysConservative,
    AlwaysDefer,
};

// Oversight wrapper: starting `latency` steps after adverse onset, each step
// independently detects with probability `detect_prob`; detection halts the
// rollout immediately.
struct InterventionSpec {
    std::string base_id;
    double detect_prob = 0.0;
    int latency = 0;
};

struct PolicySpec {
    std::string id;
    ActionRule rule = ActionRule::AlwaysConservative;
    std::optional<InterventionSpec> intervention;

    void validate() const;
    bool intervened() const { return intervention.has_value(); }
    // Stream key for policy/intervention noise. Wrappers share the base
    // policy's key so detection draws are common random numbers across
    // variants of the same base.
    const std::string& noise_key() const {
        return intervention ? intervention->base_id : id;
    }
};

// ---------------------------------------------------------------------------
// Utility model and constraints
// ---------------------------------------------------------------------------

struct UniformRange {
    double lo = 0.0;
    double hi = 0.0;
};

struct ThetaDistribution {
    std::optional<UniformRange> r_aggressive_normal;
    std::optional<UniformRange> r_conservative_normal;
    std::optional<UniformRange> r_adverse;
    std::optional<UniformRange> onset_penalty_aggressive;
};

struct UtilityModel {
    double r_aggressive_normal = 1.2;
    double r_conservative_normal = 1.0;
    double r_adverse = -2.0;
    double onset_penalty_aggressive = -10.0;
    std::optional<ThetaDistribution> theta_distribution;

    void validate() const;
    std::map<std::string, double> theta() const;
};

enum class ConstraintKind : std::uint8_t { CumulativeUtilityAtMost };

struct ConstraintRule {
    ConstraintKind kind = ConstraintKind::CumulativeUtilityAtMost;
    double threshold = 0.0;
};

struct ConstraintSet {
    std::vector<ConstraintRule> rules;

    void validate() const;
};

bool violates(const Trajectory& trajectory, const ConstraintSet& constraints);
// Same predicate on a precomputed cumulative utility (what batch mode keeps).
bool violates_utility(double utility, const ConstraintSet& constraints);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

enum class MetricId : std::uint8_t { PViol, Cvar, EU, VarU };

const char* metric_name(MetricId id);
MetricId metric_from_name(const std::string& name);

// Per-policy distributional estimates with confidence intervals.
struct MetricVector {
    double e_u = 0.0;
    double var_u = 0.0;
    double p_viol = 0.0;
    double cvar = 0.0;
    Interval ci_e_u;
    Interval ci_p_viol;
    Interval ci_cvar;
    std::int64_t n = 0;
    double alpha = 0.05;

    void validate() const;
    double value(MetricId id) const;
};

// ---------------------------------------------------------------------------
// Governance
// ---------------------------------------------------------------------------

enum class Comparator : std::uint8_t { LessEq, GreaterEq };
enum class Direction : std::uint8_t { Minimize, Maximize };
enum class EstimatorMode : std::uint8_t { Point, ConservativeBound };
enum class TieRule : std::uint8_t { ByCandidateId };

struct HardConstraint {
    MetricId metric = MetricId::PViol;
    Comparator comparator = Comparator::LessEq;
    double threshold = 0.0;
};

struct Criterion {
    MetricId metric = MetricId::PViol;
    Direction direction = Direction::Minimize;
};

struct GovernanceSpec {
    std::vector<HardConstraint> hard;
    std::vector<Criterion> criteria_order;
    TieRule tie_rule = TieRule::ByCandidateId;
    EstimatorMode estimator_mode = EstimatorMode::Point;
    double alpha = 0.05;
    double confidence = 0.95;

    void validate() const;
};

// Built-in reference governance: p_viol <= 0.05, cvar <= 40 loss-units,
// criteria [p_viol min, cvar min, e_u max], point estimates.
GovernanceSpec reference_governance();

// ---------------------------------------------------------------------------
// Decisions and certificates
// ---------------------------------------------------------------------------

struct Decision {
    enum class Verdict : std::uint8_t { Act, Escalate, Abort };

    Verdict verdict = Verdict::Abort;
    std::optional<std::string> policy_id;  // present iff Act

    static Decision act(std::string id) {
        return {Verdict::Act, std::move(id)};
    }
    static Decision escalate() { return {Verdict::Escalate, std::nullopt}; }
    static Decision abort() { return {Verdict::Abort, std::nullopt}; }

    bool is_act() const { return verdict == Verdict::Act; }
};

const char* verdict_name(Decision::Verdict v);

struct SatEntry {
    int constraint_index = 0;
    bool satisfied = true;
    double evaluated_value = 0.0;
};

struct DominanceWitness {
    std::string dominator_id;
    std::string dominated_id;
    MetricId witness_criterion = MetricId::PViol;
};

struct TraceEntry {
    MetricId criterion = MetricId::PViol;
    std::vector<std::string> surviving;
};

// Replayable justification artifact emitted by the admissibility compiler.
struct Certificate {
    int schema_version = 1;
    std::string gov_hash;
    std::optional<std::string> selected;
    Decision verdict;
    std::map<std::string, MetricVector> metrics;
    std::map<std::string, std::vector<SatEntry>> sat_vector;
    std::vector<std::string> frontier;
    std::vector<DominanceWitness> dominance_witnesses;
    std::vector<TraceEntry> comparison_trace;
    EstimatorMode estimator_mode_used = EstimatorMode::Point;
};

}  // namespace mapai
