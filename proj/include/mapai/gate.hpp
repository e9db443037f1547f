#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mapai/core.hpp"

namespace mapai::gate {

struct BindingConstraint {
    int constraint_index = 0;
    double evaluated_value = 0.0;
    double threshold = 0.0;
    Comparator comparator = Comparator::LessEq;
};

struct AdmissibilityReport {
    std::string policy_id;
    bool admissible = true;
    std::vector<BindingConstraint> binding;  // every failed constraint
    EstimatorMode estimator_mode_used = EstimatorMode::Point;
};

// The value a hard constraint reads from a metric vector: the point estimate
// in Point mode, the unfavorable CI endpoint in ConservativeBound mode (the
// bound may worsen admissibility, never improve it). var_u carries no CI and
// always reads the point estimate.
double constraint_value(const MetricVector& m, const HardConstraint& constraint,
                        EstimatorMode mode);

// Evaluates every hard constraint inclusively; admissible iff none fail.
AdmissibilityReport admissible(const std::string& policy_id, const MetricVector& m,
                               const GovernanceSpec& governance);

struct EvaluatedPolicy {
    PolicySpec policy;
    MetricVector metrics;
};

// Decision functional: Act on the admissible non-escalation candidate with
// the highest expected utility (ties by candidate id); Escalate when only
// the escalation alternative is admissible; Abort otherwise. Expected
// utility is never compared across the admissibility boundary.
Decision decide(const std::vector<EvaluatedPolicy>& evaluated,
                const GovernanceSpec& governance,
                const std::optional<std::string>& escalation_policy_id,
                const std::string& champion_id);

// True iff the naive argmax-expected-utility pick differs from the gated
// outcome.
bool decision_flip_check(const std::string& naive_choice, const Decision& gated);

}  // namespace mapai::gate
