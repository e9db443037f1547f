#include "mapai/gate.hpp"

#include <algorithm>
#include <set>

namespace mapai::gate {

double constraint_value(const MetricVector& m, const HardConstraint& constraint,
                        EstimatorMode mode) {
    if (mode == EstimatorMode::Point || constraint.metric == MetricId::VarU) {
        return m.value(constraint.metric);
    }
    Interval ci;
    switch (constraint.metric) {
        case MetricId::PViol: ci = m.ci_p_viol; break;
        case MetricId::Cvar: ci = m.ci_cvar; break;
        case MetricId::EU: ci = m.ci_e_u; break;
        case MetricId::VarU: return m.var_u;
    }
    return constraint.comparator == Comparator::LessEq ? ci.hi : ci.lo;
}

AdmissibilityReport admissible(const std::string& policy_id, const MetricVector& m,
                               const GovernanceSpec& governance) {
    m.validate();
    governance.validate();

    AdmissibilityReport report;
    report.policy_id = policy_id;
    report.estimator_mode_used = governance.estimator_mode;
    for (std::size_t i = 0; i < governance.hard.size(); ++i) {
        const HardConstraint& constraint = governance.hard[i];
        const double value =
            constraint_value(m, constraint, governance.estimator_mode);
        const bool ok = constraint.comparator == Comparator::LessEq
                            ? value <= constraint.threshold
                            : value >= constraint.threshold;
        if (!ok) {
            report.binding.push_back({static_cast<int>(i), value,
                                      constraint.threshold, constraint.comparator});
        }
    }
    report.admissible = report.binding.empty();
    return report;
}

Decision decide(const std::vector<EvaluatedPolicy>& evaluated,
                const GovernanceSpec& governance,
                const std::optional<std::string>& escalation_policy_id,
                const std::string& champion_id) {
    governance.validate();
    if (evaluated.empty()) return Decision::abort();
    std::set<std::string> ids;
    for (const auto& entry : evaluated) {
        require(ids.insert(entry.policy.id).second,
                "duplicate policy id: " + entry.policy.id);
    }
    require(ids.count(champion_id) == 1, "unknown champion id: " + champion_id);
    if (escalation_policy_id) {
        require(ids.count(*escalation_policy_id) == 1,
                "unknown escalation policy id: " + *escalation_policy_id);
    }

    const EvaluatedPolicy* best = nullptr;
    for (const auto& entry : evaluated) {
        if (escalation_policy_id && entry.policy.id == *escalation_policy_id) continue;
        if (!admissible(entry.policy.id, entry.metrics, governance).admissible) continue;
        if (best == nullptr || entry.metrics.e_u > best->metrics.e_u ||
            (entry.metrics.e_u == best->metrics.e_u &&
             entry.policy.id < best->policy.id)) {
            best = &entry;
        }
    }
    if (best != nullptr) return Decision::act(best->policy.id);

    if (escalation_policy_id) {
        for (const auto& entry : evaluated) {
            if (entry.policy.id != *escalation_policy_id) continue;
            if (admissible(entry.policy.id, entry.metrics, governance).admissible) {
                return Decision::escalate();
            }
        }
    }
    return Decision::abort();
}

bool decision_flip_check(const std::string& naive_choice, const Decision& gated) {
    if (gated.is_act()) return *gated.policy_id != naive_choice;
    return true;
}

}  // namespace mapai::gate
