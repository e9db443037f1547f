#include "mapai/core.hpp"

#include <cmath>

namespace mapai {

double utility_of(const Trajectory& trajectory) {
    double total = 0.0;
    for (const auto& step : trajectory.steps) total += step.reward;
    return total;
}

double loss_of(const Trajectory& trajectory) { return -utility_of(trajectory); }

void PolicySpec::validate() const {
    require(!id.empty(), "policy id must be nonempty");
    if (intervention) {
        require(!intervention->base_id.empty(),
                "intervened policy must name its base policy");
        require(intervention->detect_prob >= 0.0 && intervention->detect_prob <= 1.0,
                "detect_prob must lie in [0,1]");
        require(intervention->latency >= 0, "latency must be >= 0");
    }
}

void UtilityModel::validate() const {
    for (double v : {r_aggressive_normal, r_conservative_normal, r_adverse,
                     onset_penalty_aggressive}) {
        require(std::isfinite(v), "utility parameters must be finite");
    }
    if (theta_distribution) {
        auto check = [](const std::optional<UniformRange>& r, const char* name) {
            if (!r) return;
            require(std::isfinite(r->lo) && std::isfinite(r->hi) && r->lo <= r->hi,
                    std::string("theta_distribution.") + name +
                        " must be a finite interval with lo <= hi");
        };
        check(theta_distribution->r_aggressive_normal, "r_aggressive_normal");
        check(theta_distribution->r_conservative_normal, "r_conservative_normal");
        check(theta_distribution->r_adverse, "r_adverse");
        check(theta_distribution->onset_penalty_aggressive, "onset_penalty_aggressive");
    }
}

std::map<std::string, double> UtilityModel::theta() const {
    return {
        {"r_aggressive_normal", r_aggressive_normal},
        {"r_conservative_normal", r_conservative_normal},
        {"r_adverse", r_adverse},
        {"onset_penalty_aggressive", onset_penalty_aggressive},
    };
}

void ConstraintSet::validate() const {
    require(!rules.empty(), "constraint set must contain at least one rule");
    for (const auto& rule : rules) {
        require(std::isfinite(rule.threshold), "constraint threshold must be finite");
    }
}

bool violates_utility(double utility, const ConstraintSet& constraints) {
    for (const auto& rule : constraints.rules) {
        switch (rule.kind) {
            case ConstraintKind::CumulativeUtilityAtMost:
                if (utility <= rule.threshold) return true;  // inclusive boundary
                break;
        }
    }
    return false;
}

bool violates(const Trajectory& trajectory, const ConstraintSet& constraints) {
    return violates_utility(utility_of(trajectory), constraints);
}

const char* metric_name(MetricId id) {
    switch (id) {
        case MetricId::PViol: return "p_viol";
        case MetricId::Cvar: return "cvar";
        case MetricId::EU: return "e_u";
        case MetricId::VarU: return "var_u";
    }
    return "?";
}

MetricId metric_from_name(const std::string& name) {
    if (name == "p_viol") return MetricId::PViol;
    if (name == "cvar") return MetricId::Cvar;
    if (name == "e_u") return MetricId::EU;
    if (name == "var_u") return MetricId::VarU;
    throw std::invalid_argument("unknown metric id: " + name);
}

void MetricVector::validate() const {
    require(n >= 1, "metric vector requires n >= 1");
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    require(var_u >= 0.0, "variance must be nonnegative");
    require(p_viol >= 0.0 && p_viol <= 1.0, "p_viol must lie in [0,1]");
    for (const auto& ci : {ci_e_u, ci_p_viol, ci_cvar}) {
        require(ci.lo <= ci.hi, "interval must satisfy lo <= hi");
    }
    require(ci_e_u.lo <= e_u && e_u <= ci_e_u.hi, "ci_e_u must contain e_u");
    require(ci_p_viol.lo <= p_viol && p_viol <= ci_p_viol.hi,
            "ci_p_viol must contain p_viol");
}

double MetricVector::value(MetricId id) const {
    switch (id) {
        case MetricId::PViol: return p_viol;
        case MetricId::Cvar: return cvar;
        case MetricId::EU: return e_u;
        case MetricId::VarU: return var_u;
    }
    return 0.0;
}

void GovernanceSpec::validate() const {
    require(!criteria_order.empty(), "criteria_order must be nonempty");
    for (std::size_t i = 0; i < criteria_order.size(); ++i) {
        for (std::size_t j = i + 1; j < criteria_order.size(); ++j) {
            require(criteria_order[i].metric != criteria_order[j].metric,
                    "criteria_order metrics must be distinct");
        }
    }
    for (const auto& h : hard) {
        require(std::isfinite(h.threshold), "hard threshold must be finite");
    }
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    require(confidence > 0.0 && confidence < 1.0, "confidence must lie in (0,1)");
}

GovernanceSpec reference_governance() {
    GovernanceSpec g;
    g.hard = {{MetricId::PViol, Comparator::LessEq, 0.05},
              {MetricId::Cvar, Comparator::LessEq, 40.0}};
    g.criteria_order = {{MetricId::PViol, Direction::Minimize},
                        {MetricId::Cvar, Direction::Minimize},
                        {MetricId::EU, Direction::Maximize}};
    return g;
}

const char* verdict_name(Decision::Verdict v) {
    switch (v) {
        case Decision::Verdict::Act: return "act";
        case Decision::Verdict::Escalate: return "escalate";
        case Decision::Verdict::Abort: return "abort";
    }
    return "?";
}

}  // namespace mapai
