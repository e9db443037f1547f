#include "mapai/pcac.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "mapai/canonical.hpp"

namespace mapai::pcac {

namespace {

using ordered_json = nlohmann::ordered_json;

const char* comparator_name(Comparator c) {
    return c == Comparator::LessEq ? "<=" : ">=";
}

const char* direction_name(Direction d) {
    return d == Direction::Minimize ? "minimize" : "maximize";
}

const char* mode_name(EstimatorMode m) {
    return m == EstimatorMode::Point ? "point" : "conservative_bound";
}

EstimatorMode mode_from_name(const std::string& name) {
    if (name == "point") return EstimatorMode::Point;
    if (name == "conservative_bound") return EstimatorMode::ConservativeBound;
    throw std::invalid_argument("unknown estimator mode: " + name);
}

ordered_json interval_json(const Interval& ci) {
    return ordered_json{{"hi", ci.hi}, {"lo", ci.lo}};
}

Interval interval_from_json(const ordered_json& j) {
    return {j.at("lo").get<double>(), j.at("hi").get<double>()};
}

ordered_json metric_vector_json(const MetricVector& m) {
    return ordered_json{
        {"alpha", m.alpha},
        {"ci_cvar", interval_json(m.ci_cvar)},
        {"ci_e_u", interval_json(m.ci_e_u)},
        {"ci_p_viol", interval_json(m.ci_p_viol)},
        {"cvar", m.cvar},
        {"e_u", m.e_u},
        {"n", m.n},
        {"p_viol", m.p_viol},
        {"var_u", m.var_u},
    };
}

MetricVector metric_vector_from_json(const ordered_json& j) {
    MetricVector m;
    m.alpha = j.at("alpha").get<double>();
    m.ci_cvar = interval_from_json(j.at("ci_cvar"));
    m.ci_e_u = interval_from_json(j.at("ci_e_u"));
    m.ci_p_viol = interval_from_json(j.at("ci_p_viol"));
    m.cvar = j.at("cvar").get<double>();
    m.e_u = j.at("e_u").get<double>();
    m.n = j.at("n").get<std::int64_t>();
    m.p_viol = j.at("p_viol").get<double>();
    m.var_u = j.at("var_u").get<double>();
    return m;
}

bool strictly_better(double a, double b, Direction d) {
    return d == Direction::Minimize ? a < b : a > b;
}

bool weakly_better(double a, double b, Direction d) {
    return d == Direction::Minimize ? a <= b : a >= b;
}

bool dominates(const CandidateEntry& a, const CandidateEntry& b,
               const std::vector<Criterion>& criteria) {
    bool strict = false;
    for (const auto& criterion : criteria) {
        const double va = a.metrics.value(criterion.metric);
        const double vb = b.metrics.value(criterion.metric);
        if (!weakly_better(va, vb, criterion.direction)) return false;
        strict = strict || strictly_better(va, vb, criterion.direction);
    }
    return strict;
}

// Iterated argbest refinement; equivalent to the lexicographic key order and
// also the source of the certificate's comparison trace.
std::vector<CandidateEntry> refine(std::vector<CandidateEntry> survivors,
                                   const Criterion& criterion) {
    double best = survivors.front().metrics.value(criterion.metric);
    for (const auto& entry : survivors) {
        const double v = entry.metrics.value(criterion.metric);
        if (strictly_better(v, best, criterion.direction)) best = v;
    }
    std::erase_if(survivors, [&](const CandidateEntry& entry) {
        return entry.metrics.value(criterion.metric) != best;
    });
    return survivors;
}

void validate_candidates(const std::vector<CandidateEntry>& candidates) {
    std::set<std::string> ids;
    for (const auto& candidate : candidates) {
        require(!candidate.id.empty(), "candidate id must be nonempty");
        require(ids.insert(candidate.id).second,
                "duplicate candidate id: " + candidate.id);
        candidate.metrics.validate();
    }
}

std::vector<CandidateEntry> sorted_by_id(std::vector<CandidateEntry> candidates) {
    std::sort(candidates.begin(), candidates.end(),
              [](const CandidateEntry& a, const CandidateEntry& b) {
                  return a.id < b.id;
              });
    return candidates;
}

}  // namespace

std::string canonical_bytes(const GovernanceSpec& governance) {
    governance.validate();

    std::vector<HardConstraint> hard = governance.hard;
    std::sort(hard.begin(), hard.end(),
              [](const HardConstraint& a, const HardConstraint& b) {
                  return std::make_tuple(std::string(metric_name(a.metric)),
                                         std::string(comparator_name(a.comparator)),
                                         a.threshold) <
                         std::make_tuple(std::string(metric_name(b.metric)),
                                         std::string(comparator_name(b.comparator)),
                                         b.threshold);
              });

    ordered_json j;
    j["alpha"] = governance.alpha;
    j["confidence"] = governance.confidence;
    j["criteria_order"] = ordered_json::array();
    for (const auto& criterion : governance.criteria_order) {
        j["criteria_order"].push_back(
            ordered_json{{"direction", direction_name(criterion.direction)},
                         {"metric", metric_name(criterion.metric)}});
    }
    j["estimator_mode"] = mode_name(governance.estimator_mode);
    j["hard"] = ordered_json::array();
    for (const auto& constraint : hard) {
        j["hard"].push_back(ordered_json{{"comparator", comparator_name(constraint.comparator)},
                                         {"metric", metric_name(constraint.metric)},
                                         {"threshold", constraint.threshold}});
    }
    j["tie_rule"] = "by_candidate_id";
    return canonical_dump(j);
}

std::string gov_hash(const GovernanceSpec& governance) {
    return sha256_hex(canonical_bytes(governance));
}

std::vector<CandidateEntry> hard_filter(const std::vector<CandidateEntry>& candidates,
                                        const GovernanceSpec& governance) {
    validate_candidates(candidates);
    std::vector<CandidateEntry> admissible;
    for (const auto& candidate : sorted_by_id(candidates)) {
        if (gate::admissible(candidate.id, candidate.metrics, governance).admissible) {
            admissible.push_back(candidate);
        }
    }
    return admissible;
}

FrontierResult dominance_frontier(const std::vector<CandidateEntry>& admissible,
                                  const std::vector<Criterion>& criteria_order) {
    const std::vector<CandidateEntry> pool = sorted_by_id(admissible);
    FrontierResult result;
    for (const auto& candidate : pool) {
        const CandidateEntry* dominator = nullptr;
        for (const auto& other : pool) {
            if (other.id == candidate.id) continue;
            if (dominates(other, candidate, criteria_order)) {
                dominator = &other;
                break;  // pool is id-sorted: first dominator in id order
            }
        }
        if (dominator == nullptr) {
            result.frontier.push_back(candidate);
        } else {
            MetricId witness = criteria_order.front().metric;
            for (const auto& criterion : criteria_order) {
                if (strictly_better(dominator->metrics.value(criterion.metric),
                                    candidate.metrics.value(criterion.metric),
                                    criterion.direction)) {
                    witness = criterion.metric;
                    break;
                }
            }
            result.witnesses.push_back({dominator->id, candidate.id, witness});
        }
    }
    return result;
}

std::string select(const std::vector<CandidateEntry>& frontier,
                   const std::vector<Criterion>& criteria_order, TieRule tie_rule) {
    require(!frontier.empty(), "select requires a nonempty frontier");
    require(tie_rule == TieRule::ByCandidateId, "unknown tie rule");
    std::vector<CandidateEntry> survivors = sorted_by_id(frontier);
    for (const auto& criterion : criteria_order) {
        survivors = refine(std::move(survivors), criterion);
    }
    return survivors.front().id;  // ascending id order resolves exact ties
}

CompilationResult compile(const std::vector<CandidateEntry>& candidates,
                          const GovernanceSpec& governance,
                          const std::optional<std::string>& escalation_policy_id) {
    governance.validate();
    validate_candidates(candidates);
    const std::vector<CandidateEntry> ordered = sorted_by_id(candidates);
    if (escalation_policy_id) {
        require(std::any_of(ordered.begin(), ordered.end(),
                            [&](const CandidateEntry& c) {
                                return c.id == *escalation_policy_id;
                            }),
                "unknown escalation policy id: " + *escalation_policy_id);
    }

    Certificate certificate;
    certificate.gov_hash = gov_hash(governance);
    certificate.estimator_mode_used = governance.estimator_mode;

    bool escalation_admissible = false;
    std::vector<CandidateEntry> act_pool;
    for (const auto& candidate : ordered) {
        certificate.metrics.emplace(candidate.id, candidate.metrics);
        const auto report =
            gate::admissible(candidate.id, candidate.metrics, governance);
        std::vector<SatEntry> entries;
        entries.reserve(governance.hard.size());
        for (std::size_t i = 0; i < governance.hard.size(); ++i) {
            const double value = gate::constraint_value(
                candidate.metrics, governance.hard[i], governance.estimator_mode);
            const bool failed =
                std::any_of(report.binding.begin(), report.binding.end(),
                            [&](const gate::BindingConstraint& b) {
                                return b.constraint_index == static_cast<int>(i);
                            });
            entries.push_back({static_cast<int>(i), !failed, value});
        }
        certificate.sat_vector.emplace(candidate.id, std::move(entries));

        if (!report.admissible) continue;
        if (escalation_policy_id && candidate.id == *escalation_policy_id) {
            escalation_admissible = true;
        } else {
            act_pool.push_back(candidate);
        }
    }

    Decision decision = Decision::abort();
    if (!act_pool.empty()) {
        FrontierResult frontier = dominance_frontier(act_pool, governance.criteria_order);
        certificate.dominance_witnesses = std::move(frontier.witnesses);
        for (const auto& entry : frontier.frontier) {
            certificate.frontier.push_back(entry.id);
        }
        std::vector<CandidateEntry> survivors = frontier.frontier;
        for (const auto& criterion : governance.criteria_order) {
            survivors = refine(std::move(survivors), criterion);
            TraceEntry trace;
            trace.criterion = criterion.metric;
            for (const auto& entry : survivors) trace.surviving.push_back(entry.id);
            certificate.comparison_trace.push_back(std::move(trace));
        }
        certificate.selected = survivors.front().id;
        decision = Decision::act(survivors.front().id);
    } else if (escalation_admissible) {
        decision = Decision::escalate();
    }
    certificate.verdict = decision;
    return {decision, certificate};
}

std::string certificate_bytes(const Certificate& certificate) {
    ordered_json j;
    j["comparison_trace"] = ordered_json::array();
    for (const auto& entry : certificate.comparison_trace) {
        j["comparison_trace"].push_back(
            ordered_json{{"criterion", metric_name(entry.criterion)},
                         {"surviving", entry.surviving}});
    }
    j["dominance_witnesses"] = ordered_json::array();
    for (const auto& witness : certificate.dominance_witnesses) {
        j["dominance_witnesses"].push_back(
            ordered_json{{"dominated_id", witness.dominated_id},
                         {"dominator_id", witness.dominator_id},
                         {"witness_criterion", metric_name(witness.witness_criterion)}});
    }
    j["estimator_mode_used"] = mode_name(certificate.estimator_mode_used);
    j["frontier"] = certificate.frontier;
    j["gov_hash"] = certificate.gov_hash;
    j["metrics"] = ordered_json::object();
    for (const auto& [id, metrics] : certificate.metrics) {
        j["metrics"][id] = metric_vector_json(metrics);
    }
    j["sat_vector"] = ordered_json::object();
    for (const auto& [id, entries] : certificate.sat_vector) {
        ordered_json list = ordered_json::array();
        for (const auto& entry : entries) {
            list.push_back(ordered_json{{"constraint_index", entry.constraint_index},
                                        {"evaluated_value", entry.evaluated_value},
                                        {"satisfied", entry.satisfied}});
        }
        j["sat_vector"][id] = std::move(list);
    }
    j["schema_version"] = certificate.schema_version;
    if (certificate.selected) {
        j["selected"] = *certificate.selected;
    } else {
        j["selected"] = nullptr;
    }
    ordered_json verdict;
    verdict["kind"] = verdict_name(certificate.verdict.verdict);
    if (certificate.verdict.policy_id) {
        verdict["policy_id"] = *certificate.verdict.policy_id;
    }
    j["verdict"] = std::move(verdict);
    return canonical_dump(j);
}

Certificate parse_certificate(const std::string& bytes) {
    const ordered_json j = ordered_json::parse(bytes);
    Certificate certificate;
    certificate.schema_version = j.at("schema_version").get<int>();
    require(certificate.schema_version == 1, "unsupported certificate schema version");
    certificate.gov_hash = j.at("gov_hash").get<std::string>();
    if (!j.at("selected").is_null()) {
        certificate.selected = j.at("selected").get<std::string>();
    }
    const auto& verdict = j.at("verdict");
    const auto kind = verdict.at("kind").get<std::string>();
    if (kind == "act") {
        certificate.verdict = Decision::act(verdict.at("policy_id").get<std::string>());
    } else if (kind == "escalate") {
        certificate.verdict = Decision::escalate();
    } else if (kind == "abort") {
        certificate.verdict = Decision::abort();
    } else {
        throw std::invalid_argument("unknown verdict kind: " + kind);
    }
    for (const auto& [id, m] : j.at("metrics").items()) {
        certificate.metrics.emplace(id, metric_vector_from_json(m));
    }
    for (const auto& [id, list] : j.at("sat_vector").items()) {
        std::vector<SatEntry> entries;
        for (const auto& entry : list) {
            entries.push_back({entry.at("constraint_index").get<int>(),
                               entry.at("satisfied").get<bool>(),
                               entry.at("evaluated_value").get<double>()});
        }
        certificate.sat_vector.emplace(id, std::move(entries));
    }
    certificate.frontier = j.at("frontier").get<std::vector<std::string>>();
    for (const auto& witness : j.at("dominance_witnesses")) {
        certificate.dominance_witnesses.push_back(
            {witness.at("dominator_id").get<std::string>(),
             witness.at("dominated_id").get<std::string>(),
             metric_from_name(witness.at("witness_criterion").get<std::string>())});
    }
    for (const auto& entry : j.at("comparison_trace")) {
        certificate.comparison_trace.push_back(
            {metric_from_name(entry.at("criterion").get<std::string>()),
             entry.at("surviving").get<std::vector<std::string>>()});
    }
    certificate.estimator_mode_used =
        mode_from_name(j.at("estimator_mode_used").get<std::string>());
    return certificate;
}

bool verify(const Certificate& certificate,
            const std::vector<CandidateEntry>& candidates,
            const GovernanceSpec& governance,
            const std::optional<std::string>& escalation_policy_id) {
    try {
        return verify_bytes(certificate_bytes(certificate), candidates, governance,
                            escalation_policy_id);
    } catch (...) {
        return false;
    }
}

bool verify_bytes(const std::string& bytes,
                  const std::vector<CandidateEntry>& candidates,
                  const GovernanceSpec& governance,
                  const std::optional<std::string>& escalation_policy_id) {
    try {
        const CompilationResult replay =
            compile(candidates, governance, escalation_policy_id);
        return certificate_bytes(replay.certificate) == bytes;
    } catch (...) {
        return false;
    }
}

}  // namespace mapai::pcac
