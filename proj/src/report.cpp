#include "mapai/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mapai/canonical.hpp"

namespace mapai {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json interval_json(const Interval& ci, const char* method,
                           double confidence) {
    return ordered_json{{"lo", ci.lo},
                        {"hi", ci.hi},
                        {"method", method},
                        {"confidence", confidence}};
}

ordered_json metrics_json(const MetricVector& m, const RunConfig& config,
                          bool weighted) {
    const double conf = config.governance.confidence;
    const char* p_viol_method = weighted ? "bootstrap_percentile" : "wilson";
    ordered_json j;
    j["e_u"] = ordered_json{{"value", m.e_u},
                            {"units", "utility"},
                            {"estimator", "point"},
                            {"ci", interval_json(m.ci_e_u, "bootstrap_percentile", conf)}};
    j["var_u"] = ordered_json{{"value", m.var_u},
                              {"units", "utility^2"},
                              {"estimator", "point"}};
    j["p_viol"] = ordered_json{{"value", m.p_viol},
                               {"units", "probability"},
                               {"estimator", "point"},
                               {"ci", interval_json(m.ci_p_viol, p_viol_method, conf)}};
    j["cvar"] = ordered_json{
        {"value", m.cvar},
        {"units", "loss"},
        {"estimator", "point"},
        {"alpha", m.alpha},
        {"convention", "fractional_tail"},
        {"ci", interval_json(m.ci_cvar, "bootstrap_percentile", conf)}};
    j["n"] = m.n;
    return j;
}

ordered_json sampling_json(const RunConfig& config) {
    ordered_json j;
    if (std::holds_alternative<NaivePlan>(config.batch.sampling_plan)) {
        j["plan"] = "naive";
    } else if (std::holds_alternative<ImportancePlan>(config.batch.sampling_plan)) {
        j["plan"] = "importance";
        j["proposal_p"] = std::get<ImportancePlan>(config.batch.sampling_plan).proposal_p;
    } else {
        const auto& plan = std::get<StratifiedPlan>(config.batch.sampling_plan);
        j["plan"] = "stratified";
        j["allocation"] =
            plan.allocation == Allocation::Proportional ? "proportional" : "equal";
    }
    return j;
}

ordered_json report_skeleton(const char* kind, const RunConfig& config) {
    ordered_json j;
    j["schema_version"] = 1;
    j["kind"] = kind;
    j["config"] = config.to_json();
    j["sampling"] = sampling_json(config);
    j["seed"] = config.batch.master_seed;
    return j;
}

ordered_json admissibility_json(const gate::AdmissibilityReport& report,
                                const GovernanceSpec& governance) {
    ordered_json j;
    j["admissible"] = report.admissible;
    j["estimator_mode"] = report.estimator_mode_used == EstimatorMode::Point
                              ? "point"
                              : "conservative_bound";
    j["binding"] = ordered_json::array();
    for (const auto& b : report.binding) {
        j["binding"].push_back(ordered_json{
            {"constraint_index", b.constraint_index},
            {"metric", metric_name(governance.hard[static_cast<std::size_t>(
                           b.constraint_index)].metric)},
            {"comparator", b.comparator == Comparator::LessEq ? "<=" : ">="},
            {"evaluated_value", b.evaluated_value},
            {"threshold", b.threshold}});
    }
    return j;
}

std::string format_onset(const std::optional<int>& onset) {
    return onset ? std::to_string(*onset) : "never";
}

constexpr std::uint64_t kPairedDomain = tag64("ci/paired_delta");

}  // namespace

PolicyEvaluation evaluate_policy(const RunConfig& config, const PolicySpec& policy) {
    PolicyEvaluation out;
    out.policy = policy;
    const RegimeSwitchConfig cfg = config.scenario.regime_config();
    if (std::holds_alternative<StratifiedPlan>(config.batch.sampling_plan)) {
        out.per_stratum = run_stratified(policy, cfg, config.utility, config.batch,
                                         config.constraints);
        out.metrics = stats::stratified_combine(out.per_stratum, config.governance);
    } else {
        out.outcomes =
            run_batch(policy, cfg, config.utility, config.batch, config.constraints);
        out.metrics = stats::metric_vector(*out.outcomes, config.governance);
    }
    return out;
}

std::vector<PolicyEvaluation> evaluate_all(const RunConfig& config) {
    config.validate();
    std::vector<PolicyEvaluation> out;
    out.reserve(config.policies.size());
    for (const auto& policy : config.policies) {
        out.push_back(evaluate_policy(config, policy));
    }
    return out;
}

Interval bootstrap_mean_ci(const std::vector<double>& values, int resamples,
                           double confidence, std::uint64_t seed) {
    require(values.size() >= 2, "bootstrap requires n >= 2");
    require(resamples >= 100, "bootstrap requires >= 100 resamples");
    const auto n = values.size();
    std::vector<double> replicates(static_cast<std::size_t>(resamples));
    parallel_for(resamples, [&](std::int64_t r) {
        RngStream rng = substream(seed, kPairedDomain, static_cast<std::uint64_t>(r));
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += values[static_cast<std::size_t>(rng.next_below(n))];
        }
        replicates[static_cast<std::size_t>(r)] = sum / static_cast<double>(n);
    });
    std::sort(replicates.begin(), replicates.end());
    const double tail = (1.0 - confidence) / 2.0;
    auto at = [&](double q) {
        const double h = q * static_cast<double>(replicates.size() - 1);
        const auto i = static_cast<std::size_t>(h);
        if (i + 1 >= replicates.size()) return replicates.back();
        return replicates[i] +
               (h - static_cast<double>(i)) * (replicates[i + 1] - replicates[i]);
    };
    return {at(tail), at(1.0 - tail)};
}

nlohmann::ordered_json evaluate_report(const RunConfig& config) {
    const std::vector<PolicyEvaluation> evaluations = evaluate_all(config);
    ordered_json j = report_skeleton("evaluate", config);
    j["results"] = ordered_json::object();
    std::vector<const PolicyEvaluation*> sorted;
    for (const auto& e : evaluations) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        return a->policy.id < b->policy.id;
    });
    for (const auto* e : sorted) {
        const bool weighted = e->outcomes && e->outcomes->weighted();
        ordered_json entry;
        entry["metrics"] = metrics_json(e->metrics, config, weighted);
        if (!e->per_stratum.empty()) {
            ordered_json strata = ordered_json::array();
            for (const auto& so : e->per_stratum) {
                strata.push_back(ordered_json{
                    {"id", so.stratum.id},
                    {"probability", so.stratum.probability},
                    {"n", static_cast<std::int64_t>(so.outcomes.records.size())}});
            }
            entry["strata"] = std::move(strata);
        }
        j["results"][e->policy.id] = std::move(entry);
    }
    return j;
}

nlohmann::ordered_json compare_report(const RunConfig& config) {
    require(config.policies.size() >= 2, "compare requires at least two policies");
    const RegimeSwitchConfig cfg = config.scenario.regime_config();
    require(std::holds_alternative<NaivePlan>(config.batch.sampling_plan),
            "compare uses the naive common-random-number plan");
    const auto outcome_sets =
        run_paired(config.policies, cfg, config.utility, config.batch, config.constraints);

    ordered_json j = report_skeleton("compare", config);
    j["results"] = ordered_json::object();
    for (const auto& [id, outcomes] : outcome_sets) {
        const MetricVector m = stats::metric_vector(outcomes, config.governance);
        j["results"][id] = ordered_json{{"metrics", metrics_json(m, config, false)}};
    }

    j["pairs"] = ordered_json::array();
    std::vector<std::string> ids;
    for (const auto& [id, outcomes] : outcome_sets) ids.push_back(id);
    for (std::size_t a = 0; a < ids.size(); ++a) {
        for (std::size_t b = a + 1; b < ids.size(); ++b) {
            const auto& set_a = outcome_sets.at(ids[a]);
            const auto& set_b = outcome_sets.at(ids[b]);
            std::vector<double> delta(set_a.records.size());
            for (std::size_t i = 0; i < delta.size(); ++i) {
                delta[i] = set_a.records[i].utility - set_b.records[i].utility;
            }
            double mean = 0.0;
            for (double d : delta) mean += d;
            mean /= static_cast<double>(delta.size());
            const std::uint64_t seed =
                derive_seed(config.batch.master_seed,
                            tag64("pair:" + ids[a] + "|" + ids[b]), 0);
            Interval ci{mean, mean};
            if (delta.size() >= 2) {
                ci = bootstrap_mean_ci(delta, stats::kDefaultBootstrapResamples,
                                       config.governance.confidence, seed);
                ci.lo = std::min(ci.lo, mean);
                ci.hi = std::max(ci.hi, mean);
            }
            j["pairs"].push_back(ordered_json{
                {"a", ids[a]},
                {"b", ids[b]},
                {"delta_e_u",
                 ordered_json{{"value", mean},
                              {"units", "utility"},
                              {"estimator", "point"},
                              {"ci", interval_json(ci, "bootstrap_percentile",
                                                   config.governance.confidence)}}}});
        }
    }
    return j;
}

GateOutcome gate_report(const RunConfig& config) {
    const std::vector<PolicyEvaluation> evaluations = evaluate_all(config);
    std::vector<gate::EvaluatedPolicy> evaluated;
    evaluated.reserve(evaluations.size());
    for (const auto& e : evaluations) evaluated.push_back({e.policy, e.metrics});
    const Decision decision = gate::decide(evaluated, config.governance,
                                           config.escalation_policy_id,
                                           config.champion_id);

    ordered_json j = report_skeleton("gate", config);
    j["results"] = ordered_json::object();
    std::sort(evaluated.begin(), evaluated.end(),
              [](const auto& a, const auto& b) { return a.policy.id < b.policy.id; });
    for (const auto& e : evaluated) {
        const auto report = gate::admissible(e.policy.id, e.metrics, config.governance);
        ordered_json entry;
        entry["metrics"] = metrics_json(e.metrics, config, false);
        entry["admissibility"] = admissibility_json(report, config.governance);
        j["results"][e.policy.id] = std::move(entry);
    }
    ordered_json verdict;
    verdict["kind"] = verdict_name(decision.verdict);
    if (decision.policy_id) verdict["policy_id"] = *decision.policy_id;
    j["decision"] = std::move(verdict);

    // Naive argmax pick and whether gating reversed it.
    const gate::EvaluatedPolicy* naive = nullptr;
    for (const auto& e : evaluated) {
        if (config.escalation_policy_id && e.policy.id == *config.escalation_policy_id) {
            continue;
        }
        if (naive == nullptr || e.metrics.e_u > naive->metrics.e_u) naive = &e;
    }
    if (naive != nullptr) {
        j["naive_choice"] = naive->policy.id;
        j["decision_flip"] = gate::decision_flip_check(naive->policy.id, decision);
    }
    return {std::move(j), decision};
}

CompileOutcome compile_run(const RunConfig& config) {
    const std::vector<PolicyEvaluation> evaluations = evaluate_all(config);
    std::vector<pcac::CandidateEntry> candidates;
    candidates.reserve(evaluations.size());
    for (const auto& e : evaluations) candidates.push_back({e.policy.id, e.metrics});
    const auto compiled =
        pcac::compile(candidates, config.governance, config.escalation_policy_id);
    CompileOutcome out;
    out.decision = compiled.decision;
    out.certificate = compiled.certificate;
    out.certificate_bytes = pcac::certificate_bytes(compiled.certificate);
    out.gov_hash = compiled.certificate.gov_hash;
    return out;
}

std::string sweep_csv(const RunConfig& config) {
    require(config.sweep.has_value(), "sweep requires a /sweep section");
    const SweepConfig& sweep = *config.sweep;
    bool constrained = false;
    for (const auto& h : config.governance.hard) {
        constrained = constrained || h.metric == sweep.metric;
    }
    require(constrained, std::string("sweep metric '") + metric_name(sweep.metric) +
                             "' has no hard constraint to vary");

    // Simulate once; thresholds only change gating.
    const std::vector<PolicyEvaluation> evaluations = evaluate_all(config);
    std::vector<gate::EvaluatedPolicy> evaluated;
    for (const auto& e : evaluations) evaluated.push_back({e.policy, e.metrics});
    std::sort(evaluated.begin(), evaluated.end(),
              [](const auto& a, const auto& b) { return a.policy.id < b.policy.id; });

    std::ostringstream csv;
    csv << "threshold,admissible_ids,verdict\n";
    for (double value : sweep.values) {
        GovernanceSpec governance = config.governance;
        for (auto& h : governance.hard) {
            if (h.metric == sweep.metric) h.threshold = value;
        }
        std::string admissible_ids;
        for (const auto& e : evaluated) {
            if (gate::admissible(e.policy.id, e.metrics, governance).admissible) {
                if (!admissible_ids.empty()) admissible_ids += "|";
                admissible_ids += e.policy.id;
            }
        }
        const Decision decision =
            gate::decide(evaluated, governance, config.escalation_policy_id,
                         config.champion_id);
        csv << canonical_number(value) << "," << admissible_ids << ","
            << verdict_name(decision.verdict);
        if (decision.policy_id) csv << ":" << *decision.policy_id;
        csv << "\n";
    }
    return csv.str();
}

std::string rollout_csv(const std::vector<PolicyEvaluation>& evaluations) {
    std::ostringstream csv;
    csv << "policy_id,index,onset,utility,loss,violated,weight,stratum\n";
    auto emit = [&](const OutcomeSet& set) {
        for (std::size_t i = 0; i < set.records.size(); ++i) {
            const auto& r = set.records[i];
            csv << set.provenance.policy_id << "," << i << ","
                << format_onset(r.onset) << "," << canonical_number(r.utility) << ","
                << canonical_number(r.loss) << "," << (r.violated ? 1 : 0) << ","
                << canonical_number(r.weight) << ","
                << set.provenance.stratum_id.value_or("") << "\n";
        }
    };
    for (const auto& e : evaluations) {
        if (e.outcomes) emit(*e.outcomes);
        for (const auto& so : e.per_stratum) emit(so.outcomes);
    }
    return csv.str();
}

std::string render_report(const nlohmann::ordered_json& report, double wall_time_ms) {
    ordered_json full = report;
    full["wall_time_ms"] = wall_time_ms;
    return canonical_dump(full) + "\n";
}

AnalyticMetrics analytic_metrics(ActionRule rule, const UtilityModel& utility,
                                 const RegimeSwitchConfig& cfg,
                                 const ConstraintSet& constraints, double alpha) {
    cfg.validate();
    utility.validate();
    constraints.validate();
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");

    auto total_utility = [&](std::optional<int> onset) {
        const int k = onset.value_or(cfg.horizon);
        switch (rule) {
            case ActionRule::AlwaysAggressive:
                return utility.r_aggressive_normal * k +
                       (onset ? utility.onset_penalty_aggressive : 0.0) +
                       utility.r_adverse * (cfg.horizon - k);
            case ActionRule::AlwaysConservative:
                return utility.r_conservative_normal * k +
                       utility.r_adverse * (cfg.horizon - k);
            case ActionRule::AlwaysDefer:
                return 0.0;
        }
        return 0.0;
    };

    std::vector<std::pair<double, double>> mass_utility;  // (probability, utility)
    mass_utility.reserve(static_cast<std::size_t>(cfg.horizon) + 1);
    for (int k = 0; k < cfg.horizon; ++k) {
        mass_utility.emplace_back(world_prob(cfg, WorldRealization::at(k)),
                                  total_utility(k));
    }
    mass_utility.emplace_back(world_prob(cfg, WorldRealization::never_adverse()),
                              total_utility(std::nullopt));

    AnalyticMetrics out;
    for (const auto& [mass, u] : mass_utility) {
        out.e_u += mass * u;
        if (violates_utility(u, constraints)) out.p_viol += mass;
    }
    for (const auto& [mass, u] : mass_utility) {
        out.var_u += mass * (u - out.e_u) * (u - out.e_u);
    }

    std::vector<std::pair<double, double>> loss_mass;  // (loss, probability)
    for (const auto& [mass, u] : mass_utility) loss_mass.emplace_back(-u, mass);
    std::sort(loss_mass.begin(), loss_mass.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    {  // fractional tail over the worst alpha mass
        double remaining = alpha;
        double acc = 0.0;
        for (const auto& [loss, mass] : loss_mass) {
            const double take = std::min(mass, remaining);
            acc += take * loss;
            remaining -= take;
            if (remaining <= 0.0) break;
        }
        out.cvar_fractional = acc / alpha;
    }
    {  // population threshold-set: average of all losses >= the (1-alpha) quantile
        double cum = 0.0;
        double quantile = loss_mass.front().first;
        for (auto it = loss_mass.rbegin(); it != loss_mass.rend(); ++it) {
            cum += it->second;
            if (cum >= 1.0 - alpha - 1e-15) {
                quantile = it->first;
                break;
            }
        }
        double mass = 0.0;
        double acc = 0.0;
        for (const auto& [loss, m] : loss_mass) {
            if (loss >= quantile) {
                mass += m;
                acc += m * loss;
            }
        }
        out.cvar_threshold_set = acc / mass;
    }
    return out;
}

ReproResult repro_reference(std::uint64_t seed, std::int64_t n) {
    require(n >= 1, "repro requires n >= 1");
    RunConfig config = reference_config();
    config.batch.n = n;
    config.batch.master_seed = seed;

    const RegimeSwitchConfig cfg = config.scenario.regime_config();
    const double alpha = config.governance.alpha;

    // Bands are four standard errors, pinned at n=200000 and scaled by
    // sqrt(200000/n) elsewhere.
    const double scale = std::sqrt(200000.0 / static_cast<double>(n));

    struct Row {
        const char* policy;
        ActionRule rule;
        double reference_e_u, reference_p_viol, reference_cvar;
        double band_e_u, band_p_viol, band_cvar;
    };
    const Row rows[] = {
        {"pi_a", ActionRule::AlwaysAggressive, 8.753, 0.07818, 47.443, 0.25, 0.0024, 0.35},
        {"pi_b", ActionRule::AlwaysConservative, 8.874, 0.02035, 37.604, 0.25, 0.0013, 0.30},
    };

    ReproResult result;
    result.all_pass = true;
    for (const Row& row : rows) {
        const PolicySpec& policy = config.policy_by_id(row.policy);
        const OutcomeSet outcomes =
            run_batch(policy, cfg, config.utility, config.batch, config.constraints);
        const AnalyticMetrics analytic = analytic_metrics(
            row.rule, config.utility, cfg, config.constraints, alpha);
        const double e_u = stats::mean_utility(outcomes);
        const double p_viol = stats::violation_probability(outcomes);
        const double cv = stats::cvar(outcomes, alpha);

        auto push = [&](const char* name, double estimate, double exact,
                        double reference, double band) {
            ReproRow r;
            r.quantity = std::string(row.policy) + "." + name;
            r.estimate = estimate;
            r.analytic = exact;
            r.reference = reference;
            r.tolerance = band * scale;
            r.pass = std::abs(estimate - exact) <= r.tolerance;
            result.all_pass = result.all_pass && r.pass;
            result.rows.push_back(std::move(r));
        };
        push("e_u", e_u, analytic.e_u, row.reference_e_u, row.band_e_u);
        push("p_viol", p_viol, analytic.p_viol, row.reference_p_viol, row.band_p_viol);
        push("cvar", cv, analytic.cvar_fractional, row.reference_cvar, row.band_cvar);
    }
    return result;
}

std::string repro_table(const ReproResult& result) {
    std::ostringstream out;
    out << "quantity        estimate      analytic      reference     tolerance  status\n";
    for (const auto& row : result.rows) {
        char line[160];
        std::snprintf(line, sizeof line, "%-14s %12.6f %13.6f %13.6f %11.6f  %s\n",
                      row.quantity.c_str(), row.estimate, row.analytic, row.reference,
                      row.tolerance, row.pass ? "pass" : "FAIL");
        out << line;
    }
    out << (result.all_pass ? "all quantities within tolerance\n"
                            : "one or more quantities out of tolerance\n");
    return out.str();
}

}  // namespace mapai
