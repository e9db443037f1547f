#include "mapai/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace mapai {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError("config: " + path + ": " + message);
}

void check_keys(const ordered_json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) fail(path + "/" + key, "unknown field");
    }
}

double get_number(const ordered_json& obj, const std::string& path,
                  const std::string& key) {
    if (!obj.contains(key)) fail(path + "/" + key, "missing required field");
    const auto& v = obj.at(key);
    if (!v.is_number()) fail(path + "/" + key, "expected a number");
    return v.get<double>();
}

std::int64_t get_integer(const ordered_json& obj, const std::string& path,
                         const std::string& key) {
    if (!obj.contains(key)) fail(path + "/" + key, "missing required field");
    const auto& v = obj.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
        fail(path + "/" + key, "expected an integer");
    }
    return v.get<std::int64_t>();
}

std::string get_string(const ordered_json& obj, const std::string& path,
                       const std::string& key) {
    if (!obj.contains(key)) fail(path + "/" + key, "missing required field");
    const auto& v = obj.at(key);
    if (!v.is_string()) fail(path + "/" + key, "expected a string");
    return v.get<std::string>();
}

ActionRule rule_from_name(const std::string& name, const std::string& path) {
    if (name == "always_aggressive") return ActionRule::AlwaysAggressive;
    if (name == "always_conservative") return ActionRule::AlwaysConservative;
    if (name == "always_defer") return ActionRule::AlwaysDefer;
    if (name == "intervened") fail(path, "intervened policies use the 'intervened' rule with a 'base' object");
    fail(path, "unknown rule '" + name + "'");
}

const char* rule_name(ActionRule rule) {
    switch (rule) {
        case ActionRule::AlwaysAggressive: return "always_aggressive";
        case ActionRule::AlwaysConservative: return "always_conservative";
        case ActionRule::AlwaysDefer: return "always_defer";
    }
    return "?";
}

PolicySpec parse_policy(const ordered_json& j, const std::string& path,
                        bool allow_intervened) {
    check_keys(j, path, {"id", "rule", "base", "detect_prob", "latency"});
    PolicySpec policy;
    policy.id = get_string(j, path, "id");
    const std::string rule = get_string(j, path, "rule");
    if (rule == "intervened") {
        if (!allow_intervened) fail(path, "nested intervened policies are not supported");
        if (!j.contains("base")) fail(path + "/base", "missing required field");
        const PolicySpec base = parse_policy(j.at("base"), path + "/base", false);
        policy.rule = base.rule;
        policy.intervention =
            InterventionSpec{base.id, get_number(j, path, "detect_prob"),
                             static_cast<int>(get_integer(j, path, "latency"))};
    } else {
        for (const char* key : {"base", "detect_prob", "latency"}) {
            if (j.contains(key)) {
                fail(path + "/" + key, "only valid for intervened policies");
            }
        }
        policy.rule = rule_from_name(rule, path + "/rule");
    }
    try {
        policy.validate();
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
    return policy;
}

ordered_json policy_json(const PolicySpec& policy) {
    ordered_json j;
    j["id"] = policy.id;
    if (policy.intervention) {
        j["rule"] = "intervened";
        j["base"] = ordered_json{{"id", policy.intervention->base_id},
                                 {"rule", rule_name(policy.rule)}};
        j["detect_prob"] = policy.intervention->detect_prob;
        j["latency"] = policy.intervention->latency;
    } else {
        j["rule"] = rule_name(policy.rule);
    }
    return j;
}

OnsetRange parse_range(const ordered_json& j, const std::string& path) {
    check_keys(j, path, {"onsets", "never"});
    OnsetRange range;
    if (j.contains("onsets")) {
        const auto& span = j.at("onsets");
        if (!span.is_array() || span.size() != 2) {
            fail(path + "/onsets", "expected [first, last]");
        }
        range.span = {span[0].get<int>(), span[1].get<int>()};
    }
    if (j.contains("never")) {
        if (!j.at("never").is_boolean()) fail(path + "/never", "expected a boolean");
        range.include_never = j.at("never").get<bool>();
    }
    if (!range.span && !range.include_never) fail(path, "empty onset range");
    return range;
}

ordered_json range_json(const OnsetRange& range) {
    ordered_json j = ordered_json::object();
    if (range.span) j["onsets"] = ordered_json::array({range.span->first, range.span->second});
    if (range.include_never) j["never"] = true;
    return j;
}

std::optional<UniformRange> parse_uniform(const ordered_json& j,
                                          const std::string& path,
                                          const std::string& key) {
    if (!j.contains(key)) return std::nullopt;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) fail(path + "/" + key, "expected [lo, hi]");
    return UniformRange{v[0].get<double>(), v[1].get<double>()};
}

MetricId parse_metric(const ordered_json& obj, const std::string& path) {
    const std::string name = get_string(obj, path, "metric");
    try {
        return metric_from_name(name);
    } catch (const std::exception& e) {
        fail(path + "/metric", e.what());
    }
}

GovernanceSpec parse_governance(const ordered_json& j, const std::string& path) {
    check_keys(j, path,
               {"hard", "criteria_order", "tie_rule", "estimator_mode", "alpha",
                "confidence"});
    GovernanceSpec g;
    g.hard.clear();
    if (j.contains("hard")) {
        if (!j.at("hard").is_array()) fail(path + "/hard", "expected an array");
        std::size_t i = 0;
        for (const auto& c : j.at("hard")) {
            const std::string cpath = path + "/hard/" + std::to_string(i++);
            check_keys(c, cpath, {"metric", "comparator", "threshold"});
            HardConstraint constraint;
            constraint.metric = parse_metric(c, cpath);
            const std::string comparator = get_string(c, cpath, "comparator");
            if (comparator == "<=") {
                constraint.comparator = Comparator::LessEq;
            } else if (comparator == ">=") {
                constraint.comparator = Comparator::GreaterEq;
            } else {
                fail(cpath + "/comparator", "expected \"<=\" or \">=\"");
            }
            constraint.threshold = get_number(c, cpath, "threshold");
            g.hard.push_back(constraint);
        }
    }
    g.criteria_order.clear();
    if (!j.contains("criteria_order")) fail(path + "/criteria_order", "missing required field");
    {
        std::size_t i = 0;
        for (const auto& c : j.at("criteria_order")) {
            const std::string cpath = path + "/criteria_order/" + std::to_string(i++);
            check_keys(c, cpath, {"metric", "direction"});
            Criterion criterion;
            criterion.metric = parse_metric(c, cpath);
            const std::string direction = get_string(c, cpath, "direction");
            if (direction == "minimize") {
                criterion.direction = Direction::Minimize;
            } else if (direction == "maximize") {
                criterion.direction = Direction::Maximize;
            } else {
                fail(cpath + "/direction", "expected \"minimize\" or \"maximize\"");
            }
            g.criteria_order.push_back(criterion);
        }
    }
    if (j.contains("tie_rule")) {
        if (get_string(j, path, "tie_rule") != "by_candidate_id") {
            fail(path + "/tie_rule", "expected \"by_candidate_id\"");
        }
    }
    if (j.contains("estimator_mode")) {
        const std::string mode = get_string(j, path, "estimator_mode");
        if (mode == "point") {
            g.estimator_mode = EstimatorMode::Point;
        } else if (mode == "conservative_bound") {
            g.estimator_mode = EstimatorMode::ConservativeBound;
        } else {
            fail(path + "/estimator_mode", "expected \"point\" or \"conservative_bound\"");
        }
    }
    if (j.contains("alpha")) g.alpha = get_number(j, path, "alpha");
    if (j.contains("confidence")) g.confidence = get_number(j, path, "confidence");
    try {
        g.validate();
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
    return g;
}

ordered_json governance_json(const GovernanceSpec& g) {
    ordered_json j;
    j["hard"] = ordered_json::array();
    for (const auto& c : g.hard) {
        j["hard"].push_back(ordered_json{
            {"metric", metric_name(c.metric)},
            {"comparator", c.comparator == Comparator::LessEq ? "<=" : ">="},
            {"threshold", c.threshold}});
    }
    j["criteria_order"] = ordered_json::array();
    for (const auto& c : g.criteria_order) {
        j["criteria_order"].push_back(ordered_json{
            {"metric", metric_name(c.metric)},
            {"direction", c.direction == Direction::Minimize ? "minimize" : "maximize"}});
    }
    j["tie_rule"] = "by_candidate_id";
    j["estimator_mode"] =
        g.estimator_mode == EstimatorMode::Point ? "point" : "conservative_bound";
    j["alpha"] = g.alpha;
    j["confidence"] = g.confidence;
    return j;
}

}  // namespace

void RunConfig::validate() const {
    if (policies.empty()) throw ConfigError("config: /policies: must be nonempty");
    std::set<std::string> ids;
    for (const auto& policy : policies) {
        policy.validate();
        if (!ids.insert(policy.id).second) {
            throw ConfigError("config: /policies: duplicate id '" + policy.id + "'");
        }
    }
    if (!champion_id.empty() && !ids.count(champion_id)) {
        throw ConfigError("config: /champion_id: unknown policy '" + champion_id + "'");
    }
    if (escalation_policy_id && !ids.count(*escalation_policy_id)) {
        throw ConfigError("config: /escalation_policy_id: unknown policy '" +
                          *escalation_policy_id + "'");
    }
    scenario.regime_config().validate();
    if (scenario.proposal_p && (*scenario.proposal_p < 0.0 || *scenario.proposal_p > 1.0)) {
        throw ConfigError("config: /scenario/proposal_p: must lie in [0,1]");
    }
    utility.validate();
    constraints.validate();
    governance.validate();
    if (std::holds_alternative<ImportancePlan>(batch.sampling_plan) &&
        !scenario.proposal_p) {
        throw ConfigError(
            "config: /batch/sampling_plan: importance plan requires /scenario/proposal_p");
    }
    if (std::holds_alternative<StratifiedPlan>(batch.sampling_plan) &&
        !scenario.strata) {
        throw ConfigError(
            "config: /batch/sampling_plan: stratified plan requires /scenario/strata");
    }
    batch.validate();
    if (sweep && sweep->values.empty()) {
        throw ConfigError("config: /sweep/values: must be nonempty");
    }
    if (output.format != "json" && output.format != "csv") {
        throw ConfigError("config: /output/format: expected \"json\" or \"csv\"");
    }
}

void RunConfig::resolve() {
    if (champion_id.empty() && !policies.empty()) champion_id = policies.front().id;
    if (!escalation_policy_id) {
        const PolicySpec* defer = nullptr;
        for (const auto& policy : policies) {
            if (policy.rule == ActionRule::AlwaysDefer && !policy.intervened() &&
                (defer == nullptr || policy.id < defer->id)) {
                defer = &policy;
            }
        }
        if (defer != nullptr) escalation_policy_id = defer->id;
    }
    if (batch.theta_mode.sampled && !utility.theta_distribution) {
        auto spread = [](double v) {
            const double d = 0.1 * std::abs(v);
            return UniformRange{v - d, v + d};
        };
        ThetaDistribution dist;
        dist.r_aggressive_normal = spread(utility.r_aggressive_normal);
        dist.r_conservative_normal = spread(utility.r_conservative_normal);
        dist.r_adverse = spread(utility.r_adverse);
        dist.onset_penalty_aggressive = spread(utility.onset_penalty_aggressive);
        utility.theta_distribution = dist;
    }
    if (std::holds_alternative<StratifiedPlan>(batch.sampling_plan) && scenario.strata) {
        auto& plan = std::get<StratifiedPlan>(batch.sampling_plan);
        plan.partition = *scenario.strata;
    }
    if (std::holds_alternative<ImportancePlan>(batch.sampling_plan) && scenario.proposal_p) {
        std::get<ImportancePlan>(batch.sampling_plan).proposal_p = *scenario.proposal_p;
    }
    validate();
}

RunConfig RunConfig::from_json(const ordered_json& j) {
    check_keys(j, "", {"scenario", "utility", "policies", "constraints", "governance",
                       "batch", "champion_id", "escalation_policy_id", "sweep",
                       "output"});
    RunConfig config;

    if (j.contains("scenario")) {
        const auto& s = j.at("scenario");
        check_keys(s, "/scenario", {"p", "horizon", "proposal_p", "strata"});
        if (s.contains("p")) config.scenario.p = get_number(s, "/scenario", "p");
        if (s.contains("horizon")) {
            config.scenario.horizon =
                static_cast<int>(get_integer(s, "/scenario", "horizon"));
        }
        if (s.contains("proposal_p")) {
            config.scenario.proposal_p = get_number(s, "/scenario", "proposal_p");
        }
        if (s.contains("strata")) {
            std::vector<OnsetRange> strata;
            std::size_t i = 0;
            for (const auto& r : s.at("strata")) {
                strata.push_back(parse_range(r, "/scenario/strata/" + std::to_string(i++)));
            }
            config.scenario.strata = std::move(strata);
        }
    }

    if (j.contains("utility")) {
        const auto& u = j.at("utility");
        check_keys(u, "/utility", {"theta", "theta_distribution"});
        if (u.contains("theta")) {
            const auto& t = u.at("theta");
            check_keys(t, "/utility/theta",
                       {"r_aggressive_normal", "r_conservative_normal", "r_adverse",
                        "onset_penalty_aggressive"});
            if (t.contains("r_aggressive_normal")) {
                config.utility.r_aggressive_normal =
                    get_number(t, "/utility/theta", "r_aggressive_normal");
            }
            if (t.contains("r_conservative_normal")) {
                config.utility.r_conservative_normal =
                    get_number(t, "/utility/theta", "r_conservative_normal");
            }
            if (t.contains("r_adverse")) {
                config.utility.r_adverse = get_number(t, "/utility/theta", "r_adverse");
            }
            if (t.contains("onset_penalty_aggressive")) {
                config.utility.onset_penalty_aggressive =
                    get_number(t, "/utility/theta", "onset_penalty_aggressive");
            }
        }
        if (u.contains("theta_distribution")) {
            const auto& d = u.at("theta_distribution");
            check_keys(d, "/utility/theta_distribution",
                       {"r_aggressive_normal", "r_conservative_normal", "r_adverse",
                        "onset_penalty_aggressive"});
            ThetaDistribution dist;
            dist.r_aggressive_normal =
                parse_uniform(d, "/utility/theta_distribution", "r_aggressive_normal");
            dist.r_conservative_normal = parse_uniform(
                d, "/utility/theta_distribution", "r_conservative_normal");
            dist.r_adverse = parse_uniform(d, "/utility/theta_distribution", "r_adverse");
            dist.onset_penalty_aggressive = parse_uniform(
                d, "/utility/theta_distribution", "onset_penalty_aggressive");
            config.utility.theta_distribution = dist;
        }
    }

    if (!j.contains("policies")) fail("/policies", "missing required field");
    {
        std::size_t i = 0;
        for (const auto& p : j.at("policies")) {
            config.policies.push_back(
                parse_policy(p, "/policies/" + std::to_string(i++), true));
        }
    }

    if (j.contains("constraints")) {
        config.constraints.rules.clear();
        std::size_t i = 0;
        for (const auto& c : j.at("constraints")) {
            const std::string cpath = "/constraints/" + std::to_string(i++);
            check_keys(c, cpath, {"kind", "threshold"});
            if (get_string(c, cpath, "kind") != "cumulative_utility_at_most") {
                fail(cpath + "/kind", "expected \"cumulative_utility_at_most\"");
            }
            config.constraints.rules.push_back(
                {ConstraintKind::CumulativeUtilityAtMost, get_number(c, cpath, "threshold")});
        }
    } else {
        config.constraints.rules = {{ConstraintKind::CumulativeUtilityAtMost, -40.0}};
    }

    if (j.contains("governance")) {
        config.governance = parse_governance(j.at("governance"), "/governance");
    }

    if (j.contains("batch")) {
        const auto& b = j.at("batch");
        check_keys(b, "/batch", {"n", "master_seed", "sampling_plan", "theta_mode"});
        if (b.contains("n")) config.batch.n = get_integer(b, "/batch", "n");
        if (b.contains("master_seed")) {
            config.batch.master_seed =
                static_cast<std::uint64_t>(get_integer(b, "/batch", "master_seed"));
        }
        if (b.contains("sampling_plan")) {
            const auto& plan = b.at("sampling_plan");
            check_keys(plan, "/batch/sampling_plan", {"kind", "allocation"});
            const std::string kind = get_string(plan, "/batch/sampling_plan", "kind");
            if (kind == "naive") {
                config.batch.sampling_plan = NaivePlan{};
            } else if (kind == "importance") {
                config.batch.sampling_plan = ImportancePlan{};
            } else if (kind == "stratified") {
                StratifiedPlan stratified;
                if (plan.contains("allocation")) {
                    const std::string alloc =
                        get_string(plan, "/batch/sampling_plan", "allocation");
                    if (alloc == "proportional") {
                        stratified.allocation = Allocation::Proportional;
                    } else if (alloc == "equal") {
                        stratified.allocation = Allocation::Equal;
                    } else {
                        fail("/batch/sampling_plan/allocation",
                             "expected \"proportional\" or \"equal\"");
                    }
                }
                config.batch.sampling_plan = stratified;
            } else {
                fail("/batch/sampling_plan/kind",
                     "expected \"naive\", \"stratified\", or \"importance\"");
            }
        }
        if (b.contains("theta_mode")) {
            const std::string mode = get_string(b, "/batch", "theta_mode");
            if (mode == "fixed") {
                config.batch.theta_mode = ThetaMode::fixed();
            } else if (mode == "sampled") {
                config.batch.theta_mode = ThetaMode::sampled_from_model();
            } else {
                fail("/batch/theta_mode", "expected \"fixed\" or \"sampled\"");
            }
        }
    }

    if (j.contains("champion_id")) config.champion_id = get_string(j, "", "champion_id");
    if (j.contains("escalation_policy_id")) {
        config.escalation_policy_id = get_string(j, "", "escalation_policy_id");
    }

    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        check_keys(s, "/sweep", {"metric", "values"});
        SweepConfig sweep;
        sweep.metric = parse_metric(s, "/sweep");
        if (!s.contains("values") || !s.at("values").is_array()) {
            fail("/sweep/values", "expected an array of thresholds");
        }
        for (const auto& v : s.at("values")) sweep.values.push_back(v.get<double>());
        config.sweep = std::move(sweep);
    }

    if (j.contains("output")) {
        const auto& o = j.at("output");
        check_keys(o, "/output", {"path", "format"});
        if (o.contains("path")) config.output.path = get_string(o, "/output", "path");
        if (o.contains("format")) config.output.format = get_string(o, "/output", "format");
    }

    config.resolve();
    return config;
}

RunConfig RunConfig::from_text(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return from_json(j);
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_text(buffer.str());
}

nlohmann::ordered_json RunConfig::to_json() const {
    ordered_json j;
    ordered_json s;
    s["p"] = scenario.p;
    s["horizon"] = scenario.horizon;
    if (scenario.proposal_p) s["proposal_p"] = *scenario.proposal_p;
    if (scenario.strata) {
        s["strata"] = ordered_json::array();
        for (const auto& range : *scenario.strata) s["strata"].push_back(range_json(range));
    }
    j["scenario"] = std::move(s);

    ordered_json u;
    u["theta"] = ordered_json{
        {"r_aggressive_normal", utility.r_aggressive_normal},
        {"r_conservative_normal", utility.r_conservative_normal},
        {"r_adverse", utility.r_adverse},
        {"onset_penalty_aggressive", utility.onset_penalty_aggressive},
    };
    if (utility.theta_distribution) {
        ordered_json d = ordered_json::object();
        auto put = [&](const char* name, const std::optional<UniformRange>& r) {
            if (r) d[name] = ordered_json::array({r->lo, r->hi});
        };
        put("r_aggressive_normal", utility.theta_distribution->r_aggressive_normal);
        put("r_conservative_normal", utility.theta_distribution->r_conservative_normal);
        put("r_adverse", utility.theta_distribution->r_adverse);
        put("onset_penalty_aggressive",
            utility.theta_distribution->onset_penalty_aggressive);
        u["theta_distribution"] = std::move(d);
    }
    j["utility"] = std::move(u);

    j["policies"] = ordered_json::array();
    for (const auto& policy : policies) j["policies"].push_back(policy_json(policy));

    j["constraints"] = ordered_json::array();
    for (const auto& rule : constraints.rules) {
        j["constraints"].push_back(ordered_json{
            {"kind", "cumulative_utility_at_most"}, {"threshold", rule.threshold}});
    }

    j["governance"] = governance_json(governance);

    ordered_json b;
    b["n"] = batch.n;
    b["master_seed"] = batch.master_seed;
    if (std::holds_alternative<NaivePlan>(batch.sampling_plan)) {
        b["sampling_plan"] = ordered_json{{"kind", "naive"}};
    } else if (std::holds_alternative<ImportancePlan>(batch.sampling_plan)) {
        b["sampling_plan"] = ordered_json{{"kind", "importance"}};
    } else {
        const auto& plan = std::get<StratifiedPlan>(batch.sampling_plan);
        b["sampling_plan"] = ordered_json{
            {"kind", "stratified"},
            {"allocation",
             plan.allocation == Allocation::Proportional ? "proportional" : "equal"}};
    }
    b["theta_mode"] = batch.theta_mode.sampled ? "sampled" : "fixed";
    j["batch"] = std::move(b);

    j["champion_id"] = champion_id;
    if (escalation_policy_id) j["escalation_policy_id"] = *escalation_policy_id;
    if (sweep) {
        j["sweep"] = ordered_json{{"metric", metric_name(sweep->metric)},
                                  {"values", sweep->values}};
    }
    ordered_json o;
    if (output.path) o["path"] = *output.path;
    o["format"] = output.format;
    j["output"] = std::move(o);
    return j;
}

const PolicySpec& RunConfig::policy_by_id(const std::string& id) const {
    for (const auto& policy : policies) {
        if (policy.id == id) return policy;
    }
    throw ConfigError("config: unknown policy id '" + id + "'");
}

RunConfig reference_config() {
    RunConfig config;
    config.scenario = {};
    config.policies = {
        {"pi_a", ActionRule::AlwaysAggressive, std::nullopt},
        {"pi_b", ActionRule::AlwaysConservative, std::nullopt},
        {"defer", ActionRule::AlwaysDefer, std::nullopt},
    };
    config.constraints.rules = {{ConstraintKind::CumulativeUtilityAtMost, -40.0}};
    config.governance = reference_governance();
    config.batch.n = 200000;
    config.batch.master_seed = 20240817;
    config.champion_id = "pi_a";
    config.resolve();
    return config;
}

}  // namespace mapai
