#include "mapai/engine.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <thread>

namespace mapai {

namespace {

constexpr std::uint64_t kWorldDomain = tag64("world");
constexpr std::uint64_t kThetaDomain = tag64("theta");

std::uint64_t policy_noise_domain(const PolicySpec& policy) {
    return tag64("policy:" + policy.noise_key());
}

std::uint64_t stratum_world_domain(const Stratum& stratum) {
    return tag64("world/stratum:" + stratum.id);
}

ActionId action_of(ActionRule rule) {
    switch (rule) {
        case ActionRule::AlwaysAggressive: return ActionId::Aggressive;
        case ActionRule::AlwaysConservative: return ActionId::Conservative;
        case ActionRule::AlwaysDefer: return ActionId::Defer;
    }
    return ActionId::Defer;
}

double step_reward(ActionId action, Regime regime, bool onset_step,
                   const UtilityModel& theta) {
    if (action == ActionId::Defer) return 0.0;
    if (regime == Regime::Normal) {
        return action == ActionId::Aggressive ? theta.r_aggressive_normal
                                              : theta.r_conservative_normal;
    }
    double reward = theta.r_adverse;
    if (onset_step && action == ActionId::Aggressive) {
        reward += theta.onset_penalty_aggressive;
    }
    return reward;
}

UniformRange default_range(double value) {
    const double spread = 0.1 * std::abs(value);
    return {value - spread, value + spread};
}

double sample_param(const std::optional<UniformRange>& declared, double fallback,
                    RngStream& rng) {
    const UniformRange range = declared ? *declared : default_range(fallback);
    return range.lo + (range.hi - range.lo) * rng.next_double();
}

// Draws theta for one record. Parameter order is fixed so the stream always
// advances by exactly four uniforms.
UtilityModel resolve_theta(const UtilityModel& model, const ThetaMode& mode,
                           RngStream rng) {
    if (!mode.sampled) return model;
    const ThetaDistribution dist =
        model.theta_distribution.value_or(ThetaDistribution{});
    UtilityModel theta = model;
    theta.r_aggressive_normal =
        sample_param(dist.r_aggressive_normal, model.r_aggressive_normal, rng);
    theta.r_conservative_normal =
        sample_param(dist.r_conservative_normal, model.r_conservative_normal, rng);
    theta.r_adverse = sample_param(dist.r_adverse, model.r_adverse, rng);
    theta.onset_penalty_aggressive = sample_param(
        dist.onset_penalty_aggressive, model.onset_penalty_aggressive, rng);
    return theta;
}

OutcomeRecord summarize(const Trajectory& trajectory, const WorldRealization& world,
                        const ConstraintSet& constraints, double weight) {
    const double u = utility_of(trajectory);
    return {u, -u, violates_utility(u, constraints), weight, world.onset_step};
}

void validate_batch_inputs(const PolicySpec& policy, const RegimeSwitchConfig& cfg,
                           const UtilityModel& utility, const BatchConfig& batch,
                           const ConstraintSet& constraints) {
    policy.validate();
    cfg.validate();
    utility.validate();
    batch.validate();
    constraints.validate();
}

}  // namespace

void BatchConfig::validate() const {
    require(n >= 1, "batch size must be >= 1");
    if (const auto* plan = std::get_if<ImportancePlan>(&sampling_plan)) {
        require(plan->proposal_p >= 0.0 && plan->proposal_p <= 1.0,
                "proposal_p must lie in [0,1]");
    }
    if (const auto* plan = std::get_if<StratifiedPlan>(&sampling_plan)) {
        require(!plan->partition.empty(), "stratified plan requires a partition");
    }
}

Trajectory rollout(const PolicySpec& policy, const WorldRealization& world,
                   const UtilityModel& utility, int horizon, RngStream& rng) {
    policy.validate();
    utility.validate();
    require(horizon >= 1, "horizon must be >= 1");
    require(world.never() || (*world.onset_step >= 0 && *world.onset_step < horizon),
            "world onset inconsistent with horizon");

    const ActionId action = action_of(policy.rule);
    const int onset = world.never() ? horizon : *world.onset_step;

    Trajectory trajectory;
    trajectory.steps.reserve(static_cast<std::size_t>(horizon));
    for (int t = 0; t < horizon; ++t) {
        const Regime regime = t >= onset ? Regime::Adverse : Regime::Normal;
        trajectory.steps.push_back(
            {t, regime, action, step_reward(action, regime, t == onset, utility)});
        if (policy.intervention && regime == Regime::Adverse &&
            t >= onset + policy.intervention->latency) {
            if (rng.next_double() < policy.intervention->detect_prob) {
                trajectory.halted_at = t;
                break;
            }
        }
    }
    return trajectory;
}

unsigned worker_count() {
    if (const char* env = std::getenv("MAPAI_THREADS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed >= 1) return static_cast<unsigned>(parsed);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
    if (n <= 0) return;
    const std::int64_t workers =
        std::min<std::int64_t>(static_cast<std::int64_t>(worker_count()), n);
    if (workers <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (std::int64_t w = 0; w < workers; ++w) {
        const std::int64_t lo = w * chunk;
        const std::int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back([&fn, lo, hi] {
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : threads) t.join();
}

OutcomeSet run_batch(const PolicySpec& policy, const RegimeSwitchConfig& cfg,
                     const UtilityModel& utility, const BatchConfig& batch,
                     const ConstraintSet& constraints) {
    validate_batch_inputs(policy, cfg, utility, batch, constraints);

    if (const auto* plan = std::get_if<ImportancePlan>(&batch.sampling_plan)) {
        RegimeSwitchConfig proposal = cfg;
        proposal.p = plan->proposal_p;
        return run_importance(policy, cfg, proposal, utility, batch, constraints);
    }
    require(std::holds_alternative<NaivePlan>(batch.sampling_plan),
            "run_batch handles naive and importance plans; "
            "use run_stratified for stratified plans");

    OutcomeSet out;
    out.provenance = {policy.id, cfg, batch, std::nullopt};
    out.records.resize(static_cast<std::size_t>(batch.n));
    const std::uint64_t policy_domain = policy_noise_domain(policy);
    parallel_for(batch.n, [&](std::int64_t i) {
        const auto idx = static_cast<std::uint64_t>(i);
        RngStream world_rng = substream(batch.master_seed, kWorldDomain, idx);
        const WorldRealization world = sample_world(cfg, world_rng);
        const UtilityModel theta =
            resolve_theta(utility, batch.theta_mode,
                          substream(batch.master_seed, kThetaDomain, idx));
        RngStream policy_rng = substream(batch.master_seed, policy_domain, idx);
        const Trajectory trajectory =
            rollout(policy, world, theta, cfg.horizon, policy_rng);
        out.records[static_cast<std::size_t>(i)] =
            summarize(trajectory, world, constraints, 1.0);
    });
    return out;
}

std::map<std::string, OutcomeSet> run_paired(const std::vector<PolicySpec>& policies,
                                             const RegimeSwitchConfig& cfg,
                                             const UtilityModel& utility,
                                             const BatchConfig& batch,
                                             const ConstraintSet& constraints) {
    require(!policies.empty(), "run_paired requires at least one policy");
    std::set<std::string> ids;
    for (const auto& policy : policies) {
        require(ids.insert(policy.id).second, "duplicate policy id: " + policy.id);
    }
    // World and theta substreams ignore policy identity, so running batches
    // one by one already pairs record i across policies.
    std::map<std::string, OutcomeSet> out;
    for (const auto& policy : policies) {
        out.emplace(policy.id, run_batch(policy, cfg, utility, batch, constraints));
    }
    return out;
}

OutcomeSet run_importance(const PolicySpec& policy, const RegimeSwitchConfig& base_cfg,
                          const RegimeSwitchConfig& proposal_cfg,
                          const UtilityModel& utility, const BatchConfig& batch,
                          const ConstraintSet& constraints) {
    validate_batch_inputs(policy, base_cfg, utility, batch, constraints);
    proposal_cfg.validate();
    require(base_cfg.horizon == proposal_cfg.horizon,
            "base and proposal must share the horizon");
    // Absolute continuity: every world the base can produce needs proposal mass.
    if (base_cfg.p > 0.0) {
        require(proposal_cfg.p > 0.0,
                "proposal assigns zero mass to onset worlds the base can produce");
    }
    if (base_cfg.p < 1.0) {
        require(proposal_cfg.p < 1.0,
                "proposal assigns zero mass to the never world the base can produce");
    }

    BatchConfig recorded = batch;
    recorded.sampling_plan = ImportancePlan{proposal_cfg.p};

    OutcomeSet out;
    out.provenance = {policy.id, base_cfg, recorded, std::nullopt};
    out.records.resize(static_cast<std::size_t>(batch.n));
    const std::uint64_t policy_domain = policy_noise_domain(policy);
    parallel_for(batch.n, [&](std::int64_t i) {
        const auto idx = static_cast<std::uint64_t>(i);
        RngStream world_rng = substream(batch.master_seed, kWorldDomain, idx);
        const WorldRealization world = sample_world(proposal_cfg, world_rng);
        const double weight = importance_weight(base_cfg, proposal_cfg, world);
        const UtilityModel theta =
            resolve_theta(utility, batch.theta_mode,
                          substream(batch.master_seed, kThetaDomain, idx));
        RngStream policy_rng = substream(batch.master_seed, policy_domain, idx);
        const Trajectory trajectory =
            rollout(policy, world, theta, base_cfg.horizon, policy_rng);
        out.records[static_cast<std::size_t>(i)] =
            summarize(trajectory, world, constraints, weight);
    });
    return out;
}

std::vector<std::int64_t> allocate_rollouts(const std::vector<Stratum>& strata,
                                            std::int64_t n, Allocation allocation) {
    require(!strata.empty(), "allocation requires at least one stratum");
    require(n >= static_cast<std::int64_t>(strata.size()),
            "batch size smaller than the number of strata");
    const std::size_t s = strata.size();
    std::vector<std::int64_t> counts(s, 0);

    if (allocation == Allocation::Equal) {
        const std::int64_t base = n / static_cast<std::int64_t>(s);
        std::int64_t rest = n % static_cast<std::int64_t>(s);
        for (std::size_t i = 0; i < s; ++i) {
            counts[i] = base + (static_cast<std::int64_t>(i) < rest ? 1 : 0);
        }
        return counts;
    }

    // Proportional with largest remainder; every stratum keeps >= 1 record.
    std::vector<double> remainders(s, 0.0);
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < s; ++i) {
        const double exact = strata[i].probability * static_cast<double>(n);
        counts[i] = static_cast<std::int64_t>(exact);
        remainders[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    std::vector<std::size_t> order(s);
    for (std::size_t i = 0; i < s; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return remainders[a] > remainders[b];
    });
    for (std::size_t j = 0; assigned < n; ++j) {
        counts[order[j % s]] += 1;
        ++assigned;
    }
    for (std::size_t i = 0; i < s; ++i) {
        while (counts[i] == 0) {
            const auto richest = static_cast<std::size_t>(
                std::max_element(counts.begin(), counts.end()) - counts.begin());
            counts[richest] -= 1;
            counts[i] += 1;
        }
    }
    return counts;
}

std::vector<StratumOutcome> run_stratified(const PolicySpec& policy,
                                           const RegimeSwitchConfig& cfg,
                                           const UtilityModel& utility,
                                           const BatchConfig& batch,
                                           const ConstraintSet& constraints) {
    validate_batch_inputs(policy, cfg, utility, batch, constraints);
    const auto* plan = std::get_if<StratifiedPlan>(&batch.sampling_plan);
    require(plan != nullptr, "run_stratified requires a stratified sampling plan");

    const std::vector<Stratum> strata = enumerate_strata(cfg, plan->partition);
    const std::vector<std::int64_t> counts =
        allocate_rollouts(strata, batch.n, plan->allocation);

    std::vector<StratumOutcome> out;
    out.reserve(strata.size());
    for (std::size_t s = 0; s < strata.size(); ++s) {
        const Stratum& stratum = strata[s];
        OutcomeSet set;
        set.provenance = {policy.id, cfg, batch, stratum.id};
        set.records.resize(static_cast<std::size_t>(counts[s]));
        const std::uint64_t world_domain = stratum_world_domain(stratum);
        const std::uint64_t policy_stratum_domain =
            tag64("policy:" + policy.noise_key() + "/stratum:" + stratum.id);
        parallel_for(counts[s], [&](std::int64_t j) {
            const auto idx = static_cast<std::uint64_t>(j);
            RngStream world_rng = substream(batch.master_seed, world_domain, idx);
            const WorldRealization world =
                sample_world_in_stratum(cfg, stratum, world_rng);
            const UtilityModel theta = resolve_theta(
                utility, batch.theta_mode,
                substream(batch.master_seed, kThetaDomain ^ world_domain, idx));
            RngStream policy_rng =
                substream(batch.master_seed, policy_stratum_domain, idx);
            const Trajectory trajectory =
                rollout(policy, world, theta, cfg.horizon, policy_rng);
            set.records[static_cast<std::size_t>(j)] =
                summarize(trajectory, world, constraints, 1.0);
        });
        out.push_back({stratum, std::move(set)});
    }
    return out;
}

}  // namespace mapai
