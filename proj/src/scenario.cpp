#include "mapai/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mapai {

void RegimeSwitchConfig::validate() const {
    require(p >= 0.0 && p <= 1.0, "transition probability must lie in [0,1]");
    require(horizon >= 1, "horizon must be >= 1");
}

bool OnsetRange::contains(const WorldRealization& world) const {
    if (world.never()) return include_never;
    if (!span) return false;
    return *world.onset_step >= span->first && *world.onset_step <= span->second;
}

WorldRealization sample_world(const RegimeSwitchConfig& cfg, RngStream& rng) {
    const double u = rng.next_double();
    double cdf = 0.0;
    double survival = 1.0;  // (1-p)^k
    for (int k = 0; k < cfg.horizon; ++k) {
        cdf += survival * cfg.p;
        if (u < cdf) return WorldRealization::at(k);
        survival *= 1.0 - cfg.p;
    }
    return WorldRealization::never_adverse();
}

double world_prob(const RegimeSwitchConfig& cfg, const WorldRealization& world) {
    if (world.never()) return std::pow(1.0 - cfg.p, cfg.horizon);
    const int k = *world.onset_step;
    require(k >= 0 && k < cfg.horizon, "world onset outside [0, horizon-1]");
    return std::pow(1.0 - cfg.p, k) * cfg.p;
}

double importance_weight(const RegimeSwitchConfig& base,
                         const RegimeSwitchConfig& proposal,
                         const WorldRealization& world) {
    require(base.horizon == proposal.horizon,
            "base and proposal must share the horizon");
    const double p_base = world_prob(base, world);
    const double p_prop = world_prob(proposal, world);
    if (p_prop <= 0.0) {
        require(p_base == 0.0,
                "proposal assigns zero mass to a world with nonzero base mass");
        return 0.0;
    }
    return p_base / p_prop;
}

namespace {

std::string stratum_name(const OnsetRange& range) {
    std::string name;
    if (range.span) {
        name = "onset_" + std::to_string(range.span->first);
        if (range.span->second != range.span->first) {
            name += "_" + std::to_string(range.span->second);
        }
    }
    if (range.include_never) {
        if (!name.empty()) name += "_";
        name += "never";
    }
    return name;
}

}  // namespace

std::vector<Stratum> enumerate_strata(const RegimeSwitchConfig& cfg,
                                      const std::vector<OnsetRange>& partition) {
    cfg.validate();
    require(!partition.empty(), "partition must be nonempty");

    std::set<int> covered;
    bool never_covered = false;
    for (const auto& range : partition) {
        if (range.span) {
            require(range.span->first >= 0 && range.span->second < cfg.horizon &&
                        range.span->first <= range.span->second,
                    "onset span outside [0, horizon-1]");
            for (int k = range.span->first; k <= range.span->second; ++k) {
                require(covered.insert(k).second,
                        "partition ranges overlap at onset " + std::to_string(k));
            }
        }
        if (range.include_never) {
            require(!never_covered, "partition ranges overlap on the never world");
            never_covered = true;
        }
        require(range.span || range.include_never, "empty onset range");
    }
    require(static_cast<int>(covered.size()) == cfg.horizon,
            "partition must cover every onset step");
    require(never_covered, "partition must cover the never world");

    std::vector<Stratum> strata;
    strata.reserve(partition.size());
    for (const auto& range : partition) {
        double prob = 0.0;
        if (range.span) {
            for (int k = range.span->first; k <= range.span->second; ++k) {
                prob += world_prob(cfg, WorldRealization::at(k));
            }
        }
        if (range.include_never) {
            prob += world_prob(cfg, WorldRealization::never_adverse());
        }
        strata.push_back({stratum_name(range), prob, range});
    }
    return strata;
}

WorldRealization sample_world_in_stratum(const RegimeSwitchConfig& cfg,
                                         const Stratum& stratum, RngStream& rng) {
    require(stratum.probability > 0.0, "stratum has zero probability");
    const double u = rng.next_double() * stratum.probability;
    double cdf = 0.0;
    if (stratum.range.span) {
        for (int k = stratum.range.span->first; k <= stratum.range.span->second; ++k) {
            cdf += world_prob(cfg, WorldRealization::at(k));
            if (u < cdf) return WorldRealization::at(k);
        }
    }
    if (stratum.range.include_never) return WorldRealization::never_adverse();
    // Fall back to the last onset in the span if rounding pushed u past cdf.
    return WorldRealization::at(stratum.range.span->second);
}

PolicySpec wrap_with_intervention(const PolicySpec& base, double detect_prob,
                                  int latency,
                                  const std::optional<std::string>& id) {
    base.validate();
    require(!base.intervened(), "nested intervention wrappers are not supported");
    require(detect_prob >= 0.0 && detect_prob <= 1.0, "detect_prob must lie in [0,1]");
    require(latency >= 0, "latency must be >= 0");

    PolicySpec wrapped;
    wrapped.id = id.value_or(base.id + "+gate");
    wrapped.rule = base.rule;
    wrapped.intervention = InterventionSpec{base.id, detect_prob, latency};
    wrapped.validate();
    return wrapped;
}

}  // namespace mapai
