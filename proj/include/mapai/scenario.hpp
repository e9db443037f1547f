#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mapai/core.hpp"
#include "mapai/rng.hpp"

namespace mapai {

// Two-regime switching generator: the regime turns Adverse at step k with
// probability (1-p)^k * p for k in 0..T-1 (k Normal steps precede onset) and
// never within the horizon with probability (1-p)^T. Adverse is absorbing.
struct RegimeSwitchConfig {
    double p = 0.02;
    int horizon = 20;

    void validate() const;
};

// A contiguous onset span and/or the no-onset world. Spans are inclusive.
struct OnsetRange {
    std::optional<std::pair<int, int>> span;
    bool include_never = false;

    bool contains(const WorldRealization& world) const;
};

struct Stratum {
    std::string id;
    double probability = 0.0;
    OnsetRange range;
};

// Draws the onset step by inverse CDF on a single uniform, so world_prob is
// exact and one draw advances the stream by exactly one step.
WorldRealization sample_world(const RegimeSwitchConfig& cfg, RngStream& rng);

// Exact mass of one world under the generator. Worlds outside the horizon
// are rejected.
double world_prob(const RegimeSwitchConfig& cfg, const WorldRealization& world);

// Likelihood ratio P_base(world) / P_proposal(world). Throws when the
// proposal assigns zero mass to a world the base distribution can produce.
double importance_weight(const RegimeSwitchConfig& base,
                         const RegimeSwitchConfig& proposal,
                         const WorldRealization& world);

// Validates that the ranges partition {0..T-1} u {never} and returns one
// stratum per range with its exact probability. Stratum ids are derived from
// the range contents.
std::vector<Stratum> enumerate_strata(const RegimeSwitchConfig& cfg,
                                      const std::vector<OnsetRange>& partition);

// Draws a world from the mass function renormalized to the stratum's range.
WorldRealization sample_world_in_stratum(const RegimeSwitchConfig& cfg,
                                         const Stratum& stratum, RngStream& rng);

// Wraps a base policy with the probabilistic oversight gate. The wrapped id
// defaults to "<base-id>+gate" and can be overridden.
PolicySpec wrap_with_intervention(const PolicySpec& base, double detect_prob,
                                  int latency,
                                  const std::optional<std::string>& id = std::nullopt);

}  // namespace mapai
