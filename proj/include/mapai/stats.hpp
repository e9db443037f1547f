#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mapai/core.hpp"
#include "mapai/engine.hpp"

namespace mapai::stats {

// Two readings of the empirical CVaR. FractionalTail averages the worst
// alpha*n losses with fractional weight on the boundary order statistic
// (Rockafellar-Uryasev); ThresholdSet averages every loss at or above the
// ceil((1-alpha)n)-th smallest. FractionalTail is the default everywhere and
// the convention governance decisions read.
enum class CvarConvention : std::uint8_t { FractionalTail, ThresholdSet };

inline constexpr int kDefaultBootstrapResamples = 1000;

// --- raw-sample estimators -------------------------------------------------
// Weights may be empty (unit weights). Constant-weight inputs reduce to the
// unweighted path exactly.

double mean_of(std::span<const double> values, std::span<const double> weights = {});
double variance_of(std::span<const double> values,
                   std::span<const double> weights = {});
double fraction_of(std::span<const bool> flags, std::span<const double> weights = {});
double cvar_of_losses(std::vector<double> losses, double alpha,
                      CvarConvention convention = CvarConvention::FractionalTail);
double cvar_of_weighted_losses(std::vector<std::pair<double, double>> loss_weight,
                               double alpha,
                               CvarConvention convention = CvarConvention::FractionalTail);

// --- OutcomeSet estimators ---------------------------------------------------

double mean_utility(const OutcomeSet& outcomes);
double variance_utility(const OutcomeSet& outcomes);
double violation_probability(const OutcomeSet& outcomes);
double cvar(const OutcomeSet& outcomes, double alpha,
            CvarConvention convention = CvarConvention::FractionalTail);

// --- confidence intervals ----------------------------------------------------

struct BootstrapStatistic {
    enum class Kind : std::uint8_t { Mean, PViol, Cvar };

    Kind kind = Kind::Mean;
    double alpha = 0.05;
    CvarConvention convention = CvarConvention::FractionalTail;

    static BootstrapStatistic mean() { return {Kind::Mean}; }
    static BootstrapStatistic p_viol() { return {Kind::PViol}; }
    static BootstrapStatistic cvar(double alpha,
                                   CvarConvention convention =
                                       CvarConvention::FractionalTail) {
        return {Kind::Cvar, alpha, convention};
    }
};

// Seeded percentile bootstrap over record resamples (weights travel with
// their records). Constant statistics collapse to a point interval.
Interval bootstrap_ci(const OutcomeSet& outcomes, const BootstrapStatistic& statistic,
                      int resamples, double confidence, std::uint64_t seed);

Interval wilson_ci(std::int64_t successes, std::int64_t trials, double confidence);
Interval clopper_pearson_ci(std::int64_t successes, std::int64_t trials,
                            double confidence);

// --- assembly ----------------------------------------------------------------

// Point estimates plus CIs for one outcome set: bootstrap for e_u and cvar,
// Wilson for p_viol on unit-weight sets and bootstrap otherwise. CVaR uses
// FractionalTail at governance.alpha. Bootstrap seeds derive from the
// batch's master seed, so vectors are reproducible from provenance alone.
MetricVector metric_vector(const OutcomeSet& outcomes, const GovernanceSpec& governance);

// Combines per-stratum outcome sets: mean and p_viol as probability-weighted
// stratum estimates, CVaR by pooling records at weight P(s)/n_s, intervals
// by within-stratum (stratified) bootstrap.
MetricVector stratified_combine(const std::vector<StratumOutcome>& per_stratum,
                                const GovernanceSpec& governance);

}  // namespace mapai::stats
