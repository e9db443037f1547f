#include "mapai/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>

namespace mapai::stats {

namespace {

bool constant_weights(std::span<const double> weights) {
    if (weights.empty()) return true;
    for (double w : weights) {
        if (w != weights.front()) return false;
    }
    return true;
}

void check_weights(std::span<const double> values, std::span<const double> weights) {
    if (weights.empty()) return;
    require(weights.size() == values.size(), "weights must match values");
    for (double w : weights) require(w > 0.0, "weights must be positive");
}

// Snaps a real index to the nearest integer when floating-point noise put it
// within 1e-9, so exact quantile boundaries land on the intended record.
double snap_index(double x) {
    const double r = std::round(x);
    return std::abs(x - r) < 1e-9 ? r : x;
}

double fractional_tail(std::vector<std::pair<double, double>>& loss_weight,
                       double tail_mass) {
    std::sort(loss_weight.begin(), loss_weight.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    double remaining = tail_mass;
    double acc = 0.0;
    for (const auto& [loss, weight] : loss_weight) {
        const double take = std::min(weight, remaining);
        acc += take * loss;
        remaining -= take;
        if (remaining <= 0.0) break;
    }
    return acc / tail_mass;
}

double threshold_set(std::vector<std::pair<double, double>>& loss_weight,
                     double alpha, double total_weight) {
    std::sort(loss_weight.begin(), loss_weight.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const double target = snap_index((1.0 - alpha) * total_weight);
    double cum = 0.0;
    double quantile = loss_weight.back().first;
    for (const auto& [loss, weight] : loss_weight) {
        cum += weight;
        if (cum >= target) {
            quantile = loss;
            break;
        }
    }
    double mass = 0.0;
    double acc = 0.0;
    for (const auto& [loss, weight] : loss_weight) {
        if (loss >= quantile) {
            mass += weight;
            acc += weight * loss;
        }
    }
    return acc / mass;
}

struct Sample {
    std::vector<double> values;   // utilities, losses, or 0/1 indicators
    std::vector<double> weights;  // empty for unit-weight sets
};

Sample extract(const OutcomeSet& outcomes, BootstrapStatistic::Kind kind) {
    Sample sample;
    sample.values.reserve(outcomes.records.size());
    const bool weighted = outcomes.weighted();
    if (weighted) sample.weights.reserve(outcomes.records.size());
    for (const auto& record : outcomes.records) {
        switch (kind) {
            case BootstrapStatistic::Kind::Mean:
                sample.values.push_back(record.utility);
                break;
            case BootstrapStatistic::Kind::PViol:
                sample.values.push_back(record.violated ? 1.0 : 0.0);
                break;
            case BootstrapStatistic::Kind::Cvar:
                sample.values.push_back(record.loss);
                break;
        }
        if (weighted) sample.weights.push_back(record.weight);
    }
    return sample;
}

double statistic_of(const Sample& sample, const BootstrapStatistic& statistic) {
    switch (statistic.kind) {
        case BootstrapStatistic::Kind::Mean:
        case BootstrapStatistic::Kind::PViol:
            return mean_of(sample.values, sample.weights);
        case BootstrapStatistic::Kind::Cvar:
            if (sample.weights.empty() || constant_weights(sample.weights)) {
                return cvar_of_losses(sample.values, statistic.alpha,
                                      statistic.convention);
            } else {
                std::vector<std::pair<double, double>> pairs;
                pairs.reserve(sample.values.size());
                for (std::size_t i = 0; i < sample.values.size(); ++i) {
                    pairs.emplace_back(sample.values[i], sample.weights[i]);
                }
                return cvar_of_weighted_losses(std::move(pairs), statistic.alpha,
                                               statistic.convention);
            }
    }
    return 0.0;
}

Interval percentile_interval(std::vector<double>& replicates, double confidence) {
    std::sort(replicates.begin(), replicates.end());
    const auto b = static_cast<double>(replicates.size());
    auto at = [&](double q) {
        const double h = q * (b - 1.0);
        const auto i = static_cast<std::size_t>(h);
        if (i + 1 >= replicates.size()) return replicates.back();
        return replicates[i] + (h - static_cast<double>(i)) *
                                   (replicates[i + 1] - replicates[i]);
    };
    const double tail = (1.0 - confidence) / 2.0;
    return {at(tail), at(1.0 - tail)};
}

constexpr std::uint64_t kBootstrapDomain = tag64("bootstrap");

std::uint64_t ci_seed(const OutcomeSet& outcomes, std::string_view label) {
    return derive_seed(outcomes.provenance.batch.master_seed, tag64(label), 0);
}

}  // namespace

double mean_of(std::span<const double> values, std::span<const double> weights) {
    require(!values.empty(), "mean requires at least one value");
    check_weights(values, weights);
    if (constant_weights(weights)) {
        double sum = 0.0;
        for (double v : values) sum += v;
        return sum / static_cast<double>(values.size());
    }
    double sum = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        sum += weights[i] * values[i];
        total += weights[i];
    }
    return sum / total;
}

double variance_of(std::span<const double> values, std::span<const double> weights) {
    check_weights(values, weights);
    const double mu = mean_of(values, weights);
    if (constant_weights(weights)) {
        require(values.size() >= 2, "variance requires n >= 2");
        double acc = 0.0;
        for (double v : values) acc += (v - mu) * (v - mu);
        return std::max(0.0, acc / static_cast<double>(values.size() - 1));
    }
    double v1 = 0.0;
    double v2 = 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        v1 += weights[i];
        v2 += weights[i] * weights[i];
        acc += weights[i] * (values[i] - mu) * (values[i] - mu);
    }
    require(v1 * v1 / v2 >= 2.0, "weighted variance requires effective n >= 2");
    return std::max(0.0, acc / (v1 - v2 / v1));
}

double fraction_of(std::span<const bool> flags, std::span<const double> weights) {
    require(!flags.empty(), "fraction requires at least one record");
    std::vector<double> values(flags.size());
    for (std::size_t i = 0; i < flags.size(); ++i) values[i] = flags[i] ? 1.0 : 0.0;
    return mean_of(values, weights);
}

double cvar_of_losses(std::vector<double> losses, double alpha,
                      CvarConvention convention) {
    require(!losses.empty(), "cvar requires at least one loss");
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    const auto n = losses.size();

    if (convention == CvarConvention::FractionalTail) {
        const double m = snap_index(alpha * static_cast<double>(n));
        const auto full = static_cast<std::size_t>(m);
        const double frac = m - static_cast<double>(full);
        const std::size_t need = std::min(n, full + (frac > 0.0 ? 1 : 0));
        std::partial_sort(losses.begin(),
                          losses.begin() + static_cast<std::ptrdiff_t>(need),
                          losses.end(), std::greater<>());
        double acc = 0.0;
        for (std::size_t i = 0; i < std::min(full, n); ++i) acc += losses[i];
        if (frac > 0.0 && full < n) acc += frac * losses[full];
        return acc / m;
    }

    // ThresholdSet: quantile is the ceil((1-alpha)n)-th smallest loss; the
    // tail averages every loss >= that quantile (ties included).
    std::sort(losses.begin(), losses.end());
    const double raw = (1.0 - alpha) * static_cast<double>(n);
    const auto rank = static_cast<std::size_t>(std::ceil(snap_index(raw)));
    const double quantile = losses[std::min(n, std::max<std::size_t>(rank, 1)) - 1];
    double acc = 0.0;
    std::size_t count = 0;
    for (auto it = losses.rbegin(); it != losses.rend() && *it >= quantile; ++it) {
        acc += *it;
        ++count;
    }
    return acc / static_cast<double>(count);
}

double cvar_of_weighted_losses(std::vector<std::pair<double, double>> loss_weight,
                               double alpha, CvarConvention convention) {
    require(!loss_weight.empty(), "cvar requires at least one loss");
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");

    bool unit = true;
    double total = 0.0;
    for (const auto& [loss, weight] : loss_weight) {
        require(weight > 0.0, "weights must be positive");
        if (weight != loss_weight.front().second) unit = false;
        total += weight;
    }
    if (unit) {
        std::vector<double> losses;
        losses.reserve(loss_weight.size());
        for (const auto& [loss, weight] : loss_weight) losses.push_back(loss);
        return cvar_of_losses(std::move(losses), alpha, convention);
    }

    if (convention == CvarConvention::FractionalTail) {
        return fractional_tail(loss_weight, alpha * total);
    }
    return threshold_set(loss_weight, alpha, total);
}

double mean_utility(const OutcomeSet& outcomes) {
    const Sample sample = extract(outcomes, BootstrapStatistic::Kind::Mean);
    return mean_of(sample.values, sample.weights);
}

double variance_utility(const OutcomeSet& outcomes) {
    const Sample sample = extract(outcomes, BootstrapStatistic::Kind::Mean);
    return variance_of(sample.values, sample.weights);
}

double violation_probability(const OutcomeSet& outcomes) {
    const Sample sample = extract(outcomes, BootstrapStatistic::Kind::PViol);
    return mean_of(sample.values, sample.weights);
}

double cvar(const OutcomeSet& outcomes, double alpha, CvarConvention convention) {
    const Sample sample = extract(outcomes, BootstrapStatistic::Kind::Cvar);
    BootstrapStatistic statistic = BootstrapStatistic::cvar(alpha, convention);
    return statistic_of(sample, statistic);
}

Interval bootstrap_ci(const OutcomeSet& outcomes, const BootstrapStatistic& statistic,
                      int resamples, double confidence, std::uint64_t seed) {
    require(resamples >= 100, "bootstrap requires >= 100 resamples");
    require(outcomes.records.size() >= 2, "bootstrap requires n >= 2");
    require(confidence > 0.0 && confidence < 1.0, "confidence must lie in (0,1)");

    const Sample base = extract(outcomes, statistic.kind);
    const auto n = base.values.size();
    std::vector<double> replicates(static_cast<std::size_t>(resamples));
    parallel_for(resamples, [&](std::int64_t r) {
        RngStream rng =
            substream(seed, kBootstrapDomain, static_cast<std::uint64_t>(r));
        Sample draw;
        draw.values.resize(n);
        if (!base.weights.empty()) draw.weights.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto j = static_cast<std::size_t>(rng.next_below(n));
            draw.values[i] = base.values[j];
            if (!base.weights.empty()) draw.weights[i] = base.weights[j];
        }
        replicates[static_cast<std::size_t>(r)] = statistic_of(draw, statistic);
    });
    return percentile_interval(replicates, confidence);
}

Interval wilson_ci(std::int64_t successes, std::int64_t trials, double confidence) {
    require(trials >= 1, "wilson interval requires n >= 1");
    require(successes >= 0 && successes <= trials, "successes must lie in [0, n]");
    require(confidence > 0.0 && confidence < 1.0, "confidence must lie in (0,1)");

    const boost::math::normal_distribution<double> normal;
    const double z = boost::math::quantile(normal, (1.0 + confidence) / 2.0);
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half =
        z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    // The endpoints are exactly 0 and 1 at the boundary counts; computing
    // them keeps floating-point dust out of the containment invariant.
    const double lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
    const double hi = successes == trials ? 1.0 : std::min(1.0, center + half);
    return {lo, hi};
}

Interval clopper_pearson_ci(std::int64_t successes, std::int64_t trials,
                            double confidence) {
    require(trials >= 1, "clopper-pearson interval requires n >= 1");
    require(successes >= 0 && successes <= trials, "successes must lie in [0, n]");
    require(confidence > 0.0 && confidence < 1.0, "confidence must lie in (0,1)");

    const double tail = (1.0 - confidence) / 2.0;
    const double k = static_cast<double>(successes);
    const double n = static_cast<double>(trials);
    Interval ci{0.0, 1.0};
    if (successes > 0) {
        const boost::math::beta_distribution<double> lower(k, n - k + 1.0);
        ci.lo = boost::math::quantile(lower, tail);
    }
    if (successes < trials) {
        const boost::math::beta_distribution<double> upper(k + 1.0, n - k);
        ci.hi = boost::math::quantile(upper, 1.0 - tail);
    }
    return ci;
}

MetricVector metric_vector(const OutcomeSet& outcomes,
                           const GovernanceSpec& governance) {
    require(!outcomes.records.empty(), "metric vector requires a nonempty set");
    governance.validate();

    MetricVector m;
    m.n = static_cast<std::int64_t>(outcomes.records.size());
    m.alpha = governance.alpha;
    m.e_u = mean_utility(outcomes);
    m.var_u = variance_utility(outcomes);
    m.p_viol = violation_probability(outcomes);
    m.cvar = cvar(outcomes, governance.alpha, CvarConvention::FractionalTail);

    const int b = kDefaultBootstrapResamples;
    m.ci_e_u = bootstrap_ci(outcomes, BootstrapStatistic::mean(), b,
                            governance.confidence, ci_seed(outcomes, "ci/e_u"));
    m.ci_cvar = bootstrap_ci(
        outcomes, BootstrapStatistic::cvar(governance.alpha), b,
        governance.confidence, ci_seed(outcomes, "ci/cvar"));
    if (outcomes.weighted()) {
        m.ci_p_viol =
            bootstrap_ci(outcomes, BootstrapStatistic::p_viol(), b,
                         governance.confidence, ci_seed(outcomes, "ci/p_viol"));
    } else {
        std::int64_t violated = 0;
        for (const auto& record : outcomes.records) violated += record.violated;
        m.ci_p_viol = wilson_ci(violated, m.n, governance.confidence);
    }
    m.validate();
    return m;
}

MetricVector stratified_combine(const std::vector<StratumOutcome>& per_stratum,
                                const GovernanceSpec& governance) {
    require(!per_stratum.empty(), "stratified combine requires strata");
    governance.validate();
    double total_prob = 0.0;
    std::int64_t total_n = 0;
    for (const auto& so : per_stratum) {
        require(!so.outcomes.records.empty(),
                "every stratum needs at least one record");
        require(so.stratum.probability > 0.0, "stratum probability must be > 0");
        total_prob += so.stratum.probability;
        total_n += static_cast<std::int64_t>(so.outcomes.records.size());
    }
    require(std::abs(total_prob - 1.0) <= 1e-12,
            "stratum probabilities must sum to 1");

    // Pool records at weight P(s)/n_s; the pooled weighted mean equals the
    // probability-weighted stratum means identically.
    auto pooled = [&](BootstrapStatistic::Kind kind) {
        Sample sample;
        sample.values.reserve(static_cast<std::size_t>(total_n));
        sample.weights.reserve(static_cast<std::size_t>(total_n));
        for (const auto& so : per_stratum) {
            const double w = so.stratum.probability /
                             static_cast<double>(so.outcomes.records.size());
            const Sample part = extract(so.outcomes, kind);
            for (double v : part.values) {
                sample.values.push_back(v);
                sample.weights.push_back(w);
            }
        }
        return sample;
    };

    MetricVector m;
    m.n = total_n;
    m.alpha = governance.alpha;
    {
        const Sample s = pooled(BootstrapStatistic::Kind::Mean);
        m.e_u = mean_of(s.values, s.weights);
        m.var_u = variance_of(s.values, s.weights);
    }
    {
        const Sample s = pooled(BootstrapStatistic::Kind::PViol);
        m.p_viol = std::clamp(mean_of(s.values, s.weights), 0.0, 1.0);
    }
    {
        const Sample s = pooled(BootstrapStatistic::Kind::Cvar);
        m.cvar = statistic_of(s, BootstrapStatistic::cvar(governance.alpha));
    }

    // Within-stratum bootstrap: each replicate resamples records inside every
    // stratum, preserving the allocation, then recombines.
    const std::uint64_t seed =
        derive_seed(per_stratum.front().outcomes.provenance.batch.master_seed,
                    tag64("ci/stratified"), 0);
    auto stratified_bootstrap = [&](const BootstrapStatistic& statistic) {
        std::vector<Sample> parts;
        parts.reserve(per_stratum.size());
        for (const auto& so : per_stratum) parts.push_back(extract(so.outcomes, statistic.kind));
        const int b = kDefaultBootstrapResamples;
        std::vector<double> replicates(static_cast<std::size_t>(b));
        parallel_for(b, [&](std::int64_t r) {
            RngStream rng =
                substream(seed ^ tag64(std::string("stat:") +
                                       std::to_string(static_cast<int>(statistic.kind))),
                          kBootstrapDomain, static_cast<std::uint64_t>(r));
            Sample draw;
            draw.values.reserve(static_cast<std::size_t>(total_n));
            draw.weights.reserve(static_cast<std::size_t>(total_n));
            for (std::size_t s = 0; s < parts.size(); ++s) {
                const auto ns = parts[s].values.size();
                const double w =
                    per_stratum[s].stratum.probability / static_cast<double>(ns);
                for (std::size_t i = 0; i < ns; ++i) {
                    const auto j = static_cast<std::size_t>(rng.next_below(ns));
                    draw.values.push_back(parts[s].values[j]);
                    draw.weights.push_back(w);
                }
            }
            replicates[static_cast<std::size_t>(r)] = statistic_of(draw, statistic);
        });
        return percentile_interval(replicates, governance.confidence);
    };

    m.ci_e_u = stratified_bootstrap(BootstrapStatistic::mean());
    m.ci_p_viol = stratified_bootstrap(BootstrapStatistic::p_viol());
    m.ci_cvar = stratified_bootstrap(BootstrapStatistic::cvar(governance.alpha));
    // Degenerate strata can put the exact point estimate at the interval edge;
    // nudge for containment under floating-point jitter.
    m.ci_e_u.lo = std::min(m.ci_e_u.lo, m.e_u);
    m.ci_e_u.hi = std::max(m.ci_e_u.hi, m.e_u);
    m.ci_p_viol.lo = std::min(m.ci_p_viol.lo, m.p_viol);
    m.ci_p_viol.hi = std::max(m.ci_p_viol.hi, m.p_viol);
    m.validate();
    return m;
}

}  // namespace mapai::stats
