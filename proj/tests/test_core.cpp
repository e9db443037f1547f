#include "doctest.h"

#include <limits>
#include <random>

#include "mapai/core.hpp"

using namespace mapai;

namespace {

Trajectory flat_trajectory(int steps, double reward, ActionId action,
                           Regime regime = Regime::Normal) {
    Trajectory t;
    for (int i = 0; i < steps; ++i) t.steps.push_back({i, regime, action, reward});
    return t;
}

MetricVector valid_metrics() {
    MetricVector m;
    m.e_u = 5.0;
    m.var_u = 2.0;
    m.p_viol = 0.1;
    m.cvar = 10.0;
    m.ci_e_u = {4.5, 5.5};
    m.ci_p_viol = {0.08, 0.12};
    m.ci_cvar = {9.0, 11.0};
    m.n = 100;
    m.alpha = 0.05;
    return m;
}

}  // namespace

TEST_CASE("utility_of sums step rewards") {
    CHECK(utility_of(Trajectory{}) == 0.0);

    const Trajectory normal = flat_trajectory(20, 1.2, ActionId::Aggressive);
    CHECK(utility_of(normal) == doctest::Approx(24.0).epsilon(1e-12));

    // Adverse from step 0 with the onset penalty folded into step 0's reward.
    Trajectory adverse = flat_trajectory(20, -2.0, ActionId::Aggressive, Regime::Adverse);
    adverse.steps[0].reward = -12.0;
    CHECK(utility_of(adverse) == doctest::Approx(-50.0).epsilon(1e-12));
}

TEST_CASE("loss_of is exact negation") {
    Trajectory t = flat_trajectory(20, 1.2, ActionId::Aggressive);
    CHECK(loss_of(t) == -utility_of(t));
    CHECK(loss_of(t) == doctest::Approx(-24.0).epsilon(1e-12));
    CHECK(loss_of(Trajectory{}) == 0.0);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> reward(-25.0, 25.0);
    for (int trial = 0; trial < 200; ++trial) {
        Trajectory random;
        const int len = static_cast<int>(rng() % 30);
        for (int i = 0; i < len; ++i) {
            random.steps.push_back({i, Regime::Normal, ActionId::Conservative, reward(rng)});
        }
        CHECK(loss_of(random) == -utility_of(random));
    }
}

TEST_CASE("violates fires inclusively on the utility threshold") {
    const ConstraintSet constraints{{{ConstraintKind::CumulativeUtilityAtMost, -40.0}}};
    CHECK(violates_utility(-50.0, constraints));
    CHECK(violates_utility(-40.0, constraints));  // boundary trajectories violate
    CHECK_FALSE(violates_utility(24.0, constraints));

    Trajectory boundary = flat_trajectory(20, -2.0, ActionId::Conservative, Regime::Adverse);
    CHECK(violates(boundary, constraints));
}

TEST_CASE("violates is monotone in utility") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(-80.0, 40.0);
    const ConstraintSet constraints{{{ConstraintKind::CumulativeUtilityAtMost, -40.0}}};
    for (int trial = 0; trial < 500; ++trial) {
        double a = dist(rng);
        double b = dist(rng);
        if (a < b) std::swap(a, b);  // b <= a
        if (violates_utility(a, constraints)) CHECK(violates_utility(b, constraints));
    }
}

TEST_CASE("constraint set validation") {
    CHECK_THROWS_AS(ConstraintSet{}.validate(), std::invalid_argument);
    ConstraintSet inf{{{ConstraintKind::CumulativeUtilityAtMost,
                        std::numeric_limits<double>::infinity()}}};
    CHECK_THROWS_AS(inf.validate(), std::invalid_argument);
}

TEST_CASE("metric vector invariants are constructor-checked") {
    CHECK_NOTHROW(valid_metrics().validate());

    MetricVector bad = valid_metrics();
    bad.var_u = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = valid_metrics();
    bad.p_viol = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = valid_metrics();
    bad.ci_cvar = {11.0, 9.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = valid_metrics();
    bad.e_u = 6.0;  // outside ci_e_u
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = valid_metrics();
    bad.p_viol = 0.2;  // outside ci_p_viol
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("metric ids round-trip by name") {
    for (MetricId id : {MetricId::PViol, MetricId::Cvar, MetricId::EU, MetricId::VarU}) {
        CHECK(metric_from_name(metric_name(id)) == id);
    }
    CHECK_THROWS_AS(metric_from_name("nope"), std::invalid_argument);

    const MetricVector m = valid_metrics();
    CHECK(m.value(MetricId::PViol) == m.p_viol);
    CHECK(m.value(MetricId::Cvar) == m.cvar);
    CHECK(m.value(MetricId::EU) == m.e_u);
    CHECK(m.value(MetricId::VarU) == m.var_u);
}

TEST_CASE("policy and governance validation") {
    PolicySpec unnamed;
    unnamed.id = "";
    CHECK_THROWS_AS(unnamed.validate(), std::invalid_argument);

    PolicySpec gated;
    gated.id = "g";
    gated.intervention = InterventionSpec{"base", 1.5, 0};
    CHECK_THROWS_AS(gated.validate(), std::invalid_argument);
    gated.intervention = InterventionSpec{"base", 0.5, -1};
    CHECK_THROWS_AS(gated.validate(), std::invalid_argument);
    gated.intervention = InterventionSpec{"base", 0.5, 2};
    CHECK_NOTHROW(gated.validate());
    CHECK(gated.noise_key() == "base");

    GovernanceSpec g = reference_governance();
    CHECK_NOTHROW(g.validate());
    g.criteria_order.push_back({MetricId::PViol, Direction::Minimize});
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);  // duplicate criterion

    GovernanceSpec empty;
    empty.criteria_order.clear();
    CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}

TEST_CASE("decision factories") {
    const Decision act = Decision::act("pi_b");
    CHECK(act.is_act());
    CHECK(*act.policy_id == "pi_b");
    CHECK(verdict_name(act.verdict) == std::string("act"));
    CHECK_FALSE(Decision::escalate().is_act());
    CHECK_FALSE(Decision::abort().policy_id.has_value());
}
