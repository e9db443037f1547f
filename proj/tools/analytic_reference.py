#!/usr/bin/env python3
"""Closed-form reference values for the built-in regime-switching scenario.

The scenario has a single latent variable: the step k at which the regime
turns Adverse (absorbing), with P(onset = k) = (1-p)^k * p for k in
0..T-1 and P(never) = (1-p)^T. Every distributional quantity of the two
built-in policies is therefore an exact finite sum, which this script
evaluates with exact rational arithmetic before rounding. The printed
values are frozen into the C++ test suites.

Usage: python3 tools/analytic_reference.py
"""

from fractions import Fraction


P = Fraction(2, 100)   # per-step transition probability
T = 20                 # horizon

R_AGG = Fraction(12, 10)     # aggressive reward, Normal regime
R_CON = Fraction(1)          # conservative reward, Normal regime
R_ADV = Fraction(-2)         # either action, Adverse regime
PEN_AGG = Fraction(-10)      # one-time onset penalty, aggressive action
VIOLATION = Fraction(-40)    # trajectory violates iff U <= -40
ALPHA = Fraction(5, 100)


def onset_mass(k):
    return (1 - P) ** k * P


def never_mass():
    return (1 - P) ** T


def utility(policy, k):
    """Total utility when the regime turns Adverse at step k (None = never)."""
    if policy == "aggressive":
        normal, onset_pen = R_AGG, PEN_AGG
    elif policy == "conservative":
        normal, onset_pen = R_CON, Fraction(0)
    else:
        raise ValueError(policy)
    if k is None:
        return normal * T
    return normal * k + onset_pen + R_ADV * (T - k)


def outcome_table(policy):
    rows = [(onset_mass(k), utility(policy, k)) for k in range(T)]
    rows.append((never_mass(), utility(policy, None)))
    assert sum(m for m, _ in rows) == 1
    return rows


def mean_u(policy):
    return sum(m * u for m, u in outcome_table(policy))


def var_u(policy):
    mu = mean_u(policy)
    return sum(m * (u - mu) ** 2 for m, u in outcome_table(policy))


def p_viol(policy):
    return sum(m for m, u in outcome_table(policy) if u <= VIOLATION)


def cvar_fractional(policy, alpha=ALPHA):
    """Average of the worst alpha-fraction of losses (fractional tail)."""
    losses = sorted(((m, -u) for m, u in outcome_table(policy)),
                    key=lambda r: r[1], reverse=True)
    remaining = alpha
    acc = Fraction(0)
    for m, loss in losses:
        take = min(m, remaining)
        acc += take * loss
        remaining -= take
        if remaining == 0:
            break
    return acc / alpha


def cvar_threshold_set(policy, alpha=ALPHA):
    """Average of all losses >= the (1-alpha) loss quantile (atom-inclusive)."""
    losses = sorted(((m, -u) for m, u in outcome_table(policy)),
                    key=lambda r: r[1])
    cum = Fraction(0)
    q = None
    for m, loss in losses:
        cum += m
        if cum >= 1 - alpha:
            q = loss
            break
    tail = [(m, loss) for m, loss in losses if loss >= q]
    mass = sum(m for m, _ in tail)
    return sum(m * loss for m, loss in tail) / mass


def stratum_prob(lo, hi, include_never=False):
    total = Fraction(0)
    if lo is not None:
        total += sum(onset_mass(k) for k in range(lo, hi + 1))
    if include_never:
        total += never_mass()
    return total


def f(x, digits=17):
    return f"{float(x):.{digits}g}"


def main():
    print("# scenario: p=0.02, T=20, defaults")
    for pol in ("aggressive", "conservative"):
        print(f"[{pol}]")
        print(f"  E[U]            = {f(mean_u(pol))}")
        print(f"  Var[U]          = {f(var_u(pol))}")
        print(f"  p_viol          = {f(p_viol(pol))}")
        print(f"  CVaR_0.05 frac  = {f(cvar_fractional(pol))}")
        print(f"  CVaR_0.05 thset = {f(cvar_threshold_set(pol))}")

    print("[worlds]")
    print(f"  P(onset=0)  = {f(onset_mass(0))}")
    print(f"  P(onset=3)  = {f(onset_mass(3))}")
    print(f"  P(never)    = {f(never_mass())}")
    print(f"  IS weight never, q=0.1: {f((1-P)**T / Fraction(9,10)**T)}")
    print(f"  strata {{never}},{{0..3}},{{4..19}} = "
          f"{f(stratum_prob(None, None, True))}, "
          f"{f(stratum_prob(0, 3))}, {f(stratum_prob(4, T - 1))}")

    print("[flip variant r_aggressive_normal=1.5]")
    global R_AGG
    R_AGG = Fraction(15, 10)
    print(f"  E[U] aggressive = {f(mean_u('aggressive'))}")
    print(f"  p_viol          = {f(p_viol('aggressive'))}")

    # variance of the IS vs naive violation indicator, proposal p'=0.1
    R_AGG = Fraction(12, 10)
    q = Fraction(1, 10)
    naive_var = p_viol("conservative") * (1 - p_viol("conservative"))
    # conservative policy violates iff onset=0; weight there is p/q
    w0 = P / q
    is_second_moment = q * w0 ** 2
    is_var = is_second_moment - P ** 2
    print("[importance sampling, conservative p_viol]")
    print(f"  naive var  = {f(naive_var)}")
    print(f"  IS var     = {f(is_var)}")
    print(f"  var ratio  = {f(naive_var / is_var)}")


if __name__ == "__main__":
    main()
