"""Closed-form ordering-equality bounds and the numeric oracles that check them.

For n commands invoked simultaneously, with assigned timestamps confined to
a window of width ``delta_net`` and independent uniform noise of width
``delta_noise`` added to each (``alpha = delta_net / delta_noise``):

* any fixed output order has probability at least ``(1-alpha)^n / n!`` and
  at most ``((1+alpha)^n - n*alpha^n) / n!``;
* the spread between those bounds is the equality parameter
  ``epsilon(n) = ((1+alpha)^n - (1-alpha)^n - n*alpha^n) / n!``;
* commands invoked more than ``delta_net + delta_noise`` apart can never be
  inverted.

Closed forms use exact rational arithmetic.  Two independent oracles check
them: an exact piecewise-polynomial integrator for fixed (non-adaptive)
timestamp assignments, and vectorized Monte Carlo for everything else,
including the adaptive assignment strategy that attains the upper bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial, sqrt

import numpy as np

from .domain import ContractError

INTEGRATOR_MAX_N = 4


def _rational(x) -> Fraction:
    if isinstance(x, float):
        raise ContractError(
            "pass alpha as Fraction, int, or string (floats are not exact rationals)"
        )
    return Fraction(x)


def _check_alpha(alpha: Fraction, inclusive_one: bool):
    hi_ok = alpha <= 1 if inclusive_one else alpha < 1
    if not (0 < alpha and hi_ok):
        bound = "(0, 1]" if inclusive_one else "(0, 1)"
        raise ContractError(f"alpha must be in {bound}, got {alpha}")


@dataclass(frozen=True)
class BoundQuery:
    """A bound evaluation point: n simultaneous commands at a given noise ratio."""

    n: int
    delta_net_us: int
    delta_noise_us: int

    def __post_init__(self):
        if self.n < 2:
            raise ContractError("bound queries need n >= 2")
        if not (0 < self.delta_net_us < self.delta_noise_us):
            raise ContractError("need 0 < delta_net < delta_noise")

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.delta_net_us, self.delta_noise_us)


def epsilon_pair(alpha) -> Fraction:
    """Worst-case |Pr[i1 first] - Pr[i2 first]| for two simultaneous commands."""
    a = _rational(alpha)
    _check_alpha(a, inclusive_one=True)
    return 1 - (1 - a) ** 2


def epsilon_general(n: int, alpha) -> Fraction:
    """Worst-case probability spread across output orders of n simultaneous commands."""
    if n < 1:
        raise ContractError("n must be >= 1")
    a = _rational(alpha)
    _check_alpha(a, inclusive_one=True)
    return Fraction((1 + a) ** n - (1 - a) ** n - n * a**n, factorial(n))


def order_prob_bounds(n: int, alpha) -> tuple:
    """(lower, upper) probability of any fixed order of n simultaneous commands.

    For n >= 2, upper - lower equals epsilon_general(n, alpha).  A single
    command's only order always happens, so n = 1 returns (1, 1).
    """
    if n < 1:
        raise ContractError("n must be >= 1")
    a = _rational(alpha)
    _check_alpha(a, inclusive_one=True)
    if n == 1:
        return Fraction(1), Fraction(1)
    lower = Fraction((1 - a) ** n, factorial(n))
    upper = Fraction((1 + a) ** n - n * a**n, factorial(n))
    return lower, upper


def delta_linearizability(delta_net_us: int, delta_noise_us: int) -> int:
    """Invocation-time gap beyond which inversion is impossible."""
    if delta_net_us < 0 or delta_noise_us < 0:
        raise ContractError("delta parameters must be >= 0")
    return delta_net_us + delta_noise_us


# --- exact integrator ------------------------------------------------------
#
# A piecewise polynomial over Fraction breakpoints: value 0 below the first
# breakpoint, cs[i] on [xs[i], xs[i+1]], and the constant `after` from the
# last breakpoint on.  Integrands carry after == 0; cumulative integrals
# carry their total as `after`.


def _poly_eval(coeffs, x):
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _poly_antideriv(coeffs):
    return (Fraction(0),) + tuple(c / (k + 1) for k, c in enumerate(coeffs))


@dataclass(frozen=True)
class _Piecewise:
    xs: tuple
    cs: tuple
    after: Fraction

    def eval(self, x):
        if x < self.xs[0]:
            return Fraction(0)
        if x >= self.xs[-1]:
            return self.after
        for i in range(len(self.cs)):
            if self.xs[i] <= x < self.xs[i + 1]:
                return _poly_eval(self.cs[i], x)
        raise AssertionError("breakpoint scan failed")  # pragma: no cover

    def restrict(self, lo, hi) -> "_Piecewise":
        """This function as an integrand supported on [lo, hi]."""
        cuts = sorted({lo, hi} | {x for x in self.xs if lo < x < hi})
        cs = []
        for u, v in zip(cuts, cuts[1:]):
            if v <= self.xs[0]:
                cs.append((Fraction(0),))
            elif u >= self.xs[-1]:
                cs.append((self.after,))
            else:
                for i in range(len(self.cs)):
                    if self.xs[i] <= u and v <= self.xs[i + 1]:
                        cs.append(self.cs[i])
                        break
                else:  # pragma: no cover
                    raise AssertionError("interval not covered by source pieces")
        return _Piecewise(tuple(cuts), tuple(cs), Fraction(0))

    def cumulative(self) -> "_Piecewise":
        """t -> integral of this integrand over (-inf, t]."""
        acc = Fraction(0)
        out = []
        for i in range(len(self.cs)):
            anti = _poly_antideriv(self.cs[i])
            shift = acc - _poly_eval(anti, self.xs[i])
            out.append((anti[0] + shift,) + anti[1:])
            acc = _poly_eval(anti, self.xs[i + 1]) + shift
        return _Piecewise(self.xs, tuple(out), acc)


def order_prob_integrate(ats, delta_noise, target_order=None) -> Fraction:
    """Exact probability that fixed assigned timestamps yield a target order.

    ``ats[i]`` is command i's assigned timestamp; each command independently
    adds uniform noise of width ``delta_noise``.  Returns the probability
    that the noised timestamps are strictly increasing along
    ``target_order`` (default: 0, 1, ..., n-1).  Capped at n <= 4: the
    piecewise region count grows factorially and 4 is enough to validate
    every scenario this package simulates.
    """
    a = [Fraction(x) if not isinstance(x, float) else None for x in ats]
    if any(x is None for x in a):
        raise ContractError("pass assigned timestamps as exact rationals, not floats")
    n = len(a)
    if not (1 <= n <= INTEGRATOR_MAX_N):
        raise ContractError(f"integrator supports 1 <= n <= {INTEGRATOR_MAX_N}, got {n}")
    dn = _rational(delta_noise)
    if dn <= 0:
        raise ContractError("delta_noise must be positive")
    if target_order is None:
        target_order = tuple(range(n))
    if sorted(target_order) != list(range(n)):
        raise ContractError("target_order must be a permutation of command indices")
    norm = [ai / dn for ai in a]
    h = None
    for idx in target_order:
        lo, hi = norm[idx], norm[idx] + 1
        if h is None:
            integrand = _Piecewise((lo, hi), ((Fraction(1),),), Fraction(0))
        else:
            integrand = h.restrict(lo, hi)
        h = integrand.cumulative()
    return h.after


# --- Monte Carlo -----------------------------------------------------------

HONEST = "honest"
LOWER_BOUND = "lower_bound"
ADAPTIVE_UPPER = "adaptive_upper"


def _simulate_fixed(ats_norm, target_order, trials, rng) -> np.ndarray:
    noise = rng.random((trials, len(ats_norm)))
    modified = noise + np.asarray(ats_norm, dtype=float)
    ordered = modified[:, list(target_order)]
    return np.all(np.diff(ordered, axis=1) > 0, axis=1)


def _simulate_adaptive_upper(n, alpha, trials, rng) -> np.ndarray:
    """Adversary places each command after observing the previous noised value.

    The first command in the target order gets the earliest possible
    timestamp; while each observed noised value stays inside the assignment
    window the next command is pinned exactly at it, and once a value
    escapes the window every later command is pushed to the window's end.
    """
    noise = rng.random((trials, n))
    t_prev = np.zeros(trials)
    chained = np.ones(trials, dtype=bool)
    ok = np.ones(trials, dtype=bool)
    t_cur = np.zeros(trials)
    for i in range(n):
        ats = np.where(chained, t_cur, alpha)
        t_i = ats + noise[:, i]
        ok &= chained | (t_i > t_prev)
        escaped = chained & (t_i > alpha)
        t_cur = np.where(chained, t_i, t_cur)
        chained &= ~escaped
        t_prev = t_i
    return ok


def order_prob_monte_carlo(strategy, n, alpha, target_order, trials, rng):
    """Binomial estimate (value, stderr) of Pr[target order] under a strategy.

    ``strategy`` is one of the named strategies above, or an explicit tuple
    of assigned timestamps normalized to a unit noise width (indexed by
    command, like the integrator's ``ats``).  Unlike the integrator, this
    handles the adaptive strategy, where later assignments depend on
    observed noised values.
    """
    if trials < 1000:
        raise ContractError("need at least 1000 trials for a usable estimate")
    alpha = float(alpha) if not isinstance(alpha, float) else alpha
    if target_order is None:
        target_order = tuple(range(n))
    if strategy == HONEST:
        hits = _simulate_fixed((0.0,) * n, target_order, trials, rng)
    elif strategy == LOWER_BOUND:
        ats = [alpha] * n
        ats_by_pos = [alpha] * (n - 1) + [0.0]
        for pos, idx in enumerate(target_order):
            ats[idx] = ats_by_pos[pos]
        hits = _simulate_fixed(ats, target_order, trials, rng)
    elif strategy == ADAPTIVE_UPPER:
        hits = _simulate_adaptive_upper(n, alpha, trials, rng)
    elif isinstance(strategy, (tuple, list)):
        if len(strategy) != n:
            raise ContractError("fixed assignment length must equal n")
        hits = _simulate_fixed([float(x) for x in strategy], target_order, trials, rng)
    else:
        raise ContractError(f"unknown strategy {strategy!r}")
    p = float(np.count_nonzero(hits)) / trials
    return p, sqrt(max(p * (1 - p), 1e-12) / trials)
