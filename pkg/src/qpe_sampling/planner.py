"""Measurement schedules for the phase-shift improved iterative algorithm.

Iteration ``k`` (``1 <= k <= m``) fixes bit ``m + 1 - k``.  The first
iteration runs a triple-sign or majority block that yields three bits; every
later iteration is a single sign determination whose worst-case deviation
angle is ``pi / 2^(k+1)``.  Once iterations are past ``k_eps`` one
measurement each suffices.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .numerics import DEFAULT_CONTEXT, PrecisionContext
from .schemes.majority import majority_bound_n
from .schemes.sign import sign_min_n

FIRST_STAGES = ("triple_sign", "majority")


@dataclass(frozen=True)
class IterationPlan:
    k: int
    angle: object  # worst-case deviation handled by the sign test
    budget: object
    count: int


@dataclass(frozen=True)
class PlanRow:
    """A complete measurement schedule.

    ``first_counts`` splits iteration 1 into its two component blocks and its
    sign step: ``(n_a, n_b, n_sign)``.  For triple-sign the blocks are the
    cosine and sine sign tests after a 1/8-turn rotation; for majority they
    are the cosine and sine counts.
    """

    eps: object
    m: int
    first_stage: str
    policy: str
    first_counts: tuple[int, int, int]
    iterations: tuple[IterationPlan, ...]

    @property
    def total(self) -> int:
        return sum(self.first_counts) + sum(it.count for it in self.iterations)

    def counts(self) -> list[int]:
        """Per-iteration measurement totals, iteration 1 first."""
        return [sum(self.first_counts)] + [it.count for it in self.iterations]


@dataclass(frozen=True)
class BudgetPolicy:
    """How ``eps`` is spread over the iterations of an ``m``-bit run.

    ``first(eps, m, first_stage)`` is the budget of each of the two error
    sources in iteration 1; ``later(eps, m)`` is the budget of each later
    sign iteration.  ``horizon(eps, m)`` is the last iteration that gets a
    full sign test; the rest take one measurement.
    """

    name: str
    first: Callable
    later: Callable
    horizon: Callable


def k_eps_exact(eps, ctx: PrecisionContext = DEFAULT_CONTEXT) -> int:
    """Smallest ``k >= 1`` with ``4^-k <= 12 eps / (k pi^2)``."""
    mp = ctx.mp
    e = ctx.real(eps)
    if not 0 < e <= 1:
        raise ValueError("eps must lie in (0, 1]")
    k = 1
    while mp.mpf(4) ** -k > 12 * e / (k * mp.pi**2):
        k += 1
    return k


def k_eps_bound(eps, ctx: PrecisionContext = DEFAULT_CONTEXT) -> int:
    """``ceil((22/43) log2(pi^2 / eps))``."""
    mp = ctx.mp
    e = ctx.real(eps)
    if not 0 < e <= 1:
        raise ValueError("eps must lie in (0, 1]")
    return int(mp.ceil(mp.mpf(22) / 43 * mp.log(mp.pi**2 / e, 2)))


TABLE3 = BudgetPolicy(
    "table3",
    first=lambda e, m, fs, ctx: e / k_eps_exact(e, ctx) / 2,
    later=lambda e, m, ctx: e / k_eps_exact(e, ctx),
    horizon=lambda e, m, ctx: k_eps_exact(e, ctx) - 1,
)
TABLE4_SIGN = BudgetPolicy(
    "table4_sign",
    first=lambda e, m, fs, ctx: e / 2,
    later=lambda e, m, ctx: e / m,
    horizon=lambda e, m, ctx: m,
)
TABLE4_MAJORITY = BudgetPolicy(
    "table4_majority",
    first=lambda e, m, fs, ctx: e / (2 * m),
    later=lambda e, m, ctx: e / m,
    horizon=lambda e, m, ctx: m,
)
POLICIES = {p.name: p for p in (TABLE3, TABLE4_SIGN, TABLE4_MAJORITY)}


def table4_policy(first_stage: str) -> BudgetPolicy:
    return TABLE4_SIGN if first_stage == "triple_sign" else TABLE4_MAJORITY


def _first_counts(first_stage: str, budget, ctx) -> tuple[int, int, int]:
    s = sign_min_n(ctx.mp.pi / 4, budget, ctx)
    if first_stage == "triple_sign":
        return (s, s, s)
    if first_stage == "majority":
        n = majority_bound_n(budget, ctx)
        return (n, n, s)
    raise ValueError(f"first_stage must be one of {FIRST_STAGES}")


def iteration_angle(k: int, ctx: PrecisionContext = DEFAULT_CONTEXT):
    """Worst-case deviation ``pi / 2^(k+1)`` of the shifted angle at iteration ``k``."""
    return ctx.mp.pi / 2 ** (k + 1)


def build_plan(
    eps, m: int, first_stage: str, policy: BudgetPolicy, ctx: PrecisionContext = DEFAULT_CONTEXT
) -> PlanRow:
    """Schedule for ``m`` iterations under ``policy``."""
    e = ctx.real(eps)
    if not 0 < e < 1:
        raise ValueError("eps must lie in (0, 1)")
    if m < 1:
        raise ValueError("m must be positive")
    first = _first_counts(first_stage, policy.first(e, m, first_stage, ctx), ctx)
    horizon = policy.horizon(e, m, ctx)
    later = policy.later(e, m, ctx)
    its = []
    for k in range(2, m + 1):
        angle = iteration_angle(k, ctx)
        if k <= horizon:
            its.append(IterationPlan(k, angle, later, sign_min_n(angle, later, ctx)))
        else:
            its.append(IterationPlan(k, angle, None, 1))
    return PlanRow(e, m, first_stage, policy.name, first, tuple(its))


def n_eps(eps, first_stage: str, ctx: PrecisionContext = DEFAULT_CONTEXT) -> PlanRow:
    """Measurements for iterations ``1 .. k_eps - 1`` with ``eps/k_eps`` per iteration."""
    k = k_eps_exact(eps, ctx)
    return build_plan(eps, max(k - 1, 1), first_stage, TABLE3, ctx)


def n_eps_bound(eps, first_stage: str, ctx: PrecisionContext = DEFAULT_CONTEXT) -> int:
    """Closed-form upper bound on ``n_eps`` (floored), using the exact ``k_eps``."""
    mp = ctx.mp
    e = ctx.real(eps)
    k = k_eps_exact(e, ctx)
    if k < 3:
        raise ValueError("the bound needs k_eps >= 3")
    c = {"triple_sign": 7, "majority": 5}[first_stage]
    value = 7 + k + (c + mp.log(k - 2)) * (mp.log(1 / e, 2) + mp.log(k, 2))
    return int(mp.floor(value))


def m_table_entry(eps, m: int, first_stage: str, ctx: PrecisionContext = DEFAULT_CONTEXT):
    """Table-4 cell: the schedule with ``eps/m`` per iteration, or None past ``k_eps``."""
    if m > k_eps_exact(eps, ctx):
        return None
    return build_plan(eps, m, first_stage, table4_policy(first_stage), ctx)


def planned(eps, m: int, first_stage: str, ctx: PrecisionContext = DEFAULT_CONTEXT) -> PlanRow:
    """Schedule used for an ``m``-bit run.

    Up to ``k_eps`` bits this is the Table-4 schedule; beyond it the
    ``n_eps`` schedule continues with one measurement per extra bit.
    """
    if m <= k_eps_exact(eps, ctx):
        return build_plan(eps, m, first_stage, table4_policy(first_stage), ctx)
    return build_plan(eps, m, first_stage, TABLE3, ctx)


def total_measurements(eps, m: int, first_stage: str, ctx: PrecisionContext = DEFAULT_CONTEXT) -> int:
    return planned(eps, m, first_stage, ctx).total


def single_shot_tail(k: int, m: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> tuple:
    """Failure mass of single-measurement iterations ``k..m`` and its bound ``(pi^2/12) 4^-k``."""
    if not 2 <= k <= m:
        raise ValueError("need 2 <= k <= m")
    mp = ctx.mp
    exact = mp.fsum(mp.sin(mp.pi / 2 ** (j + 2)) ** 2 for j in range(k, m + 1))
    bound = mp.pi**2 / 12 * mp.mpf(4) ** -k
    return exact, bound
