"""Majority-vote sign determination of cos(alpha)."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..numerics import (
    Decision,
    PrecisionContext,
    binom_cdf_float,
    binom_tail_leq,
    guarded_le,
    p_from_angle,
    screen,
)
from .common import MinNReport, SchemeResult, as_ctx, unstable_above


def _check_odd(n: int) -> None:
    if n < 1 or n % 2 == 0:
        raise ValueError(f"sign scheme needs an odd number of samples, got {n}")


def sign_error(n: int, alpha, ctx: PrecisionContext | None = None):
    """Probability that at most half of ``n`` votes are 1 when ``p = p_x(alpha)``."""
    ctx = as_ctx(ctx)
    _check_odd(n)
    a = ctx.real(alpha)
    if not 0 <= a < ctx.mp.pi / 2:
        raise ValueError("sign_error needs alpha in [0, pi/2)")
    return binom_tail_leq(n, (n - 1) // 2, p_from_angle(a, "cos", ctx), ctx)


def sign_bound_n(alpha, eps_bar, ctx: PrecisionContext | None = None):
    """Real-valued sufficient count ``log(1/eps)/log(1/sin(alpha))``; callers round up."""
    ctx = as_ctx(ctx)
    mp = ctx.mp
    a, e = ctx.real(alpha), ctx.real(eps_bar)
    if not 0 < a < mp.pi / 2:
        raise ValueError("sign_bound_n needs alpha in (0, pi/2)")
    if not 0 < e < 1:
        raise ValueError("sign_bound_n needs eps_bar in (0, 1)")
    return mp.log(1 / e) / mp.log(1 / mp.sin(a))


def _odd_ceil(x) -> int:
    n = max(int(np.ceil(float(x))), 1)
    return n if n % 2 else n + 1


@lru_cache(maxsize=4096)
def _decide(n: int, alpha, eps_bar, bits: int) -> Decision:
    ctx = PrecisionContext(bits)
    p = float(p_from_angle(alpha, "cos", ctx))
    value = float(binom_cdf_float((n - 1) // 2, n, p))
    verdict = screen(value, float(eps_bar))
    if verdict is None:
        return guarded_le(lambda c: sign_error(n, alpha, c), eps_bar, ctx)
    return Decision(bool(verdict), ctx.real(value), ctx.real(eps_bar), bits)


def sign_min_n_report(alpha, eps_bar, ctx: PrecisionContext | None = None) -> MinNReport:
    ctx = as_ctx(ctx)
    mp = ctx.mp
    a, e = ctx.real(alpha), ctx.real(eps_bar)
    if not 0 < a < mp.pi / 2:
        raise ValueError("sign_min_n needs alpha in (0, pi/2)")
    if not 0 < e < 1:
        raise ValueError("sign_min_n needs eps_bar in (0, 1)")
    # the Chernoff count always suffices, so the scan is bounded by it
    ceiling = _odd_ceil(sign_bound_n(a, e, ctx)) + 2
    p = float(p_from_angle(a, "cos", ctx))
    ns = np.arange(1, ceiling + 1, 2)
    errs = binom_cdf_float((ns - 1) // 2, ns, p)
    thr = float(e)
    for n, err in zip(ns.tolist(), np.atleast_1d(errs).tolist()):
        verdict = screen(err, thr)
        if verdict == 0:
            continue
        d = _decide(n, a, e, ctx.bits)
        if d.holds:
            result = SchemeResult(n, sign_error(n, a, ctx), float(a), "point")
            unstable = unstable_above(lambda m: _decide(m, a, e, ctx.bits), n, step=2)
            return MinNReport(n, e, result, d, unstable)
    raise RuntimeError("sign_min_n scan exceeded the Chernoff ceiling")  # pragma: no cover


def sign_min_n(alpha, eps_bar, ctx: PrecisionContext | None = None) -> int:
    """Smallest odd ``n`` with ``sign_error(n, alpha) <= eps_bar``."""
    return sign_min_n_report(alpha, eps_bar, ctx).n
