"""Box-based cosine (and joint sine/cosine) estimation.

A count ``k`` out of ``n`` is accepted when ``|k/n - p| <= delta/2``.  The
error ``1 - Pr(K_{n,delta}(p))`` is piecewise smooth in ``p`` with jumps at
the breakpoints ``k/n +- delta/2``; its supremum is found among the one-sided
limits at those breakpoints.

Breakpoint bookkeeping is symbolic: a breakpoint is the pair ``(k, s)`` with
``p = k/n + s*delta/2`` and the only irrational quantity involved is
``D = delta*n``, whose floor and integrality are settled once in mpmath.
Probabilities are screened in float64 and any near-threshold decision is
redone at full precision.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..numerics import (
    Decision,
    PrecisionContext,
    SCREEN_RTOL,
    SuccessSet1D,
    binom_cdf_float,
    binom_pmf_row,
    binom_sf_float,
    guarded_le,
    is_integer,
    screen,
)
from .common import MinNReport, SchemeResult, as_ctx, unstable_above

UNVERIFIED = "unverified-convexity"


def delta_of_eta(eta, ctx: PrecisionContext | None = None):
    """Largest per-component deviation ``sin(eta)/sqrt(2)`` that keeps the angle within ``eta``."""
    ctx = as_ctx(ctx)
    mp = ctx.mp
    e = ctx.real(eta)
    if not 0 <= e <= mp.pi / 2 * (1 + ctx.guard):
        raise ValueError("delta_of_eta needs 0 <= eta <= pi/2")
    return mp.sin(e) / mp.sqrt(2)


def convexity_threshold(delta) -> float:
    """Smallest ``n`` covered by the piecewise-convexity guarantee."""
    d = float(delta)
    return max(1 + 1 / d**2, 3.0)


def _bounds_at(n: int, delta, p, ctx: PrecisionContext) -> tuple[int, int]:
    mp = ctx.mp
    x = (p - delta / 2) * n
    y = (p + delta / 2) * n
    lo = int(mp.nint(x)) if is_integer(x, ctx) else int(mp.ceil(x))
    hi = int(mp.nint(y)) if is_integer(y, ctx) else int(mp.floor(y))
    return max(lo, 0), min(hi, n)


def box_success_set(n: int, delta, p, ctx: PrecisionContext | None = None) -> SuccessSet1D:
    """All ``k`` in ``[0, n]`` with ``(p - delta/2) n <= k <= (p + delta/2) n``."""
    ctx = as_ctx(ctx)
    delta, p = ctx.real(delta), ctx.real(p)
    if delta <= 0:
        raise ValueError("delta must be positive")
    lo, hi = _bounds_at(n, delta, p, ctx)
    return SuccessSet1D.interval(n, lo, hi)


@dataclass(frozen=True)
class _Geometry:
    """Integer data fixing every breakpoint's one-sided limit sets."""

    n: int
    D_floor: int
    D_int: bool
    half_floor: int  # floor(D/2)
    half_int: bool


@lru_cache(maxsize=4096)
def _geometry(n: int, delta, bits: int) -> _Geometry:
    ctx = PrecisionContext(bits)
    mp = ctx.mp
    D = delta * n
    D_int = is_integer(D, ctx)
    half = D / 2
    half_int = is_integer(half, ctx)
    return _Geometry(
        n,
        int(mp.nint(D)) if D_int else int(mp.floor(D)),
        D_int,
        int(mp.nint(half)) if half_int else int(mp.floor(half)),
        half_int,
    )


def _breakpoint_keys(g: _Geometry) -> tuple[np.ndarray, np.ndarray]:
    """``(k, s)`` of every breakpoint in ``[0, 1]``.

    ``k/n + delta/2 <= 1`` iff ``D/2 <= n - k``; the mirror condition holds
    for ``s = -1``.
    """
    n = g.n
    ks = np.arange(n + 1)
    # D/2 <= m for integer m  <=>  floor(D/2) <= m, with equality only if D/2 is integral
    fits = (g.half_floor < n - ks) | ((g.half_floor == n - ks) & g.half_int)
    plus = ks[fits]
    fits = (g.half_floor < ks) | ((g.half_floor == ks) & g.half_int)
    minus = ks[fits]
    k = np.concatenate([plus, minus])
    s = np.concatenate([np.ones_like(plus), -np.ones_like(minus)])
    return k, s


def _limit_bounds(g: _Geometry, k: np.ndarray, s: np.ndarray, direction: np.ndarray):
    """Interval ``[lo, hi]`` of the success set as ``p`` approaches breakpoint ``(k, s)``.

    ``direction`` is -1 for the limit from below and +1 from above.
    """
    n = g.n
    below = direction < 0
    plus = s > 0
    # s = +1: x = k exactly, y = k + D
    lo_plus = np.where(below, k, k + 1)
    if g.D_int:
        hi_plus = np.where(below, k + g.D_floor - 1, k + g.D_floor)
        lo_minus = np.where(below, k - g.D_floor, k - g.D_floor + 1)
    else:
        hi_plus = k + g.D_floor
        lo_minus = k - g.D_floor
    # s = -1: y = k exactly, x = k - D
    hi_minus = np.where(below, k - 1, k)
    lo = np.where(plus, lo_plus, lo_minus)
    hi = np.where(plus, hi_plus, hi_minus)
    return np.clip(lo, 0, n), np.clip(hi, -1, n)


def _error_float(n: int, lo, hi, p) -> np.ndarray:
    lo, hi, p = np.broadcast_arrays(np.asarray(lo), np.asarray(hi), np.asarray(p, dtype=float))
    err = binom_cdf_float(lo - 1, n, p) + binom_sf_float(hi, n, p)
    return np.where(lo > hi, 1.0, err)


def _error_mp(n: int, lo: int, hi: int, p, ctx: PrecisionContext):
    mp = ctx.mp
    if lo > hi:
        return mp.one
    pmf = binom_pmf_row(n, p, ctx)
    return mp.fsum(pmf[:lo]) + mp.fsum(pmf[hi + 1 :])


@dataclass(frozen=True)
class _Sweep:
    """Every candidate for the supremum of the box error at fixed ``(n, delta)``."""

    k: np.ndarray  # -1 for the domain endpoints and for dense-grid points
    s: np.ndarray
    side: np.ndarray  # -1 left limit, +1 right limit, 0 point value
    p: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    err: np.ndarray
    flags: frozenset


def _breakpoint_p(k, s, n, delta, ctx: PrecisionContext):
    return ctx.mp.mpf(int(k)) / n + int(s) * delta / 2


@lru_cache(maxsize=8192)
def _sweep(n: int, delta, bits: int) -> _Sweep:
    ctx = PrecisionContext(bits)
    g = _geometry(n, delta, bits)
    df = float(delta)
    k, s = _breakpoint_keys(g)
    pf = k / n + s * df / 2
    # p = 0 and p = 1 only have an inward limit
    keep_left = pf > 0
    keep_right = pf < 1
    ks = np.concatenate([k[keep_left], k[keep_right]])
    ss = np.concatenate([s[keep_left], s[keep_right]])
    side = np.concatenate([-np.ones(keep_left.sum(), int), np.ones(keep_right.sum(), int)])
    ps = np.clip(ks / n + ss * df / 2, 0.0, 1.0)
    lo, hi = _limit_bounds(g, ks, ss, side)

    # domain endpoints as point values
    lo0, hi0 = _bounds_at(n, delta, ctx.mp.zero, ctx)
    lo1, hi1 = _bounds_at(n, delta, ctx.mp.one, ctx)
    ks = np.concatenate([ks, [-1, -1]])
    ss = np.concatenate([ss, [0, 0]])
    side = np.concatenate([side, [0, 0]])
    ps = np.concatenate([ps, [0.0, 1.0]])
    lo = np.concatenate([lo, [lo0, lo1]])
    hi = np.concatenate([hi, [hi0, hi1]])

    flags = frozenset()
    if n < convexity_threshold(delta):
        flags = frozenset({UNVERIFIED})
        edges = np.unique(np.concatenate([[0.0, 1.0], np.clip(pf, 0.0, 1.0)]))
        grid = [np.linspace(a, b, 4 * n + 3)[1:-1] for a, b in zip(edges[:-1], edges[1:]) if b > a]
        if grid:
            gp = np.concatenate(grid)
            glo = np.clip(np.ceil((gp - df / 2) * n), 0, n).astype(int)
            ghi = np.clip(np.floor((gp + df / 2) * n), -1, n).astype(int)
            ks = np.concatenate([ks, -np.ones(len(gp), int)])
            ss = np.concatenate([ss, np.zeros(len(gp), int)])
            side = np.concatenate([side, np.zeros(len(gp), int)])
            ps = np.concatenate([ps, gp])
            lo = np.concatenate([lo, glo])
            hi = np.concatenate([hi, ghi])
    err = _error_float(n, lo, hi, ps)
    return _Sweep(ks, ss, side, ps, lo, hi, err, flags)


def _candidate_p(sw: _Sweep, i: int, n: int, delta, ctx: PrecisionContext):
    if sw.k[i] >= 0:
        return _breakpoint_p(sw.k[i], sw.s[i], n, delta, ctx)
    return ctx.real(float(sw.p[i]))


def _candidate_error_mp(sw: _Sweep, i: int, n: int, delta, ctx: PrecisionContext):
    p = _candidate_p(sw, i, n, ctx.real(delta), ctx)
    return _error_mp(n, int(sw.lo[i]), int(sw.hi[i]), p, ctx)


_SIDE_NAMES = {-1: "left", 0: "point", 1: "right"}


def box_breakpoints(n: int, delta, ctx: PrecisionContext | None = None) -> list:
    """Sorted distinct values ``k/n +- delta/2`` that fall in ``[0, 1]``."""
    ctx = as_ctx(ctx)
    delta = ctx.real(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    g = _geometry(n, delta, ctx.bits)
    k, s = _breakpoint_keys(g)
    values = sorted(_breakpoint_p(a, b, n, delta, ctx) for a, b in zip(k, s))
    out: list = []
    for v in values:
        if not out or abs(v - out[-1]) > ctx.guard:
            out.append(v)
    return out


def box_error(n: int, delta, p, ctx: PrecisionContext | None = None):
    """Point value ``1 - Pr(K_{n,delta}(p))``."""
    ctx = as_ctx(ctx)
    delta, p = ctx.real(delta), ctx.real(p)
    lo, hi = _bounds_at(n, delta, p, ctx)
    return _error_mp(n, lo, hi, p, ctx)


def box_worst_error(
    n: int, delta, ctx: PrecisionContext | None = None, exact: bool = False
) -> SchemeResult:
    """Supremum over ``p in [0, 1]`` of the box error.

    ``exact=True`` evaluates every candidate in mpmath instead of screening
    in float64 first.
    """
    ctx = as_ctx(ctx)
    delta = ctx.real(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    sw = _sweep(n, delta, ctx.bits)
    if exact:
        idx = range(len(sw.err))
    else:
        top = sw.err.max()
        idx = np.nonzero(sw.err >= top * (1 - 1e3 * SCREEN_RTOL))[0]
    best, best_i = None, -1
    for i in idx:
        v = _candidate_error_mp(sw, int(i), n, delta, ctx)
        if best is None or v > best:
            best, best_i = v, int(i)
    return SchemeResult(
        n,
        best,
        float(sw.p[best_i]),
        _SIDE_NAMES[int(sw.side[best_i])],
        sw.flags,
        len(sw.err),
    )


def _decide_sweep(
    err: np.ndarray, eps_bar, ctx: PrecisionContext, evaluate_mp
) -> tuple[Decision, int]:
    """Certify ``max(err) <= eps_bar`` using float screening plus mpmath on ambiguous entries."""
    thr = float(eps_bar)
    worst = int(np.argmax(err))
    if err[worst] > thr * (1 + SCREEN_RTOL):
        return Decision(False, ctx.real(float(err[worst])), ctx.real(eps_bar), ctx.bits), worst
    ambiguous = np.nonzero(err >= thr * (1 - SCREEN_RTOL))[0]
    best = None
    for i in ambiguous:
        d = guarded_le(lambda c, i=int(i): evaluate_mp(i, c), eps_bar, ctx)
        if not d.holds:
            return d, int(i)
        if best is None or d.value > best.value:
            best = d
    if best is not None:
        return best, worst
    return Decision(True, ctx.real(float(err[worst])), ctx.real(eps_bar), ctx.bits), worst


@lru_cache(maxsize=8192)
def _box_decide(n: int, delta, eps_bar, bits: int) -> Decision:
    ctx = PrecisionContext(bits)
    sw = _sweep(n, delta, bits)
    d, _ = _decide_sweep(sw.err, eps_bar, ctx, lambda i, c: _candidate_error_mp(sw, i, n, delta, c))
    return d


def box_min_n_report(
    delta, eps_bar, ctx: PrecisionContext | None = None, limit: int = 20_000
) -> MinNReport:
    ctx = as_ctx(ctx)
    delta, eps_bar = ctx.real(delta), ctx.real(eps_bar)
    if delta <= 0:
        raise ValueError("delta must be positive")
    if not 0 < eps_bar < 1:
        raise ValueError("eps_bar must lie in (0, 1)")
    for n in range(1, limit + 1):
        sw = _sweep(n, delta, ctx.bits)
        if screen(float(sw.err.max()), float(eps_bar)) == 0:
            continue
        d = _box_decide(n, delta, eps_bar, ctx.bits)
        if d.holds:
            unstable = unstable_above(lambda m: _box_decide(m, delta, eps_bar, ctx.bits), n)
            return MinNReport(n, eps_bar, box_worst_error(n, delta, ctx), d, unstable)
    raise RuntimeError(f"box_min_n found no n <= {limit}")


def box_min_n(delta, eps_bar, ctx: PrecisionContext | None = None) -> int:
    """First ``n`` (scanning upward from 1) whose worst-case box error is ``<= eps_bar``."""
    return box_min_n_report(delta, eps_bar, ctx).n


# ---------------------------------------------------------------------------
# joint sine and cosine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _JointSweep:
    alpha: np.ndarray
    side: np.ndarray
    lo_x: np.ndarray
    hi_x: np.ndarray
    lo_y: np.ndarray
    hi_y: np.ndarray
    px: np.ndarray
    py: np.ndarray
    err: np.ndarray
    # symbolic origin, for mpmath re-evaluation: component (0 = x, 1 = y), k, s
    comp: np.ndarray
    k: np.ndarray
    s: np.ndarray


def _generic_bounds(n, delta, p_float, direction, p_mp_fn, ctx):
    """Bounds for a component that is generically not at a breakpoint.

    Near-integral endpoints are re-derived in mpmath from ``p_mp_fn(i)``.
    """
    df = float(delta)
    x = (p_float - df / 2) * n
    y = (p_float + df / 2) * n
    lo = np.ceil(x).astype(int)
    hi = np.floor(y).astype(int)
    near = (np.abs(x - np.rint(x)) < 1e-7) | (np.abs(y - np.rint(y)) < 1e-7)
    mp = ctx.mp
    for i in np.nonzero(near)[0]:
        p = p_mp_fn(int(i))
        xm = (p - delta / 2) * n
        ym = (p + delta / 2) * n
        d = int(direction[i])
        if is_integer(xm, ctx):
            lo[i] = int(mp.nint(xm)) + (1 if d > 0 else 0)
        else:
            lo[i] = int(mp.ceil(xm))
        if is_integer(ym, ctx):
            hi[i] = int(mp.nint(ym)) - (1 if d < 0 else 0)
        else:
            hi[i] = int(mp.floor(ym))
    return np.clip(lo, 0, n), np.clip(hi, -1, n)


@lru_cache(maxsize=4096)
def _joint_sweep(n: int, delta, bits: int) -> _JointSweep:
    """Critical angles in ``[0, pi/4]``; the joint error has the square's 8-fold symmetry."""
    ctx = PrecisionContext(bits)
    mp = ctx.mp
    g = _geometry(n, delta, bits)
    df = float(delta)
    k, s = _breakpoint_keys(g)
    b = k / n + s * df / 2
    edge = (1 + np.sqrt(0.5)) / 2  # p at pi/4
    # x-critical: p_x = b on [edge, 1], alpha = acos(2b - 1); p_x decreases in alpha
    mx = b >= edge - 1e-12
    # y-critical: p_y = b on [1/2, edge], alpha = asin(2b - 1); p_y increases in alpha
    my = (b >= 0.5 - 1e-12) & (b <= edge + 1e-12)
    comp = np.concatenate([np.zeros(mx.sum(), int), np.ones(my.sum(), int)])
    kk = np.concatenate([k[mx], k[my]])
    ss = np.concatenate([s[mx], s[my]])
    alpha = np.concatenate(
        [np.arccos(np.clip(2 * b[mx] - 1, -1, 1)), np.arcsin(np.clip(2 * b[my] - 1, -1, 1))]
    )
    # both one-sided limits in alpha, plus the symmetric endpoints as point values
    comp = np.concatenate([comp, comp, [-1, -1]])
    kk = np.concatenate([kk, kk, [-1, -1]])
    ss = np.concatenate([ss, ss, [0, 0]])
    side = np.concatenate([-np.ones(len(alpha), int), np.ones(len(alpha), int), [0, 0]])
    alpha = np.concatenate([alpha, alpha, [0.0, np.pi / 4]])
    inside = (alpha >= -1e-15) & (alpha <= np.pi / 4 + 1e-15)
    comp, kk, ss, side, alpha = comp[inside], kk[inside], ss[inside], side[inside], alpha[inside]
    px = (1 + np.cos(alpha)) / 2
    py = (1 + np.sin(alpha)) / 2

    def alpha_mp(i: int):
        if comp[i] < 0:
            return mp.zero if alpha[i] == 0 else mp.pi / 4
        bm = _breakpoint_p(kk[i], ss[i], n, delta, ctx)
        return mp.acos(2 * bm - 1) if comp[i] == 0 else mp.asin(2 * bm - 1)

    lo_x = np.empty(len(alpha), int)
    hi_x = np.empty(len(alpha), int)
    lo_y = np.empty(len(alpha), int)
    hi_y = np.empty(len(alpha), int)
    xs = comp == 0
    ys = comp == 1
    # alpha-left means p_x from above and p_y from below
    if xs.any():
        lo_x[xs], hi_x[xs] = _limit_bounds(g, kk[xs], ss[xs], -side[xs])
    if ys.any():
        lo_y[ys], hi_y[ys] = _limit_bounds(g, kk[ys], ss[ys], side[ys])
    gx = ~xs
    gy = ~ys
    idx_gx = np.nonzero(gx)[0]
    idx_gy = np.nonzero(gy)[0]
    lo_x[gx], hi_x[gx] = _generic_bounds(
        n, delta, px[gx], -side[gx],
        lambda j: (1 + mp.cos(alpha_mp(int(idx_gx[j])))) / 2, ctx,
    )
    lo_y[gy], hi_y[gy] = _generic_bounds(
        n, delta, py[gy], side[gy],
        lambda j: (1 + mp.sin(alpha_mp(int(idx_gy[j])))) / 2, ctx,
    )
    ex = _error_float(n, lo_x, hi_x, px)
    ey = _error_float(n, lo_y, hi_y, py)
    err = ex + ey - ex * ey
    return _JointSweep(alpha, side, lo_x, hi_x, lo_y, hi_y, px, py, err, comp, kk, ss)


def _joint_error_mp(sw: _JointSweep, i: int, n: int, delta, ctx: PrecisionContext):
    mp = ctx.mp
    delta = ctx.real(delta)
    if sw.comp[i] < 0:
        a = mp.zero if sw.alpha[i] == 0 else mp.pi / 4
        px, py = (1 + mp.cos(a)) / 2, (1 + mp.sin(a)) / 2
    else:
        b = _breakpoint_p(sw.k[i], sw.s[i], n, delta, ctx)
        other = (1 + mp.sqrt(1 - (2 * b - 1) ** 2)) / 2
        px, py = (b, other) if sw.comp[i] == 0 else (other, b)
    ex = _error_mp(n, int(sw.lo_x[i]), int(sw.hi_x[i]), px, ctx)
    ey = _error_mp(n, int(sw.lo_y[i]), int(sw.hi_y[i]), py, ctx)
    return ex + ey - ex * ey


def box_joint_error(n: int, delta, alpha, ctx: PrecisionContext | None = None):
    """Point value ``1 - Pr(K_x) Pr(K_y)`` at angle ``alpha`` (radians)."""
    ctx = as_ctx(ctx)
    a = ctx.real(alpha)
    mp = ctx.mp
    ex = box_error(n, delta, (1 + mp.cos(a)) / 2, ctx)
    ey = box_error(n, delta, (1 + mp.sin(a)) / 2, ctx)
    return ex + ey - ex * ey


def box_joint_worst_error(
    n: int, delta, ctx: PrecisionContext | None = None, exact: bool = False
) -> SchemeResult:
    """Supremum over ``alpha`` of ``1 - Pr(K_x(alpha)) Pr(K_y(alpha))``.

    Both components use the same ``n``; the witness is reported in
    ``[0, pi/4]``, the other seven octants being mirror images.
    """
    ctx = as_ctx(ctx)
    delta = ctx.real(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    sw = _joint_sweep(n, delta, ctx.bits)
    if exact:
        idx = range(len(sw.err))
    else:
        idx = np.nonzero(sw.err >= sw.err.max() * (1 - 1e3 * SCREEN_RTOL))[0]
    best, best_i = None, -1
    for i in idx:
        v = _joint_error_mp(sw, int(i), n, delta, ctx)
        if best is None or v > best:
            best, best_i = v, int(i)
    flags = frozenset({UNVERIFIED}) if n < convexity_threshold(delta) else frozenset()
    return SchemeResult(
        n, best, float(sw.alpha[best_i]), _SIDE_NAMES[int(sw.side[best_i])], flags, len(sw.err)
    )


@lru_cache(maxsize=8192)
def _joint_decide(n: int, delta, eps_bar, bits: int) -> Decision:
    ctx = PrecisionContext(bits)
    sw = _joint_sweep(n, delta, bits)
    d, _ = _decide_sweep(sw.err, eps_bar, ctx, lambda i, c: _joint_error_mp(sw, i, n, delta, c))
    return d


def box_joint_min_n_report(
    delta, eps_bar, ctx: PrecisionContext | None = None, limit: int = 20_000
) -> MinNReport:
    ctx = as_ctx(ctx)
    delta, eps_bar = ctx.real(delta), ctx.real(eps_bar)
    for n in range(1, limit + 1):
        sw = _joint_sweep(n, delta, ctx.bits)
        if screen(float(sw.err.max()), float(eps_bar)) == 0:
            continue
        d = _joint_decide(n, delta, eps_bar, ctx.bits)
        if d.holds:
            unstable = unstable_above(lambda m: _joint_decide(m, delta, eps_bar, ctx.bits), n)
            return MinNReport(n, eps_bar, box_joint_worst_error(n, delta, ctx), d, unstable)
    raise RuntimeError(f"box_joint_min_n found no n <= {limit}")


def box_joint_min_n(delta, eps_bar, ctx: PrecisionContext | None = None) -> int:
    return box_joint_min_n_report(delta, eps_bar, ctx).n


def box_jumps(n: int, delta, ctx: PrecisionContext | None = None) -> list[tuple]:
    """``(p, left limit, right limit)`` of the error at every breakpoint inside ``(0, 1)``."""
    ctx = as_ctx(ctx)
    delta = ctx.real(delta)
    g = _geometry(n, delta, ctx.bits)
    k, s = _breakpoint_keys(g)
    out = {}
    for kk, ss in zip(k.tolist(), s.tolist()):
        p = _breakpoint_p(kk, ss, n, delta, ctx)
        if not 0 < p < 1:
            continue
        arr_k, arr_s = np.array([kk, kk]), np.array([ss, ss])
        lo, hi = _limit_bounds(g, arr_k, arr_s, np.array([-1, 1]))
        left = _error_mp(n, int(lo[0]), int(hi[0]), p, ctx)
        right = _error_mp(n, int(lo[1]), int(hi[1]), p, ctx)
        out.setdefault(float(p), (p, left, right))
    return [out[key] for key in sorted(out)]
