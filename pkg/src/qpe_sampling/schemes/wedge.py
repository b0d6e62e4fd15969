"""Wedge-based joint sine/cosine estimation.

The pair of counts ``(k_x, k_y)`` is accepted when its direction seen from
the grid center ``(n/2, n/2)`` lies within ``eta`` of the true angle.  Work is
done in doubled coordinates ``X = 2 k_x - n``, ``Y = 2 k_y - n`` so the center
is the origin and every grid point is an integer vector.

A wedge is the intersection of two half-planes bounded by its edge
directions ``u`` (lower, at ``alpha - eta``) and ``v`` (upper, at
``alpha + eta``).  Restricted to one column ``X`` each half-plane is a ray in
``Y``, so the success set is an interval per column and the success
probability is a sum of binomial tails.  When ``2 eta`` is a multiple of
``pi/4`` the edge through a grid point can be rotated exactly in integers,
which makes boundary membership at critical angles exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gcd

import numpy as np

from ..numerics import (
    Decision,
    PrecisionContext,
    SCREEN_RTOL,
    SuccessSet2D,
    binom_pmf_matrix,
    binom_pmf_row,
    guarded_le,
    is_integer,
    p_from_angle,
)
from .common import MinNReport, SchemeResult, as_ctx, unstable_above

_TOL = 1e-9
_CHUNK = 2048
_OCTANT = np.pi / 4


@dataclass(frozen=True)
class WedgeGeometry:
    """Sample count ``n`` and half-width ``eta`` (radians, ``0 < eta <= pi/2``)."""

    n: int
    eta: object

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be positive")
        eta = float(self.eta)
        if not 0 < eta <= np.pi / 2 + 1e-15:
            raise ValueError("eta must lie in (0, pi/2]")

    @property
    def center(self) -> tuple[float, float]:
        return (self.n / 2, self.n / 2)


def _octant_multiple(angle, ctx: PrecisionContext) -> int | None:
    """``m`` if ``angle`` equals ``m * pi/4`` (to the context guard), else None."""
    q = ctx.real(angle) / (ctx.mp.pi / 4)
    return int(ctx.mp.nint(q)) if is_integer(q, ctx) else None


def _rotate_int(x: int, y: int, m: int) -> tuple[int, int]:
    """Integer vector along ``(x, y)`` rotated by ``m * pi/4`` (scaled by sqrt(2) for odd m)."""
    for _ in range(m % 8):
        x, y = x - y, x + y
        g = gcd(abs(x), abs(y)) or 1
        x, y = x // g, y // g
    return x, y


_UNIT = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]


@dataclass(frozen=True)
class _Spec:
    """Recipe for one candidate evaluation; enough to redo it in mpmath."""

    kind: int  # +1: grid point on the lower edge, -1: on the upper edge, 0: fixed angle
    gx: int
    gy: int
    side: int  # -1 left limit, +1 right limit, 0 point value


def _alpha_mp(spec: _Spec, eta, ctx: PrecisionContext):
    mp = ctx.mp
    if spec.kind == 0:
        return ctx.real(spec.gx) * mp.pi / 4  # gx holds the octant index here
    return mp.atan2(spec.gy, spec.gx) + spec.kind * eta


def _edges(spec: _Spec, eta, m2: int | None, ctx: PrecisionContext):
    """Edge vectors ``(u, v)``: exact integers when possible, else float unit vectors."""
    if spec.kind == 0:
        m_eta = _octant_multiple(eta, ctx)
        base = spec.gx
        if m_eta is not None:
            return _UNIT[(base - m_eta) % 8], _UNIT[(base + m_eta) % 8]
        a = float(ctx.mp.pi / 4 * base)
        e = float(eta)
        return (np.cos(a - e), np.sin(a - e)), (np.cos(a + e), np.sin(a + e))
    g = (spec.gx, spec.gy)
    if m2 is not None:
        other = _rotate_int(g[0], g[1], spec.kind * m2)
    else:
        th = float(ctx.mp.atan2(spec.gy, spec.gx) + spec.kind * 2 * eta)
        other = (np.cos(th), np.sin(th))
    return (g, other) if spec.kind > 0 else (other, g)


def _column_bounds(n, X, u, v, side, half_plane):
    """Per-column ``k_y`` interval of the wedge (arrays over a batch of candidates).

    ``X`` has shape (C,), ``u``/``v``/``side``/``half_plane`` shape (B,) or (B, 2).
    Returns ``lo, hi`` of shape (B, C) and the inclusion of the two rays of
    column ``X = 0`` as ``up, down`` of shape (B,).
    """
    ux, uy = u[:, :1], u[:, 1:]
    vx, vy = v[:, :1], v[:, 1:]
    side = side[:, None]
    hp = half_plane[:, None]
    Xr = X[None, :]
    strict1 = side > 0
    strict2 = side < 0
    # half-plane: line points are on the lower ray iff X*ux > 0
    line_lower = Xr * ux > 0
    strict_hp = (strict1 & line_lower) | (strict2 & ~line_lower)
    s1 = np.where(hp, strict_hp, strict1)

    lo = np.zeros((len(u), len(X)), dtype=np.int64)
    hi = np.full((len(u), len(X)), n, dtype=np.int64)

    def apply(a, b, strict):
        nonlocal lo, hi
        a = np.broadcast_to(a, lo.shape)
        b = np.broadcast_to(b, lo.shape)
        strict = np.broadcast_to(strict, lo.shape)
        az = np.abs(a) < _TOL
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (b + a * n) / (2 * a)
            r = np.rint(t)
            on = np.abs(t - r) < _TOL
            fl = np.where(on, r, np.floor(t))
            ce = np.where(on, r, np.ceil(t))
        lower = np.where(on & strict, r + 1, ce)
        upper = np.where(on & strict, r - 1, fl)
        pos = (a > 0) & ~az
        neg = (a < 0) & ~az
        lo = np.where(pos, np.maximum(lo, np.clip(lower, -1, n + 1)), lo).astype(np.int64)
        hi = np.where(neg, np.minimum(hi, np.clip(upper, -1, n + 1)), hi).astype(np.int64)
        bz = np.abs(b) < _TOL
        fails = az & ((b > 0) & ~bz | (bz & strict))
        hi = np.where(fails, -1, hi)

    # c1 = ux*Y - uy*X >= 0
    apply(ux, uy * Xr, s1)
    # c2 = X*vy - Y*vx >= 0 (identical to c1 in the half-plane case)
    apply(-vx, -Xr * vy, np.where(hp, s1, strict2))

    def ray(dy):
        c1 = ux[:, 0] * dy
        c2 = -dy * vx[:, 0]
        z1 = np.abs(c1) < _TOL
        z2 = np.abs(c2) < _TOL
        cone = ((c1 > 0) | (z1 & ~strict1[:, 0])) & ((c2 > 0) | (z2 & ~strict2[:, 0]))
        # half-plane: on the line the ray is lower iff it points along u
        along_u = uy[:, 0] * dy > 0
        on_line_ok = np.where(along_u, ~strict1[:, 0], ~strict2[:, 0])
        plane = np.where(z1, on_line_ok, c1 > 0)
        return np.where(half_plane, plane, cone)

    return lo, hi, ray(1.0), ray(-1.0)


def _edge_arrays(cand: "_Candidates", idx: np.ndarray, eta, m2, ctx: PrecisionContext):
    """Vectorized :func:`_edges` over the candidates ``idx``."""
    kind = cand.kind[idx]
    gx = cand.gx[idx].astype(float)
    gy = cand.gy[idx].astype(float)
    if m2 is not None:
        ox, oy = gx.copy(), gy.copy()
        turns = (kind * m2) % 8
        for step in range(1, 8):
            sel = turns >= step
            ox[sel], oy[sel] = ox[sel] - oy[sel], ox[sel] + oy[sel]
    else:
        th = np.arctan2(gy, gx) + kind * 2 * float(eta)
        ox, oy = np.cos(th), np.sin(th)
    lower = (kind > 0)[:, None]
    g = np.stack([gx, gy], axis=1)
    o = np.stack([ox, oy], axis=1)
    u = np.where(lower, g, o)
    v = np.where(lower, o, g)
    for i in np.nonzero(kind == 0)[0]:
        u[i], v[i] = _edges(cand.spec(int(idx[i])), eta, m2, ctx)
    return u, v


def _batch_error(n: int, cand: "_Candidates", idx: np.ndarray, eta, m2, ctx: PrecisionContext) -> np.ndarray:
    X = 2 * np.arange(n + 1) - n
    alpha = cand.alpha[idx]
    u, v = _edge_arrays(cand, idx, eta, m2, ctx)
    half_plane = np.full(len(idx), m2 == 4)
    lo, hi, up, down = _column_bounds(n, X, u, v, cand.side[idx], half_plane)
    px = (1 + np.cos(alpha)) / 2
    py = (1 + np.sin(alpha)) / 2
    pmf_x = binom_pmf_matrix(n, px)
    pmf_y = binom_pmf_matrix(n, py)
    zeros = np.zeros((len(idx), 1))
    cdf = np.concatenate([zeros, np.cumsum(pmf_y, axis=1)], axis=1)  # cdf[:, j] = P(K <= j-1)
    sf = np.concatenate([np.cumsum(pmf_y[:, ::-1], axis=1)[:, ::-1], zeros], axis=1)  # P(K >= j)
    lo_c = np.clip(lo, 0, n + 1)
    hi_c = np.clip(hi, -1, n)
    rows = np.arange(len(idx))[:, None]
    col_err = cdf[rows, lo_c] + sf[rows, hi_c + 1]
    col_err = np.where(lo_c > hi_c, 1.0, col_err)
    if n % 2 == 0:
        c = n // 2
        above = sf[:, c + 1]
        below = cdf[:, c]
        col_err[:, c] = 1 - np.where(up, above, 0) - np.where(down, below, 0)
    return np.einsum("ij,ij->i", pmf_x, col_err)


def _member_mask(n: int, spec: _Spec, eta, m2, ctx: PrecisionContext) -> np.ndarray:
    """Boolean (n+1, n+1) membership indexed ``[k_x, k_y]`` for one candidate."""
    X = 2 * np.arange(n + 1) - n
    u, v = _edges(spec, eta, m2, ctx)
    lo, hi, up, down = _column_bounds(
        n, X, np.array([u], float), np.array([v], float),
        np.array([spec.side]), np.array([m2 == 4]),
    )
    ky = np.arange(n + 1)
    mask = (ky[None, :] >= lo[0][:, None]) & (ky[None, :] <= hi[0][:, None])
    if n % 2 == 0:
        c = n // 2
        mask[c] = ((ky > c) & up[0]) | ((ky < c) & down[0])
    return mask


def _error_mp(n: int, spec: _Spec, eta, m2, ctx: PrecisionContext):
    mp = ctx.mp
    mask = _member_mask(n, spec, eta, m2, ctx)
    a = _alpha_mp(spec, ctx.real(eta), ctx)
    px = binom_pmf_row(n, p_from_angle(a, "cos", ctx), ctx)
    py = binom_pmf_row(n, p_from_angle(a, "sin", ctx), ctx)
    # summing the failures keeps small errors accurate
    total = mp.zero
    for kx in range(n + 1):
        row = mask[kx]
        if row.all():
            continue
        total += px[kx] * mp.fsum(py[ky] for ky in range(n + 1) if not row[ky])
    return total


@dataclass(frozen=True)
class _Candidates:
    """Critical angles in ``[0, pi/4]`` as parallel arrays (see :class:`_Spec`)."""

    kind: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    side: np.ndarray
    alpha: np.ndarray

    def __len__(self) -> int:
        return len(self.kind)

    def spec(self, i: int) -> _Spec:
        return _Spec(int(self.kind[i]), int(self.gx[i]), int(self.gy[i]), int(self.side[i]))


@lru_cache(maxsize=512)
def _candidates(n: int, eta) -> _Candidates:
    eta_f = float(eta)
    X = 2 * np.arange(n + 1) - n
    gx, gy = np.meshgrid(X, X, indexing="ij")
    gx, gy = gx.ravel(), gy.ravel()
    keep = (gx != 0) | (gy != 0)
    gx, gy = gx[keep], gy[keep]
    g = np.gcd(gx, gy)
    # one representative per ray: the primitive direction
    width = 4 * n + 3
    keys = np.unique((gx // g + 2 * n + 1) * width + (gy // g + 2 * n + 1))
    dirs = np.stack([keys // width - 2 * n - 1, keys % width - 2 * n - 1], axis=1)
    theta = np.arctan2(dirs[:, 1], dirs[:, 0])
    parts = []
    for kind in (1, -1):
        a = np.mod(theta + kind * eta_f + 1e-13, 2 * np.pi) - 1e-13
        sel = np.nonzero((a >= -1e-12) & (a <= _OCTANT + 1e-12))[0]
        for side in (-1, 1):
            parts.append((np.full(len(sel), kind), dirs[sel, 0], dirs[sel, 1], np.full(len(sel), side), a[sel]))
    # the symmetry axes themselves, as point values
    parts.append((np.zeros(2, int), np.array([0, 1]), np.zeros(2, int), np.zeros(2, int), np.array([0.0, _OCTANT])))
    cols = [np.concatenate([p[i] for p in parts]) for i in range(5)]
    return _Candidates(
        cols[0].astype(np.int64), cols[1].astype(np.int64), cols[2].astype(np.int64),
        cols[3].astype(np.int64), cols[4].astype(float),
    )


@dataclass(frozen=True)
class _Sweep:
    cand: _Candidates
    err: np.ndarray
    m2: int | None


# angle of the most recent witness per (eta, bits); only steers the quick probe
_HINTS: dict = {}


def _probe_max(n: int, eta, bits: int) -> float:
    """Largest error over a sample of critical angles: a cheap lower bound on the sweep."""
    ctx = PrecisionContext(bits)
    cand = _candidates(n, eta)
    if len(cand) <= 512:
        return float(_sweep(n, eta, bits).err.max())
    hint = _HINTS.get((eta, bits), _OCTANT / 2)
    near = np.argsort(np.abs(cand.alpha - hint))[:48]
    idx = np.unique(np.concatenate([np.arange(0, len(cand), len(cand) // 96), near]))
    m2 = _octant_multiple(2 * ctx.real(eta), ctx)
    err = _batch_error(n, cand, idx, eta, m2, ctx)
    _HINTS[(eta, bits)] = float(cand.alpha[idx[int(np.argmax(err))]])
    return float(err.max())


@lru_cache(maxsize=256)
def _sweep(n: int, eta, bits: int) -> _Sweep:
    ctx = PrecisionContext(bits)
    m2 = _octant_multiple(2 * ctx.real(eta), ctx)
    cand = _candidates(n, eta)
    idx = np.arange(len(cand))
    err = np.concatenate(
        [_batch_error(n, cand, idx[i : i + _CHUNK], eta, m2, ctx) for i in range(0, len(cand), _CHUNK)]
    )
    return _Sweep(cand, err, m2)


_SIDES = {-1: "left", 0: "point", 1: "right"}


def _check_geom(geom: WedgeGeometry, ctx: PrecisionContext):
    return ctx.real(geom.eta)


def wedge_success_set(
    geom: WedgeGeometry, alpha, ctx: PrecisionContext | None = None, side: str = "point"
) -> SuccessSet2D:
    """Grid points whose direction from the center is within ``eta`` of ``alpha``.

    The wedge is closed for ``side="point"``; ``"right"`` (the limit from
    larger angles) drops the lower edge and ``"left"`` drops the upper edge.
    The center is never a member.
    """
    ctx = as_ctx(ctx)
    mp = ctx.mp
    n = geom.n
    eta = _check_geom(geom, ctx)
    a = ctx.real(alpha)
    u = (mp.cos(a - eta), mp.sin(a - eta))
    v = (mp.cos(a + eta), mp.sin(a + eta))
    half_plane = is_integer(2 * eta / mp.pi, ctx)
    members = set()
    for kx in range(n + 1):
        for ky in range(n + 1):
            X, Y = 2 * kx - n, 2 * ky - n
            if X == 0 and Y == 0:
                continue
            scale = ctx.guard * max(abs(X), abs(Y))
            c1 = u[0] * Y - u[1] * X
            c2 = X * v[1] - Y * v[0]
            on1 = abs(c1) <= scale
            on2 = abs(c2) <= scale
            if half_plane:
                if on1:
                    lower = u[0] * X + u[1] * Y > 0
                    ok = side != ("right" if lower else "left")
                else:
                    ok = c1 > 0
            else:
                ok1 = (c1 > 0 and not on1) or (on1 and side != "right")
                ok2 = (c2 > 0 and not on2) or (on2 and side != "left")
                ok = ok1 and ok2
            if ok:
                members.add((kx, ky))
    return SuccessSet2D(n, frozenset(members))


def wedge_error(geom: WedgeGeometry, alpha, ctx: PrecisionContext | None = None, side: str = "point"):
    """``1 - Pr`` of the wedge set at angle ``alpha``."""
    ctx = as_ctx(ctx)
    kset = wedge_success_set(geom, alpha, ctx, side)
    a = ctx.real(alpha)
    pmf_x = binom_pmf_row(geom.n, p_from_angle(a, "cos", ctx), ctx)
    pmf_y = binom_pmf_row(geom.n, p_from_angle(a, "sin", ctx), ctx)
    fail = kset.complement()
    return ctx.mp.fsum(pmf_x[i] * pmf_y[j] for i, j in fail.members)


def wedge_worst_error(geom: WedgeGeometry, ctx: PrecisionContext | None = None) -> SchemeResult:
    """Largest error over all critical angles and their one-sided limits.

    The grid and both binomials are symmetric under the eight reflections of
    the square, so only angles in ``[0, pi/4]`` are visited.
    """
    ctx = as_ctx(ctx)
    eta = _check_geom(geom, ctx)
    sw = _sweep(geom.n, eta, ctx.bits)
    top = sw.err.max()
    best, best_i = None, -1
    for i in np.nonzero(sw.err >= top * (1 - 1e3 * SCREEN_RTOL))[0]:
        val = _error_mp(geom.n, sw.cand.spec(int(i)), eta, sw.m2, ctx)
        if best is None or val > best:
            best, best_i = val, int(i)
    spec = sw.cand.spec(best_i)
    witness = float(_alpha_mp(spec, eta, ctx)) % (2 * np.pi)
    return SchemeResult(geom.n, best, witness, _SIDES[spec.side], frozenset(), len(sw.err))


@lru_cache(maxsize=8192)
def _decide(n: int, eta, eps_bar, bits: int) -> Decision:
    ctx = PrecisionContext(bits)
    thr = float(eps_bar)
    probe = _probe_max(n, eta, bits)
    if probe > thr * (1 + SCREEN_RTOL):
        return Decision(False, ctx.real(probe), ctx.real(eps_bar), bits)
    sw = _sweep(n, eta, bits)
    worst = int(np.argmax(sw.err))
    if sw.err[worst] > thr * (1 + SCREEN_RTOL):
        return Decision(False, ctx.real(float(sw.err[worst])), ctx.real(eps_bar), bits)
    best = None
    for i in np.nonzero(sw.err >= thr * (1 - SCREEN_RTOL))[0]:
        d = guarded_le(lambda c, i=int(i): _error_mp(n, sw.cand.spec(i), eta, sw.m2, c), eps_bar, ctx)
        if not d.holds:
            return d
        if best is None or d.value > best.value:
            best = d
    if best is not None:
        return best
    return Decision(True, ctx.real(float(sw.err[worst])), ctx.real(eps_bar), bits)


def wedge_min_n_report(
    eta, eps_bar, ctx: PrecisionContext | None = None, limit: int = 5000, stability: bool = True
) -> MinNReport:
    ctx = as_ctx(ctx)
    eta, eps_bar = ctx.real(eta), ctx.real(eps_bar)
    WedgeGeometry(1, eta)
    if not 0 < eps_bar < 1:
        raise ValueError("eps_bar must lie in (0, 1)")
    for n in range(1, limit + 1):
        d = _decide(n, eta, eps_bar, ctx.bits)
        if d.holds:
            unstable = ()
            if stability:
                unstable = unstable_above(lambda m: _decide(m, eta, eps_bar, ctx.bits), n)
            result = wedge_worst_error(WedgeGeometry(n, eta), ctx)
            return MinNReport(n, eps_bar, result, d, unstable)
    raise RuntimeError(f"wedge_min_n found no n <= {limit}")


def wedge_min_n(eta, eps_bar, ctx: PrecisionContext | None = None) -> int:
    """First ``n`` whose worst-case wedge error is at most ``eps_bar``."""
    return wedge_min_n_report(eta, eps_bar, ctx, stability=False).n


def wedge_jumps(geom: WedgeGeometry, ctx: PrecisionContext | None = None) -> list[tuple]:
    """``(alpha, left limit, right limit)`` at every critical angle in ``[0, pi/4]``.

    Several grid rays can share one critical angle; their limits are
    evaluated together because the membership masks see all of them.
    """
    ctx = as_ctx(ctx)
    eta = _check_geom(geom, ctx)
    m2 = _octant_multiple(2 * eta, ctx)
    cand = _candidates(geom.n, eta)
    out = {}
    for i in range(len(cand)):
        spec = cand.spec(i)
        if spec.kind == 0:
            continue
        a = _alpha_mp(spec, eta, ctx)
        key = round(float(a), 12)
        if key in out:
            continue
        left = _error_mp(geom.n, _Spec(spec.kind, spec.gx, spec.gy, -1), eta, m2, ctx)
        right = _error_mp(geom.n, _Spec(spec.kind, spec.gx, spec.gy, 1), eta, m2, ctx)
        out[key] = (a, left, right)
    return [out[key] for key in sorted(out)]
