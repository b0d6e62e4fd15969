"""Arbitrary-precision kernel: binomial sums, dyadic trig values, entropy bounds.

Every exported quantity is computed with :mod:`mpmath` under an explicit
:class:`PrecisionContext`.  A small float64 layer (``*_float`` helpers) is
used by the worst-case searches to screen thousands of candidate points
quickly; any decision the screen cannot settle with a wide safety margin is
re-done here at full precision.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Union

import numpy as np
from mpmath.ctx_mp import MPContext
from scipy import special

Real = object  # an mpf bound to some PrecisionContext
Number = Union[int, float, str, Fraction, "Real"]

# relative half-width of the band in which float64 screening defers to mpmath
SCREEN_RTOL = 1e-8


class DegenerateBoundWarning(UserWarning):
    """A sample-count formula collapsed to zero samples."""


@lru_cache(maxsize=None)
def _mp_context(bits: int) -> MPContext:
    ctx = MPContext()
    ctx.prec = bits
    return ctx


@dataclass(frozen=True)
class PrecisionContext:
    """Significand precision (in bits) for every Real created under it."""

    bits: int = 256

    def __post_init__(self) -> None:
        if not isinstance(self.bits, int) or self.bits < 64:
            raise ValueError(f"precision must be an integer >= 64 bits, got {self.bits!r}")

    @property
    def mp(self) -> MPContext:
        return _mp_context(self.bits)

    def doubled(self) -> PrecisionContext:
        return PrecisionContext(self.bits * 2)

    @property
    def guard(self):
        """Relative distance below which a comparison is considered unresolved."""
        return self.mp.ldexp(1, -(self.bits // 2))

    def real(self, x: Number):
        """Convert ``x`` to a Real of this context.

        Strings are parsed at full precision (``"1e-5"`` is not routed through
        a double), fractions are divided exactly, and mpf values from other
        contexts are re-rounded.
        """
        mp = self.mp
        if isinstance(x, Fraction):
            return mp.mpf(x.numerator) / x.denominator
        if isinstance(x, str):
            s = x.strip()
            if "/" in s and not s.endswith("pi"):
                return self.real(Fraction(s))
            return mp.mpf(s)
        return mp.mpf(x)

    def pi_multiple(self, num: int, den: int = 1):
        """The angle ``num/den * pi`` in radians at context precision."""
        return self.mp.pi * num / den


DEFAULT_CONTEXT = PrecisionContext()


def parse_pi_angle(text: str, ctx: PrecisionContext = DEFAULT_CONTEXT):
    """Parse angles such as ``"7/16pi"``, ``"pi/8"``, ``"3pi/4"`` or ``"0.25"`` (radians)."""
    s = text.replace(" ", "").lower().replace("π", "pi")
    if "pi" not in s:
        return ctx.real(s)
    head, _, tail = s.partition("pi")
    frac = Fraction(1)
    if head:
        head = head.rstrip("*")
        frac *= Fraction(head) if head not in ("+", "-") else Fraction(f"{head}1")
    if tail:
        if not tail.startswith("/"):
            raise ValueError(f"cannot parse angle {text!r}")
        frac /= Fraction(tail[1:])
    return ctx.pi_multiple(frac.numerator, frac.denominator)


# ---------------------------------------------------------------------------
# success sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuccessSet1D:
    n: int
    members: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        members = tuple(sorted(set(int(k) for k in self.members)))
        if members and (members[0] < 0 or members[-1] > self.n):
            raise ValueError(f"members must lie in [0, {self.n}]")
        object.__setattr__(self, "members", members)

    @classmethod
    def interval(cls, n: int, lo: int, hi: int) -> SuccessSet1D:
        lo, hi = max(lo, 0), min(hi, n)
        return cls(n, tuple(range(lo, hi + 1)))

    def complement(self) -> SuccessSet1D:
        present = set(self.members)
        return SuccessSet1D(self.n, tuple(k for k in range(self.n + 1) if k not in present))

    def __contains__(self, k: int) -> bool:
        return k in set(self.members)

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class SuccessSet2D:
    n: int
    members: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        members = frozenset((int(a), int(b)) for a, b in self.members)
        for a, b in members:
            if not (0 <= a <= self.n and 0 <= b <= self.n):
                raise ValueError(f"member {(a, b)} outside [0, {self.n}]^2")
        object.__setattr__(self, "members", members)

    @classmethod
    def full(cls, n: int) -> SuccessSet2D:
        return cls(n, frozenset((a, b) for a in range(n + 1) for b in range(n + 1)))

    def complement(self) -> SuccessSet2D:
        return SuccessSet2D(
            self.n,
            frozenset(
                (a, b)
                for a in range(self.n + 1)
                for b in range(self.n + 1)
                if (a, b) not in self.members
            ),
        )

    def __contains__(self, item) -> bool:
        return tuple(item) in self.members

    def __len__(self) -> int:
        return len(self.members)


# ---------------------------------------------------------------------------
# exact binomial machinery
# ---------------------------------------------------------------------------

_ROW_CACHE_MAX_N = 5000


@lru_cache(maxsize=64)
def _binomial_row(n: int) -> tuple[int, ...]:
    row = [1] * (n + 1)
    for k in range(1, n // 2 + 1):
        row[k] = row[k - 1] * (n - k + 1) // k
        row[n - k] = row[k]
    return tuple(row)


def binomial_coeff(n: int, k: int) -> int:
    """Exact ``n choose k`` for ``0 <= k <= n <= 10**5``."""
    if not (0 <= k <= n) or n > 100_000:
        raise ValueError(f"binomial_coeff requires 0 <= k <= n <= 1e5, got n={n}, k={k}")
    if n <= _ROW_CACHE_MAX_N:
        return _binomial_row(n)[k]
    return math.comb(n, k)


def binom_pmf_row(n: int, p, ctx: PrecisionContext = DEFAULT_CONTEXT) -> list:
    """``[C(n,k) p^k (1-p)^(n-k) for k in 0..n]`` at context precision."""
    mp = ctx.mp
    p = ctx.real(p)
    q = 1 - p
    row = _binomial_row(n) if n <= _ROW_CACHE_MAX_N else [math.comb(n, k) for k in range(n + 1)]
    p_pow = [mp.one] * (n + 1)
    q_pow = [mp.one] * (n + 1)
    for k in range(1, n + 1):
        p_pow[k] = p_pow[k - 1] * p
        q_pow[k] = q_pow[k - 1] * q
    return [mp.mpf(row[k]) * p_pow[k] * q_pow[n - k] for k in range(n + 1)]


def p_from_angle(alpha, component: str = "cos", ctx: PrecisionContext = DEFAULT_CONTEXT):
    """``(1 + cos a)/2`` or ``(1 + sin a)/2`` for an angle in radians."""
    mp = ctx.mp
    a = ctx.real(alpha)
    if component in ("cos", "x"):
        return (1 + mp.cos(a)) / 2
    if component in ("sin", "y"):
        return (1 + mp.sin(a)) / 2
    raise ValueError(f"component must be 'cos' or 'sin', got {component!r}")


def success_prob_1d(kset: SuccessSet1D, p, ctx: PrecisionContext = DEFAULT_CONTEXT):
    """Probability that a Binomial(n, p) count lands in ``kset``."""
    if not kset.members:
        return ctx.mp.zero
    pmf = binom_pmf_row(kset.n, p, ctx)
    return ctx.mp.fsum(pmf[k] for k in kset.members)


def success_prob_2d(kset: SuccessSet2D, p_x, p_y, ctx: PrecisionContext = DEFAULT_CONTEXT):
    """Probability that two independent Binomial(n, .) counts land in ``kset``."""
    if not kset.members:
        return ctx.mp.zero
    px = binom_pmf_row(kset.n, p_x, ctx)
    py = binom_pmf_row(kset.n, p_y, ctx)
    return ctx.mp.fsum(px[a] * py[b] for a, b in kset.members)


def binom_tail_leq(n: int, k: int, p, ctx: PrecisionContext = DEFAULT_CONTEXT):
    """``Pr(X <= k)`` for ``X ~ Binomial(n, p)``."""
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    pmf = binom_pmf_row(n, p, ctx)
    return ctx.mp.fsum(pmf[: k + 1])


def rel_entropy(a, p, ctx: PrecisionContext = DEFAULT_CONTEXT):
    """Relative entropy ``D(a || p)`` between Bernoulli(a) and Bernoulli(p), natural log."""
    mp = ctx.mp
    a, p = ctx.real(a), ctx.real(p)
    if not (0 < a < 1 and 0 < p < 1):
        raise ValueError("rel_entropy requires a, p in the open interval (0, 1)")
    return a * mp.log(a / p) + (1 - a) * mp.log((1 - a) / (1 - p))


def chernoff_sample_bound(delta, eps_bar, ctx: PrecisionContext = DEFAULT_CONTEXT) -> int:
    """``ceil((2/delta^2) ln(2/eps_bar))`` samples for a delta-accurate cos/sin estimate."""
    mp = ctx.mp
    delta, eps_bar = ctx.real(delta), ctx.real(eps_bar)
    if delta <= 0 or eps_bar <= 0:
        raise ValueError("delta and eps_bar must be positive")
    value = 2 / delta**2 * mp.log(2 / eps_bar)
    if value <= 0:
        warnings.warn(
            f"chernoff_sample_bound({delta}, {eps_bar}) is degenerate; returning 0",
            DegenerateBoundWarning,
            stacklevel=2,
        )
        return 0
    return int(mp.ceil(value))


def chernoff_tail_bound(n: int, k: int, p, ctx: PrecisionContext = DEFAULT_CONTEXT):
    """Upper bound ``exp(-n D(k/n || p))`` on ``Pr(X <= k)``, valid for ``k < np``."""
    mp = ctx.mp
    p = ctx.real(p)
    if not k < n * p:
        raise ValueError(f"chernoff_tail_bound needs k < n p (k={k}, n p={mp.nstr(n * p, 8)})")
    if k == 0:
        return (1 - p) ** n
    return mp.exp(-n * rel_entropy(mp.mpf(k) / n, p, ctx))


# ---------------------------------------------------------------------------
# guarded comparisons
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Decision:
    """Outcome of ``value <= threshold`` with the precision it was settled at."""

    holds: bool
    value: object
    threshold: object
    bits: int
    tie: bool = False

    @property
    def margin(self) -> float:
        """Relative distance ``(threshold - value) / threshold``."""
        if self.threshold == 0:
            return float(-self.value)
        return float((self.threshold - self.value) / self.threshold)


def guarded_le(
    evaluate: Callable[[PrecisionContext], object],
    threshold: Number,
    ctx: PrecisionContext = DEFAULT_CONTEXT,
    max_bits: int = 4096,
) -> Decision:
    """Decide ``evaluate(ctx) <= threshold``, doubling precision while unresolved.

    A comparison is unresolved when the two sides agree to within a relative
    ``2**-(bits/2)``.  If the sides still agree at ``max_bits`` they are taken
    as equal, which satisfies ``<=``; the decision is then marked as a tie.
    """
    while True:
        mp = ctx.mp
        value = evaluate(ctx)
        thr = ctx.real(threshold)
        scale = max(abs(value), abs(thr), mp.mpf(2) ** -ctx.bits)
        if abs(value - thr) > ctx.guard * scale:
            return Decision(bool(value <= thr), value, thr, ctx.bits)
        if ctx.bits * 2 > max_bits:
            return Decision(True, value, thr, ctx.bits, tie=True)
        ctx = ctx.doubled()


def screen(value: float, threshold: float) -> int | None:
    """Float64 verdict for ``value <= threshold``: 1 pass, 0 fail, None too close to call."""
    if value < threshold * (1 - SCREEN_RTOL):
        return 1
    if value > threshold * (1 + SCREEN_RTOL):
        return 0
    return None


# ---------------------------------------------------------------------------
# float64 screening helpers
# ---------------------------------------------------------------------------


def binom_pmf_matrix(n: int, p: np.ndarray) -> np.ndarray:
    """Rows of Binomial(n, p_i) probabilities for each entry of ``p`` (float64)."""
    p = np.asarray(p, dtype=float)[:, None]
    k = np.arange(n + 1, dtype=float)[None, :]
    logc = special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = logc + special.xlogy(k, p) + special.xlog1py(n - k, -p)
    return np.exp(logp)


def binom_cdf_float(k, n, p) -> np.ndarray:
    """``Pr(X <= k)`` in float64; zero for ``k < 0`` and one for ``k >= n``."""
    k, n, p = np.broadcast_arrays(np.asarray(k), np.asarray(n), np.asarray(p, dtype=float))
    out = np.where(k >= n, 1.0, 0.0)
    mid = (k >= 0) & (k < n)
    if np.any(mid):
        out[mid] = special.bdtr(k[mid].astype(float), n[mid], p[mid])
    return out


def binom_sf_float(k, n, p) -> np.ndarray:
    """``Pr(X > k)`` in float64; one for ``k < 0`` and zero for ``k >= n``."""
    k, n, p = np.broadcast_arrays(np.asarray(k), np.asarray(n), np.asarray(p, dtype=float))
    out = np.where(k < 0, 1.0, 0.0)
    mid = (k >= 0) & (k < n)
    if np.any(mid):
        out[mid] = special.bdtrc(k[mid].astype(float), n[mid], p[mid])
    return out


def is_integer(x, ctx: PrecisionContext) -> bool:
    """True when the Real ``x`` is an integer up to the context guard."""
    mp = ctx.mp
    return abs(x - mp.nint(x)) <= ctx.guard * max(abs(x), mp.one)


def fsum(values: Iterable, ctx: PrecisionContext = DEFAULT_CONTEXT):
    return ctx.mp.fsum(values)
