"""Majority-based two-bit quantization of an angle from sine and cosine counts."""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..numerics import (
    PrecisionContext,
    SuccessSet2D,
    binom_pmf_row,
    p_from_angle,
)
from .common import as_ctx


@dataclass(frozen=True)
class MajorityLabel:
    """Two quantization bits ``.b1 b2``; the label stands for the turn ``(2*b1 + b2)/4``."""

    b1: int
    b2: int

    @property
    def quarter(self) -> int:
        return 2 * self.b1 + self.b2

    @property
    def turn(self) -> float:
        return self.quarter / 4

    def __str__(self) -> str:
        return f".{self.b1}{self.b2}"


def majority_quantize(n_x: int, n_y: int, n: int) -> MajorityLabel:
    """Label of the quadrant picked by majority votes; the first matching case wins."""
    if not (0 <= n_x <= n and 0 <= n_y <= n):
        raise ValueError("counts must lie in [0, n]")
    if n_x >= max(n_y, n - n_y + 1):
        return MajorityLabel(0, 0)
    if n_y >= max(n_x + 1, n - n_x):
        return MajorityLabel(0, 1)
    if n - n_x >= max(n_y + 1, n - n_y):
        return MajorityLabel(1, 0)
    return MajorityLabel(1, 1)


def majority_success_set(n: int, set_kind: str = "reduced") -> SuccessSet2D:
    """Accepted counts for angles in the first quadrant.

    ``reduced`` is the triangle ``j >= n - i + 1``; ``full`` accepts both
    labels ``.00`` and ``.01``.
    """
    if set_kind == "reduced":
        members = {(i, j) for i in range(n + 1) for j in range(max(n - i + 1, 0), n + 1)}
    elif set_kind == "full":
        members = {
            (i, j)
            for i in range(n + 1)
            for j in range(n + 1)
            if majority_quantize(i, j, n).b1 == 0
        }
    else:
        raise ValueError(f"unknown set kind {set_kind!r}")
    return SuccessSet2D(n, frozenset(members))


def majority_error(n: int, alpha, set_kind: str = "reduced", ctx: PrecisionContext | None = None):
    """Failure probability ``1 - Pr(K | n, alpha)`` for ``alpha`` in ``[0, pi/2]``."""
    ctx = as_ctx(ctx)
    mp = ctx.mp
    a = ctx.real(alpha)
    if not -ctx.guard <= a <= mp.pi / 2 + ctx.guard:
        raise ValueError("majority_error needs alpha in [0, pi/2]")
    if n < 1:
        raise ValueError("n must be positive")
    px = binom_pmf_row(n, p_from_angle(a, "cos", ctx), ctx)
    py = binom_pmf_row(n, p_from_angle(a, "sin", ctx), ctx)
    if set_kind == "reduced":
        # column i fails for j <= n - i
        cum, acc = [], mp.zero
        for v in py:
            acc += v
            cum.append(acc)
        return mp.fsum(px[i] * cum[n - i] for i in range(n + 1))
    fail = majority_success_set(n, set_kind).complement()
    return mp.fsum(px[i] * py[j] for i, j in fail.members)


def majority_bound_n(eps_bar, ctx: PrecisionContext | None = None) -> int:
    """Smallest ``n >= 1`` with ``2 / 2**n <= eps_bar``."""
    ctx = as_ctx(ctx)
    e = ctx.real(eps_bar)
    if not 0 < e <= 1:
        raise ValueError("eps_bar must lie in (0, 1]")
    n = max(1, int(math.floor(math.log2(2 / float(e)))) - 1)
    while 2 > e * 2**n:
        n += 1
    while n > 1 and 2 <= e * 2 ** (n - 1):
        n -= 1
    return n


def counts_degenerate(n_x: int, n_y: int, n: int) -> bool:
    """True when both counts sit exactly at ``n/2`` and no direction is defined."""
    return 2 * n_x == n and 2 * n_y == n


def angle_from_counts(n_x: int, n_y: int, n: int) -> float:
    """Turn in ``[0, 1)`` of the vector ``(2 n_x/n - 1, 2 n_y/n - 1)``.

    The degenerate center maps to 0; see :func:`counts_degenerate`.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if counts_degenerate(n_x, n_y, n):
        return 0.0
    t = math.atan2(2 * n_y - n, 2 * n_x - n) / (2 * math.pi)
    return t % 1.0
