"""Reference computations that share no code with the package.

They use sympy, exhaustive enumeration or plain float sweeps, so agreement
with the package is evidence rather than tautology.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import sympy as sp


def sym_p_cos(alpha):
    """``(1 + cos(alpha))/2`` as a sympy expression."""
    return (1 + sp.cos(alpha)) / 2


def sym_tail(n: int, k: int, p) -> sp.Expr:
    """``Pr(X <= k)`` for ``X ~ Bin(n, p)`` from the symbolic expansion."""
    q = 1 - p
    return sum(sp.binomial(n, j) * p**j * q ** (n - j) for j in range(k + 1))


def sym_value(expr, digits: int = 40) -> float:
    return float(sp.N(expr, digits))


def sym_value_str(expr, digits: int = 40) -> str:
    return str(sp.N(expr, digits))


def pascal_row(n: int) -> list[int]:
    row = [1]
    for _ in range(n):
        row = [a + b for a, b in zip([0] + row, row + [0])]
    return row


def sequence_weights(n: int, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Probability and number of ones for every one of the ``2^n`` outcome sequences."""
    bits = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64).reshape(-1, n)
    ones = bits.sum(axis=1)
    w = np.where(bits == 1, p, 1.0 - p).prod(axis=1) if n else np.ones(1)
    return w, ones


def enum_prob_1d(n: int, members, p: float) -> float:
    w, ones = sequence_weights(n, p)
    mask = np.isin(ones, list(members))
    return math.fsum(w[mask].tolist())


def enum_prob_2d(n: int, members, px: float, py: float) -> float:
    """Sum over all ``2^(2n)`` joint sequences whose count pair is a member."""
    wx, ox = sequence_weights(n, px)
    wy, oy = sequence_weights(n, py)
    table = np.zeros((n + 1, n + 1), dtype=bool)
    for i, j in members:
        table[i, j] = True
    joint = np.outer(wx, wy)
    mask = table[ox[:, None], oy[None, :]]
    return math.fsum(joint[mask].tolist())


def box_error_direct(n: int, delta: float, p: float) -> float:
    """Box error in float by testing each ``k`` against the closed bounds."""
    ks = np.arange(n + 1)
    inside = ((p - delta / 2) * n <= ks) & (ks <= (p + delta / 2) * n)
    pmf = np.array([math.comb(n, k) * p**k * (1 - p) ** (n - k) for k in ks])
    return float(1.0 - pmf[inside].sum())


def box_dense_max(n: int, delta: float, points: int = 10_000) -> float:
    """Largest box error over a uniform grid plus points hugging every breakpoint."""
    grid = list(np.linspace(0.0, 1.0, points))
    for k in range(n + 1):
        for s in (-1, 1):
            b = k / n + s * delta / 2
            grid += [b - 1e-10, b + 1e-10]
    return max(box_error_direct(n, delta, p) for p in grid if 0.0 <= p <= 1.0)


def wedge_members_direct(n: int, eta: float, alpha: float) -> set[tuple[int, int]]:
    """Closed wedge of half-width ``eta`` around ``alpha`` by a direct angle test."""
    out = set()
    c = n / 2
    for i in range(n + 1):
        for j in range(n + 1):
            if 2 * i == n and 2 * j == n:
                continue
            d = math.atan2(j - c, i - c) - alpha
            d = (d + math.pi) % (2 * math.pi) - math.pi
            if abs(d) <= eta + 1e-12:
                out.add((i, j))
    return out


def wedge_error_direct(n: int, eta: float, alpha: float) -> float:
    px, py = (1 + math.cos(alpha)) / 2, (1 + math.sin(alpha)) / 2
    members = wedge_members_direct(n, eta, alpha)
    fx = [math.comb(n, k) * px**k * (1 - px) ** (n - k) for k in range(n + 1)]
    fy = [math.comb(n, k) * py**k * (1 - py) ** (n - k) for k in range(n + 1)]
    return 1.0 - math.fsum(fx[i] * fy[j] for i, j in members)


def wedge_worst_direct(n: int, eta: float) -> float:
    """Max over every critical angle on the full circle, approached from both sides."""
    c = n / 2
    angles = {0.0}
    for i in range(n + 1):
        for j in range(n + 1):
            if 2 * i == n and 2 * j == n:
                continue
            t = math.atan2(j - c, i - c)
            angles |= {(t - eta) % (2 * math.pi), (t + eta) % (2 * math.pi)}
    best = 0.0
    for a in angles:
        for h in (-1e-9, 1e-9):
            best = max(best, wedge_error_direct(n, eta, a + h))
    return best


def majority_label_direct(nx: int, ny: int, n: int) -> str:
    """Label by comparing vote margins, written independently of the package."""
    if nx >= ny and nx >= n - ny + 1:
        return ".00"
    if ny >= nx + 1 and ny >= n - nx:
        return ".01"
    if n - nx >= ny + 1 and n - nx >= n - ny:
        return ".10"
    return ".11"


def exact_fraction_tail(n: int, k: int, p: Fraction) -> Fraction:
    return sum(Fraction(math.comb(n, j)) * p**j * (1 - p) ** (n - j) for j in range(k + 1))
