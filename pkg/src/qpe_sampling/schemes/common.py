"""Result types and the shared upward search over sample counts."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..numerics import DEFAULT_CONTEXT, Decision, PrecisionContext

# n above the returned minimum that are re-checked for non-monotone failures
STABILITY_WINDOW = 16


@dataclass(frozen=True)
class SchemeResult:
    """Worst-case error of a scheme at a fixed sample count ``n``.

    ``witness`` is where the maximum is attained or approached (an angle in
    radians, or a probability for the box scheme) and ``side`` says whether
    it is the value at the witness (``"point"``) or a one-sided limit
    (``"left"``/``"right"`` in the witness coordinate).
    """

    n: int
    worst_error: object
    witness: float
    side: str = "point"
    flags: frozenset = field(default_factory=frozenset)
    evaluations: int = 0

    def __float__(self) -> float:
        return float(self.worst_error)


@dataclass(frozen=True)
class MinNReport:
    """A minimal sample count together with the evidence behind it."""

    n: int
    threshold: object
    result: SchemeResult
    decision: Decision
    unstable: tuple[int, ...] = ()

    @property
    def margin(self) -> float:
        return self.decision.margin


def upward_search(
    decide: Callable[[int], Decision],
    start: int = 1,
    step: int = 1,
    limit: int = 100_000,
) -> tuple[int, Decision]:
    """First ``n`` in ``start, start+step, ...`` for which ``decide(n).holds``."""
    n = start
    while n <= limit:
        d = decide(n)
        if d.holds:
            return n, d
        n += step
    raise RuntimeError(f"no sample count up to {limit} meets the error budget")


def unstable_above(
    decide: Callable[[int], Decision], n: int, step: int = 1, window: int = STABILITY_WINDOW
) -> tuple[int, ...]:
    """Sample counts in ``(n, n+window]`` that fail the budget again."""
    return tuple(m for m in range(n + step, n + window + 1, step) if not decide(m).holds)


def as_ctx(ctx: PrecisionContext | None) -> PrecisionContext:
    return DEFAULT_CONTEXT if ctx is None else ctx
