"""Monte-Carlo simulation of the measurement circuit and both bit-by-bit estimators.

Phases are in turns.  The oracle for power ``j`` sees ``phi_j = 2^(j-1) phi mod 1``
and returns 1 with probability ``(1 + cos(2 pi (phi_j + theta))) / 2``.  For a
float ``phi`` the product with a power of two and the reduction mod 1 are
exact, so ``phi_j`` carries no rounding error.

Sampling runs in double precision; the Bernoulli draws compare 53-bit
uniforms against ``p``.  Every trial owns a generator derived from
``SeedSequence(seed, spawn_key=(trial,))`` so trials can run in any order.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import binomtest

from .numerics import DEFAULT_CONTEXT, PrecisionContext, chernoff_sample_bound
from .planner import POLICIES, BudgetPolicy, PlanRow, build_plan, planned
from .schemes.majority import angle_from_counts, majority_quantize

TRANSCRIPT_SCHEMA = 1
ALGORITHMS = ("classic", "improved")
CONFIDENCE = 0.99


def circular_error(a: float, b: float) -> float:
    """Distance between two turns on the unit circle, in ``[0, 1/2]``."""
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def bits_to_turn(bits: Sequence[int]) -> float:
    return math.fsum(b * 2.0 ** -(i + 1) for i, b in enumerate(bits))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial,))))


class MeasurementOracle:
    """Hidden phase plus a random stream; counts every sample it hands out.

    With ``expected=True`` a request for ``n`` samples returns ``round(n p)``
    instead of a random draw, which gives noiseless reference runs.
    """

    def __init__(self, phi: float, rng: np.random.Generator | None = None, expected: bool = False):
        self.phi = float(phi) % 1.0
        self.rng = rng if rng is not None else np.random.default_rng()
        self.expected = expected
        self.samples = 0

    def phase(self, j: int) -> float:
        return math.ldexp(self.phi, j - 1) % 1.0

    def probability(self, j: int, theta: float) -> float:
        return (1.0 + math.cos(2 * math.pi * (self.phase(j) + theta))) / 2

    def draw(self, j: int, theta: float, n: int) -> int:
        if n < 1 or j < 1:
            raise ValueError("need n >= 1 and j >= 1")
        p = self.probability(j, theta)
        self.samples += n
        if self.expected:
            return int(round(n * p))
        return int(np.count_nonzero(self.rng.random(n) < p))


def measure(oracle: MeasurementOracle, j: int, theta: float, n: int) -> int:
    """Number of ones in ``n`` runs of the circuit with power ``2^(j-1)`` and shift ``theta``."""
    return oracle.draw(j, theta, n)


@dataclass
class IterationRecord:
    j: int
    step: str
    theta: float
    n: int
    ones: int
    result: str
    # deviation of the shifted angle from the nearest of 0 and 1/2, in turns
    deviation: float | None = None


@dataclass
class Transcript:
    seed: int | None
    trial: int | None
    algorithm: str
    phi: float
    m: int
    records: list[IterationRecord] = field(default_factory=list)
    bits: tuple[int, ...] = ()
    estimate: float = 0.0
    samples: int = 0
    flags: list[str] = field(default_factory=list)

    @property
    def error(self) -> float:
        return circular_error(self.phi, self.estimate)

    @property
    def success(self) -> bool:
        return self.error <= 2.0 ** -(self.m + 2)

    def to_json(self) -> str:
        body = asdict(self)
        body["schema"] = TRANSCRIPT_SCHEMA
        body["bits"] = "".join(map(str, self.bits))
        body["error"] = self.error
        return json.dumps(body, sort_keys=True)


def _quantize_eighth(omega: float) -> tuple[int, int, int]:
    q = int(math.floor(omega * 8 + 0.5)) % 8
    return (q >> 2) & 1, (q >> 1) & 1, q & 1


def run_classic(
    phi: float,
    m: int,
    eps: float,
    sample_counts: int | Sequence[int] | None = None,
    *,
    oracle: MeasurementOracle | None = None,
    seed: int | None = None,
    trial: int | None = None,
) -> Transcript:
    """Kitaev's scheme: sine and cosine estimates at every power, then a consistency rule.

    ``sample_counts`` gives the per-component count for each ``j = m..1``
    (a single int applies to all).  The default is the Chernoff count for
    ``delta = 1/8`` at ``eps / (2m)``.
    """
    if m < 1:
        raise ValueError("m must be positive")
    if sample_counts is None:
        sample_counts = chernoff_sample_bound(0.125, eps / (2 * m))
    counts = [sample_counts] * m if isinstance(sample_counts, int) else list(sample_counts)
    if len(counts) != m:
        raise ValueError("need one sample count per bit")
    if oracle is None:
        oracle = MeasurementOracle(phi, trial_rng(seed or 0, trial or 0))
    tr = Transcript(seed, trial, "classic", oracle.phi, m)
    bits: dict[int, int] = {}
    for idx, j in enumerate(range(m, 0, -1)):
        n = counts[idx]
        nx = oracle.draw(j, 0.0, n)
        ny = oracle.draw(j, -0.25, n)
        omega = angle_from_counts(nx, ny, n)
        if j == m:
            bits[m], bits[m + 1], bits[m + 2] = _quantize_eighth(omega)
            result = f".{bits[m]}{bits[m + 1]}{bits[m + 2]}"
        else:
            tail = (bits[j + 1] / 4) + (bits[j + 2] / 8)
            d0 = circular_error(tail, omega)
            if d0 < 0.25:
                bits[j] = 0
            elif d0 > 0.25:
                bits[j] = 1
            else:
                bits[j] = 0
                tr.flags.append(f"consistency-tie@j={j}")
            result = str(bits[j])
        tr.records.append(IterationRecord(j, "cos", 0.0, n, nx, result))
        tr.records.append(IterationRecord(j, "sin", -0.25, n, ny, result))
    return _finalize(tr, bits, oracle)


def _finalize(tr: Transcript, bits: dict[int, int], oracle: MeasurementOracle) -> Transcript:
    tr.bits = tuple(bits[i] for i in range(1, tr.m + 3))
    tr.estimate = bits_to_turn(tr.bits)
    tr.samples = oracle.samples
    return tr


def _sign(oracle, j, theta, n, step, tr, debug) -> int:
    """Majority vote of ``n`` samples; 0 when ones win (shifted angle near 0)."""
    ones = oracle.draw(j, theta, n)
    bit = 0 if 2 * ones > n else 1
    if 2 * ones == n:
        tr.flags.append(f"sign-tie@j={j}")
    dev = None
    if debug:
        shifted = (oracle.phase(j) + theta) % 1.0
        dev = min(circular_error(shifted, 0.0), circular_error(shifted, 0.5))
    tr.records.append(IterationRecord(j, step, theta, n, ones, str(bit), dev))
    return bit


def resolve_plan(eps, m: int, first_stage: str, policy=None, ctx: PrecisionContext = DEFAULT_CONTEXT) -> PlanRow:
    """Schedule for a run.

    ``policy`` may be a :class:`BudgetPolicy`, a policy name, ``"table4"``
    or None.  ``"table4"`` and None both pick the Table-4 schedule up to
    ``k_eps`` bits and continue with single measurements beyond it.
    """
    if policy is None or policy == "table4":
        return planned(eps, m, first_stage, ctx)
    if isinstance(policy, str):
        policy = POLICIES[policy]
    return build_plan(eps, m, first_stage, policy, ctx)


def run_improved(
    phi: float,
    m: int,
    eps: float,
    first_stage: str = "triple_sign",
    policy: BudgetPolicy | str | None = None,
    *,
    plan: PlanRow | None = None,
    oracle: MeasurementOracle | None = None,
    seed: int | None = None,
    trial: int | None = None,
    debug: bool = False,
) -> Transcript:
    """Phase-shift estimator: a 3-bit first iteration, then one sign test per bit.

    The first iteration estimates ``phi_(m+1)`` to a quarter turn (two
    bits), then one sign test at power ``m`` shifted by half that estimate
    fixes ``beta_m``.  Iteration ``k >= 2`` works at ``j = m + 1 - k`` and
    shifts by ``-.0 beta_(j+1) ... beta_(m+2)`` so the angle sits within
    ``2^-(k+2)`` of 0 or 1/2.
    """
    if m < 1:
        raise ValueError("m must be positive")
    if plan is None:
        plan = resolve_plan(eps, m, first_stage, policy)
    if plan.m != m or plan.first_stage != first_stage:
        raise ValueError("plan does not match the requested run")
    if oracle is None:
        oracle = MeasurementOracle(phi, trial_rng(seed or 0, trial or 0))
    tr = Transcript(seed, trial, f"improved/{first_stage}", oracle.phi, m)
    n_a, n_b, n_sign = plan.first_counts
    jq = m + 1
    if first_stage == "triple_sign":
        # both tests see the angle rotated back by 1/8 turn
        c = _sign(oracle, jq, -0.125, n_a, "cos-sign", tr, False)
        s = _sign(oracle, jq, -0.375, n_b, "sin-sign", tr, False)
        quadrant = {(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}[(c, s)]
        quarter = (quadrant + 1) % 4
    else:
        nx = oracle.draw(jq, 0.0, n_a)
        ny = oracle.draw(jq, -0.25, n_b)
        if n_a != n_b:
            raise ValueError("majority needs equal component counts")
        label = majority_quantize(nx, ny, n_a)
        quarter = label.quarter
        tr.records.append(IterationRecord(jq, "majority-cos", 0.0, n_a, nx, str(label)))
        tr.records.append(IterationRecord(jq, "majority-sin", -0.25, n_b, ny, str(label)))
    bits = {m + 1: quarter >> 1, m + 2: quarter & 1}
    bits[m] = _sign(oracle, m, -quarter / 8, n_sign, "sign", tr, debug)
    for it in plan.iterations:
        j = m + 1 - it.k
        theta = -math.fsum(bits[i] * 2.0 ** -(i - j + 1) for i in range(j + 1, m + 3))
        bits[j] = _sign(oracle, j, theta, it.count, "sign", tr, debug)
    return _finalize(tr, bits, oracle)


@dataclass(frozen=True)
class TrialStats:
    trials: int
    successes: int
    eps: float
    m: int
    threshold: float
    ci_low: float
    ci_high: float
    samples: int

    @property
    def failures(self) -> int:
        return self.trials - self.successes

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials

    @property
    def meets_target(self) -> bool:
        """Upper confidence bound on the failure rate is within ``eps``."""
        return self.ci_high <= self.eps


def failure_interval(failures: int, trials: int, level: float = CONFIDENCE) -> tuple[float, float]:
    """Exact (Clopper-Pearson) two-sided interval for a binomial proportion."""
    ci = binomtest(failures, trials).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


def iter_trials(
    m: int,
    eps: float,
    trials: int,
    seed: int,
    algorithm: str = "improved",
    first_stage: str = "triple_sign",
    policy=None,
    phis: Iterable[float] | None = None,
    classic_counts=None,
):
    """Yield one transcript per trial; ``phis`` cycles a fixed list, else phases are uniform."""
    if trials < 1:
        raise ValueError("trials must be positive")
    if algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}")
    fixed = list(phis) if phis is not None else None
    plan = resolve_plan(eps, m, first_stage, policy) if algorithm == "improved" else None
    for t in range(trials):
        rng = trial_rng(seed, t)
        phi = fixed[t % len(fixed)] if fixed else float(rng.random())
        oracle = MeasurementOracle(phi, rng)
        if algorithm == "improved":
            yield run_improved(phi, m, eps, first_stage, plan=plan, oracle=oracle, seed=seed, trial=t)
        else:
            yield run_classic(phi, m, eps, classic_counts, oracle=oracle, seed=seed, trial=t)


def success_rate(
    m: int,
    eps: float,
    trials: int,
    seed: int,
    algorithm: str = "improved",
    first_stage: str = "triple_sign",
    policy=None,
    phis: Iterable[float] | None = None,
    classic_counts=None,
    transcripts: list | None = None,
) -> TrialStats:
    """Run seeded trials and summarize; pass a list as ``transcripts`` to keep them."""
    successes = samples = 0
    for tr in iter_trials(m, eps, trials, seed, algorithm, first_stage, policy, phis, classic_counts):
        successes += tr.success
        samples += tr.samples
        if transcripts is not None:
            transcripts.append(tr)
    lo, hi = failure_interval(trials - successes, trials)
    return TrialStats(trials, successes, eps, m, 2.0 ** -(m + 2), lo, hi, samples)
