"""First-iteration pipelines: how many measurements buy a 1/8-accurate 3-bit estimate.

Every pipeline is a short sequence of stages.  A two-component stage
(box, wedge or majority) spends its count on both the cosine and the sine
circuit; a sign stage decides one more leading bit after a phase shift.

Two budget conventions exist for the multi-stage schemes:

``uniform``
    ``eps`` is split evenly over every individual estimate (cosine, sine
    and each sign stage).
``staged``
    stage one takes ``eps/2``, ``eps/4``, ``eps/6`` per component for one,
    two or three stages, and the sign stages share the rest equally.

The box rows of the published table follow ``uniform`` and the wedge rows
follow ``staged`` (with the wedge's joint error charged against the two
component budgets combined), so those are the defaults.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .numerics import DEFAULT_CONTEXT, PrecisionContext
from .schemes.box import box_joint_min_n_report, box_min_n_report, delta_of_eta
from .schemes.common import MinNReport
from .schemes.majority import majority_bound_n
from .schemes.sign import sign_min_n_report
from .schemes.wedge import wedge_min_n_report

REF_MODES = ("exact", "2bit", "3bit")
CONVENTIONS = ("uniform", "staged")

# a decision closer than this (relative) to its threshold is reported
NARROW_MARGIN = 1e-9


@dataclass(frozen=True)
class StagePlan:
    """What each stage estimates and with which error budget."""

    kind: str
    stages: int
    ref_mode: str
    eps: object
    budgets: tuple
    geometry: tuple
    convention: str = "uniform"


@dataclass(frozen=True)
class StageCount:
    role: str
    geometry: object
    budget: object
    count: int
    margin: float | None = None


@dataclass(frozen=True)
class PipelineResult:
    """Total measurement count with its per-stage breakdown.

    ``alternate`` holds the total under the other budget convention when it
    was requested.
    """

    total: int
    stages: tuple[StageCount, ...]
    plan: StagePlan | None = None
    flags: frozenset = field(default_factory=frozenset)
    alternate: int | None = None

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(s.count for s in self.stages)

    @property
    def margin(self) -> float | None:
        """Smallest relative margin among the stage decisions."""
        ms = [s.margin for s in self.stages if s.margin is not None]
        return min(ms) if ms else None


def _flags(report: MinNReport) -> set[str]:
    out = set()
    if report.decision.tie:
        out.add("tie")
    if abs(report.margin) < NARROW_MARGIN:
        out.add("narrow-margin")
    if report.unstable:
        out.add("unstable-above")
    return out


def _finish(stages: list[tuple[StageCount, set]], plan: StagePlan | None = None) -> PipelineResult:
    flags: set = set()
    for _, f in stages:
        flags |= f
    counts = tuple(s for s, _ in stages)
    return PipelineResult(sum(s.count for s in counts), counts, plan, frozenset(flags))


def _check_eps(eps, ctx: PrecisionContext):
    e = ctx.real(eps)
    if not 0 < e < 1:
        raise ValueError("eps must lie in (0, 1)")
    return e


def _sign_stage(alpha, budget, ctx) -> tuple[StageCount, set]:
    r = sign_min_n_report(alpha, budget, ctx)
    return StageCount("sign", alpha, budget, r.n, float(r.margin)), _flags(r)


def triple_sign_total(eps, ctx: PrecisionContext = DEFAULT_CONTEXT) -> PipelineResult:
    """Two orthogonal sign tests at ``pi/4`` plus one more sign step, ``eps/2`` each."""
    e = _check_eps(eps, ctx)
    stage, flags = _sign_stage(ctx.mp.pi / 4, e / 2, ctx)
    return _finish([(stage, flags)] * 3)


def triple_sign_bound(eps, ctx: PrecisionContext = DEFAULT_CONTEXT) -> int:
    """``floor(9 + 6 log2(1/eps))``."""
    e = _check_eps(eps, ctx)
    return int(ctx.mp.floor(9 + 6 * ctx.mp.log(1 / e, 2)))


def majority_sign_total(eps, ctx: PrecisionContext = DEFAULT_CONTEXT) -> PipelineResult:
    """Majority quadrant (counted via the ``2/2^n`` bound) followed by one sign step."""
    e = _check_eps(eps, ctx)
    n = majority_bound_n(e / 2, ctx)
    stage, flags = _sign_stage(ctx.mp.pi / 4, e / 2, ctx)
    return _finish([(StageCount("majority", None, e / 2, 2 * n), set()), (stage, flags)])


def majority_sign_bound(eps, ctx: PrecisionContext = DEFAULT_CONTEXT) -> int:
    """``floor(9 + 4 log2(1/eps))``."""
    e = _check_eps(eps, ctx)
    return int(ctx.mp.floor(9 + 4 * ctx.mp.log(1 / e, 2)))


def stage_one_eta(stages: int, ctx: PrecisionContext = DEFAULT_CONTEXT):
    """Angular accuracy of the two-component stage: ``pi/8``, ``pi/4`` or ``pi/2``."""
    if stages not in (1, 2, 3):
        raise ValueError("stages must be 1, 2 or 3")
    return ctx.mp.pi / 2 ** (4 - stages)


def sign_stage_angles(stages: int, ref_mode: str, ctx: PrecisionContext = DEFAULT_CONTEXT) -> tuple:
    """Worst-case deviation angles of the sign stages that follow stage one.

    A ``k``-bit reference adds ``pi/2^(k+1)`` before the first halving and
    ``pi/2^(k+2)`` before the second.
    """
    if ref_mode not in REF_MODES:
        raise ValueError(f"ref_mode must be one of {REF_MODES}")
    if stages not in (1, 2, 3):
        raise ValueError("stages must be 1, 2 or 3")
    pi = ctx.mp.pi
    bits = {"exact": None, "2bit": 2, "3bit": 3}[ref_mode]
    base = [pi / 4, pi / 8][3 - stages :] if stages > 1 else []
    out = []
    for s, a in enumerate(base):
        dev = 0 if bits is None else pi / 2 ** (bits + 1 + s)
        out.append(a + dev)
    return tuple(out)


def _budgets(stages: int, eps, convention: str) -> tuple:
    """``(per-component stage-one budget, per-sign budget)``."""
    if convention == "uniform":
        share = eps / (stages + 1)
        return share, share
    if convention == "staged":
        return eps / (2 * stages), eps / max(stages, 1)
    raise ValueError(f"convention must be one of {CONVENTIONS}")


def _multi_stage(kind, stages, ref_mode, eps, ctx, convention, stage_one):
    e = _check_eps(eps, ctx)
    if stages == 1:
        ref_mode = "exact"
    comp, sign_budget = _budgets(stages, e, convention)
    eta = stage_one_eta(stages, ctx)
    r, first_budget = stage_one(eta, comp)
    parts = [(StageCount(kind, eta, first_budget, 2 * r.n, float(r.margin)), _flags(r))]
    angles = sign_stage_angles(stages, ref_mode, ctx)
    for a in angles:
        parts.append(_sign_stage(a, sign_budget, ctx))
    plan = StagePlan(
        kind, stages, ref_mode, e,
        (first_budget,) + (sign_budget,) * len(angles), (eta,) + angles, convention,
    )
    return _finish(parts, plan)


def box_pipeline_total(
    stages: int,
    ref_mode: str,
    eps,
    ctx: PrecisionContext = DEFAULT_CONTEXT,
    convention: str = "uniform",
    alternate: bool = False,
) -> PipelineResult:
    """Box estimation of ``2^(s-1) phi`` followed by ``s - 1`` sign stages."""

    def stage_one(eta, comp):
        return box_min_n_report(delta_of_eta(eta, ctx), comp, ctx), comp

    res = _multi_stage("box", stages, ref_mode, eps, ctx, convention, stage_one)
    if alternate:
        other = "staged" if convention == "uniform" else "uniform"
        alt = box_pipeline_total(stages, ref_mode, eps, ctx, other)
        res = replace(res, alternate=alt.total)
    return res


def wedge_pipeline_total(
    stages: int,
    ref_mode: str,
    eps,
    ctx: PrecisionContext = DEFAULT_CONTEXT,
    convention: str = "staged",
    alternate: bool = False,
) -> PipelineResult:
    """Like :func:`box_pipeline_total` with a wedge first stage.

    The wedge's joint error is charged against both component budgets.
    """

    def stage_one(eta, comp):
        return wedge_min_n_report(eta, 2 * comp, ctx, stability=False), 2 * comp

    res = _multi_stage("wedge", stages, ref_mode, eps, ctx, convention, stage_one)
    if alternate:
        other = "staged" if convention == "uniform" else "uniform"
        alt = wedge_pipeline_total(stages, ref_mode, eps, ctx, other)
        res = replace(res, alternate=alt.total)
    return res


def box_joint_pipeline_total(eps, ctx: PrecisionContext = DEFAULT_CONTEXT) -> PipelineResult:
    """Single-stage box whose joint sine/cosine error is held to ``eps``."""
    e = _check_eps(eps, ctx)
    eta = stage_one_eta(1, ctx)
    r = box_joint_min_n_report(delta_of_eta(eta, ctx), e, ctx)
    return _finish([(StageCount("box-joint", eta, e, 2 * r.n, float(r.margin)), _flags(r))])


# Row label -> function of (eps, ctx) returning a PipelineResult, or an int
# for the closed-form bound rows.  Labels follow the published table.
TABLE2_ROWS = {
    "Single-stage box": lambda e, c: box_pipeline_total(1, "exact", e, c),
    "Two-stage box (2-bits)": lambda e, c: box_pipeline_total(2, "2bit", e, c),
    "Two-stage box (3-bits)": lambda e, c: box_pipeline_total(2, "3bit", e, c),
    "Two-stage box (exact)": lambda e, c: box_pipeline_total(2, "exact", e, c),
    "Three-stage box (2-bits)": lambda e, c: box_pipeline_total(3, "2bit", e, c),
    "Three-stage box (3-bits)": lambda e, c: box_pipeline_total(3, "3bit", e, c),
    "Three-stage box (exact)": lambda e, c: box_pipeline_total(3, "exact", e, c),
    "Single-stage box, jointly": lambda e, c: box_joint_pipeline_total(e, c),
    "Single-stage wedge": lambda e, c: wedge_pipeline_total(1, "exact", e, c),
    "Two-stage wedge (2-bit)": lambda e, c: wedge_pipeline_total(2, "2bit", e, c),
    "Two-stage wedge (3-bit)": lambda e, c: wedge_pipeline_total(2, "3bit", e, c),
    "Two-stage wedge (exact)": lambda e, c: wedge_pipeline_total(2, "exact", e, c),
    "Three-stage wedge (2-bit)": lambda e, c: wedge_pipeline_total(3, "2bit", e, c),
    "Three-stage wedge (3-bit)": lambda e, c: wedge_pipeline_total(3, "3bit", e, c),
    "Three-stage wedge (exact)": lambda e, c: wedge_pipeline_total(3, "exact", e, c),
    "Sign based": lambda e, c: triple_sign_total(e, c),
    "Sign based (bound)": lambda e, c: triple_sign_bound(e, c),
    "Majority and sign": lambda e, c: majority_sign_total(e, c),
    "Majority and sign (bound)": lambda e, c: majority_sign_bound(e, c),
}

# rows whose published values depend on an unstated convention
CONVENTION_SENSITIVE = frozenset(
    label for label in TABLE2_ROWS if "wedge" in label or "bit" in label
)


def alternate_value(label: str, eps, ctx: PrecisionContext = DEFAULT_CONTEXT) -> int | None:
    """Table-2 cell under the other budget convention, for mismatch reports."""
    if label not in CONVENTION_SENSITIVE:
        return None
    stages = 1 if label.startswith("Single") else 2 if label.startswith("Two") else 3
    mode = "exact" if "exact" in label or stages == 1 else ("2bit" if "2-bit" in label else "3bit")
    if "wedge" in label:
        return wedge_pipeline_total(stages, mode, eps, ctx, "uniform").total
    return box_pipeline_total(stages, mode, eps, ctx, "staged").total


def table2_cell(label: str, eps, ctx: PrecisionContext = DEFAULT_CONTEXT) -> tuple[int, float | None]:
    """``(count, margin)`` for one cell; bound rows have no margin."""
    r = TABLE2_ROWS[label](eps, ctx)
    if isinstance(r, int):
        return r, None
    return r.total, r.margin
