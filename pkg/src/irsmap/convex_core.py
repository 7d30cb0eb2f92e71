"""Per-cell rate optimization: relaxed SDP feasibility, rank-one recovery, bisection.

One cell of the multi-user rate map asks: what is the largest mobile-user
rate target such that phases and powers exist meeting it together with the
static user's rate floor? The search runs a bisection over the rate target.
Each probe solves one convex SDP over the phase Gram matrix V (unit
diagonal, PSD) in which the bilinear power/gain couplings are written as
2x2 hyperbolic PSD blocks, so a probe reduces to: minimize the total
transmit power the probe would need, and compare with the power budget.
Rank-one structure of V is then restored by successive convex
approximation on the difference of nuclear and spectral norms; because the
unit diagonal fixes the nuclear norm, each SCA step maximizes the quadratic
form of the current leading eigenvector.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from . import sdp
from .power_map import wrap_phase

logger = logging.getLogger(__name__)

NOMA = "noma"
OMA = "oma"
SRU_STRONG = "sru_strong"  # static user decodes first (is the strong user)
MRU_STRONG = "mru_strong"

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
RANK_ONE = "rank_one_achieved"
STALLED = "stalled"

# Pinned solve tolerances.
SDP_TOL = 1e-8
RANK_TOL = 1e-6  # on (nuclear - spectral) / spectral
SCA_TOL = 1e-6
MAX_SCA_ITER = 50
EPS0 = 1e-3  # bisection accuracy, bit/s/Hz
FEAS_SLACK = 1e-6  # relative slack when re-checking constraints


class ConvexCoreError(RuntimeError):
    pass


class SolverStallError(ConvexCoreError):
    """The interior-point solve did not reach its residual targets."""


@dataclass(frozen=True, eq=False)
class RateCellProblem:
    """Data of one cell's joint phase/power optimization.

    ``row_m``/``row_s`` are the conjugated composite channel rows
    ``[cascaded per-sub-surface entries..., direct scalar]`` of the mobile
    and static user; both share the phase vector. ``tau_*`` are the
    scattering floors.
    """

    row_m: np.ndarray
    row_s: np.ndarray
    tau_m: float
    tau_s: float
    p_max: float
    sigma2: float
    rs_target: float
    scheme: str
    order: str | None = None

    def __post_init__(self) -> None:
        if self.row_m.shape != self.row_s.shape or self.row_m.ndim != 1:
            raise ConvexCoreError("channel rows must be equal-length vectors")
        if min(self.tau_m, self.tau_s) < 0:
            raise ConvexCoreError("scattering floors must be nonnegative")
        if self.p_max <= 0 or self.sigma2 <= 0 or self.rs_target < 0:
            raise ConvexCoreError("powers and rate floor must be positive")
        if self.scheme not in (NOMA, OMA):
            raise ConvexCoreError(f"unknown scheme {self.scheme!r}")
        if self.scheme == NOMA and self.order not in (SRU_STRONG, MRU_STRONG):
            raise ConvexCoreError(f"invalid decoding order {self.order!r}")

    @property
    def n_phases(self) -> int:
        return self.row_m.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.row_m.shape[0]

    def h_matrix(self, user: str) -> np.ndarray:
        row = self.row_m if user == "m" else self.row_s
        return np.outer(np.conj(row), row)

    def gain_cap(self, user: str) -> float:
        """Largest expected gain any unit-modulus phase vector can reach."""
        row = self.row_m if user == "m" else self.row_s
        tau = self.tau_m if user == "m" else self.tau_s
        return float(np.abs(row).sum() ** 2 + tau)


@dataclass
class SdpState:
    """Phase Gram matrix with a power split; the unit of work per probe."""

    v: np.ndarray  # (N+1, N+1) complex Hermitian, unit diagonal
    p_m: float
    p_s: float


@dataclass
class SolveReport:
    status: str
    iterations: int
    residuals: dict
    dc_gap: float  # nuclear - spectral, absolute
    objective_trace: tuple
    state: SdpState | None


@dataclass
class ProbeRecord:
    r0: float
    feasible: bool
    relaxed_status: str
    sca_status: str | None
    sca_iterations: int
    dc_gap: float
    objective_trace: tuple
    validated: bool | None = None  # phase-extraction re-check, rank-one probes only


@dataclass
class CellSolve:
    status: str
    r0: float
    state: SdpState | None
    phases: np.ndarray | None
    probes: tuple
    stall_count: int


def _normalized(prob: RateCellProblem) -> tuple[RateCellProblem, float]:
    """Rescale gains so SDP data is O(1); rate relations are invariant."""
    g0 = max(prob.gain_cap("m"), prob.gain_cap("s"))
    if g0 <= 0:
        raise ConvexCoreError("degenerate cell: no channel energy at all")
    return (
        replace(
            prob,
            row_m=prob.row_m / math.sqrt(g0),
            row_s=prob.row_s / math.sqrt(g0),
            tau_m=prob.tau_m / g0,
            tau_s=prob.tau_s / g0,
            sigma2=prob.sigma2 / g0,
        ),
        g0,
    )


def dc_gap(v: np.ndarray) -> tuple[float, float]:
    """(nuclear - spectral, spectral) of a Hermitian matrix."""
    ev = np.linalg.eigvalsh(v)
    spectral = float(np.max(np.abs(ev)))
    return float(np.sum(np.abs(ev)) - spectral), spectral


def _clean_v(v: np.ndarray) -> np.ndarray:
    """Normalize the diagonal to exactly one (tiny congruence scaling)."""
    d = np.real(np.diag(v)).copy()
    d[d <= 0] = 1.0
    s = 1.0 / np.sqrt(d)
    out = v * np.outer(s, s)
    np.fill_diagonal(out, 1.0)
    return (out + out.conj().T) / 2.0


@dataclass(frozen=True)
class _ProbeConstants:
    """Scheme/order-specific coefficients of one probe's constraint set.

    The two hyperbolic blocks encode ``corner * gain >= c^2``; the probe's
    required transmit power is ``coef_s * Bs[0,0] + coef_m * Bm[0,0]``.
    """

    c_m: float
    c_s: float
    coef_m: float
    coef_s: float
    sic_sign: int  # +1: static user must be stronger; -1: mobile; 0: none


def _constants(prob: RateCellProblem, r0: float) -> _ProbeConstants:
    s2 = prob.sigma2
    if prob.scheme == OMA:
        am = 2.0 ** (2.0 * r0) - 1.0
        as_ = 2.0 ** (2.0 * prob.rs_target) - 1.0
        return _ProbeConstants(
            c_m=math.sqrt(am * s2 / 2.0),
            c_s=math.sqrt(as_ * s2 / 2.0),
            coef_m=1.0,
            coef_s=1.0,
            sic_sign=0,
        )
    alpha = 2.0 ** r0 - 1.0
    beta = 2.0 ** prob.rs_target - 1.0
    if prob.order == SRU_STRONG:
        # Mobile user suffers the static user's interference.
        return _ProbeConstants(
            c_m=math.sqrt(alpha * s2),
            c_s=math.sqrt(beta * s2),
            coef_m=1.0,
            coef_s=1.0 + alpha,
            sic_sign=+1,
        )
    return _ProbeConstants(
        c_m=math.sqrt(alpha * s2),
        c_s=math.sqrt(beta * s2),
        coef_m=1.0 + beta,
        coef_s=1.0,
        sic_sign=-1,
    )


_E11 = np.array([[1.0, 0.0], [0.0, 0.0]])
_E22 = np.array([[0.0, 0.0], [0.0, 1.0]])
_OFF = np.array([[0.0, 0.5], [0.5, 0.0]])


def _build_probe_sdp(prob: RateCellProblem, r0: float, objective,
                     include_budget: bool):
    """Assemble the probe SDP; returns (problem, v-dim) for the solver."""
    n = prob.dim
    cons = _constants(prob, r0)
    h_m = sdp.lift_hermitian(prob.h_matrix("m")) / 2.0
    h_s = sdp.lift_hermitian(prob.h_matrix("s")) / 2.0

    builder = sdp.SdpBuilder()
    bv = builder.add_block(2 * n)
    bs = builder.add_block(2)
    bm = builder.add_block(2)

    for k in range(n):
        diag = np.zeros((2 * n, 2 * n))
        diag[k, k] = 0.5
        diag[n + k, n + k] = 0.5
        builder.add_constraint({bv: diag}, 1.0)

    builder.add_constraint({bs: _OFF}, cons.c_s)
    builder.add_constraint({bm: _OFF}, cons.c_m)
    builder.add_constraint({bs: _E22, bv: -h_s}, prob.tau_s)
    builder.add_constraint({bm: _E22, bv: -h_m}, prob.tau_m)

    if cons.sic_sign != 0:
        slack = builder.add_slack()
        sign = float(cons.sic_sign)
        builder.add_constraint(
            {bv: sign * (h_s - h_m), slack: -np.ones((1, 1))},
            sign * (prob.tau_m - prob.tau_s),
        )
    if include_budget:
        slack = builder.add_slack()
        builder.add_constraint(
            {bs: cons.coef_s * _E11, bm: cons.coef_m * _E11, slack: np.ones((1, 1))},
            prob.p_max,
        )

    if objective == "power":
        builder.set_objective({bs: cons.coef_s * _E11, bm: cons.coef_m * _E11})
    else:  # ("sca", u): maximize the leading-eigenvector quadratic form
        _, u = objective
        builder.set_objective({bv: -sdp.lift_hermitian(np.outer(u, np.conj(u))) / 2.0})

    return builder.build(), (bv, bs, bm, cons, n)


def _recover_state(result: sdp.SdpResult, handles) -> SdpState:
    bv, bs, bm, cons, n = handles
    v = _clean_v(sdp.delift_hermitian(result.x_blocks[bv], n))
    s00 = max(0.0, float(result.x_blocks[bs][0, 0]))
    m00 = max(0.0, float(result.x_blocks[bm][0, 0]))
    if cons.sic_sign == +1:  # sru strong: p_s explicit, x_m = p_m - alpha*p_s
        alpha_ps = (cons.coef_s - 1.0) * s00
        return SdpState(v=v, p_m=m00 + alpha_ps, p_s=s00)
    if cons.sic_sign == -1:  # mru strong: p_m explicit, x_s = p_s - beta*p_m
        beta_pm = (cons.coef_m - 1.0) * m00
        return SdpState(v=v, p_m=m00, p_s=s00 + beta_pm)
    return SdpState(v=v, p_m=m00, p_s=s00)


def max_trace_over_phase_grams(h: np.ndarray, tol: float = SDP_TOL) -> float:
    """max Tr(H V) over Hermitian PSD V with unit diagonal."""
    n = h.shape[0]
    builder = sdp.SdpBuilder()
    bv = builder.add_block(2 * n)
    for k in range(n):
        diag = np.zeros((2 * n, 2 * n))
        diag[k, k] = 0.5
        diag[n + k, n + k] = 0.5
        builder.add_constraint({bv: diag}, 1.0)
    builder.set_objective({bv: -sdp.lift_hermitian(h) / 2.0})
    result = sdp.solve_sdp(builder.build(), tol=tol)
    if result.status != sdp.OPTIMAL:
        raise SolverStallError("trace maximization did not converge")
    return -result.primal_obj


def _sic_attainable(prob: RateCellProblem) -> bool:
    """Whether any phase Gram matrix satisfies the decoding-order constraint.

    Rejects orders whose constraint is only marginally attainable so every
    probe SDP downstream keeps a strictly feasible interior.
    """
    if prob.scheme == OMA:
        return True
    sign = +1.0 if prob.order == SRU_STRONG else -1.0
    d = sign * (prob.h_matrix("s") - prob.h_matrix("m"))
    need = sign * (prob.tau_m - prob.tau_s)
    try:
        best = max_trace_over_phase_grams(d)
    except SolverStallError:
        return False
    return best >= need + 1e-9


def solve_feasibility_relaxed(prob: RateCellProblem, r0_t: float,
                              sic_known_ok: bool = False,
                              tol: float = SDP_TOL) -> SdpState | None:
    """Feasibility of the rank-relaxed probe at rate target ``r0_t``.

    Solves the exact convex reformulation: minimize the transmit power the
    probe requires over all phase Gram matrices, then compare against the
    budget. Returns a feasible state, or None when the budget cannot be met.
    Raises SolverStallError when the SDP solve fails its residual targets.
    """
    if r0_t < 0:
        raise ConvexCoreError("rate target must be nonnegative")
    probn, _ = _normalized(prob)
    if not sic_known_ok and not _sic_attainable(probn):
        return None
    problem, handles = _build_probe_sdp(probn, r0_t, "power", include_budget=False)
    result = sdp.solve_sdp(problem, tol=tol)
    if result.status != sdp.OPTIMAL:
        raise SolverStallError(
            f"relaxed probe stalled (residual {result.max_residual:.2e})"
        )
    if result.primal_obj > prob.p_max * (1.0 + 1e-7) + 1e-15:
        return None
    return _recover_state(result, handles)


def _check_state_feasible(prob: RateCellProblem, r0: float, state: SdpState,
                          slack: float = 1e-4) -> bool:
    """Loose sanity check that a state satisfies the probe's trace constraints."""
    lam_m = float(np.real(np.trace(prob.h_matrix("m") @ state.v))) + prob.tau_m
    lam_s = float(np.real(np.trace(prob.h_matrix("s") @ state.v))) + prob.tau_s
    ok, _, _ = _power_split(prob, r0, lam_m, lam_s, slack)
    return ok


def _power_split(prob: RateCellProblem, r0: float, lam_m: float, lam_s: float,
                 slack: float = FEAS_SLACK):
    """Minimal feasible powers for given gains; (ok, p_m, p_s)."""
    s2 = prob.sigma2
    if lam_m <= 0 or lam_s <= 0:
        return False, 0.0, 0.0
    if prob.scheme == OMA:
        p_m = (2.0 ** (2.0 * r0) - 1.0) * s2 / (2.0 * lam_m)
        p_s = (2.0 ** (2.0 * prob.rs_target) - 1.0) * s2 / (2.0 * lam_s)
    else:
        alpha = 2.0 ** r0 - 1.0
        beta = 2.0 ** prob.rs_target - 1.0
        if prob.order == SRU_STRONG:
            if lam_s < lam_m * (1.0 - slack):
                return False, 0.0, 0.0
            p_s = beta * s2 / lam_s
            p_m = alpha * (p_s + s2 / lam_m)
        else:
            if lam_m < lam_s * (1.0 - slack):
                return False, 0.0, 0.0
            p_m = alpha * s2 / lam_m
            p_s = beta * (p_m + s2 / lam_s)
    ok = p_m + p_s <= prob.p_max * (1.0 + slack)
    return ok, p_m, p_s


def extract_phases(v: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Phases of the leading eigenvector, referenced to its last entry.

    Requires the matrix to be numerically rank one; raises otherwise, and
    when the reference entry vanishes (undefined global rotation).
    """
    gap, spectral = dc_gap(v)
    if spectral <= 0 or gap > rank_tol * spectral:
        raise ConvexCoreError(
            f"matrix is not rank one (normalized defect {gap / max(spectral, 1e-300):.2e})"
        )
    w, q = np.linalg.eigh(v)
    u = q[:, -1]
    ref = u[-1]
    if abs(ref) < 1e-8 * np.linalg.norm(u):
        raise ConvexCoreError("degenerate reference entry; phases undefined")
    rotated = u * (np.conj(ref) / abs(ref))
    return wrap_phase(np.angle(rotated[:-1]))


def phase_gains(prob: RateCellProblem, theta: np.ndarray) -> tuple[float, float]:
    """Expected gains of both users for explicit unit-modulus phases."""
    v = np.append(np.exp(1j * np.asarray(theta, dtype=float)), 1.0)
    lam_m = float(np.abs(prob.row_m @ v) ** 2) + prob.tau_m
    lam_s = float(np.abs(prob.row_s @ v) ** 2) + prob.tau_s
    return lam_m, lam_s


def validate_phases(prob: RateCellProblem, r0: float, theta: np.ndarray,
                    slack: float = FEAS_SLACK):
    """Re-evaluate all probe constraints at explicit phases; (ok, p_m, p_s)."""
    lam_m, lam_s = phase_gains(prob, theta)
    return _power_split(prob, r0, lam_m, lam_s, slack)


def sca_rank_reduction(prob: RateCellProblem, r0_t: float, v0: SdpState,
                       rank_tol: float = RANK_TOL, sca_tol: float = SCA_TOL,
                       max_iter: int = MAX_SCA_ITER,
                       tol: float = SDP_TOL) -> SolveReport:
    """Drive the relaxed solution toward rank one.

    Iteratively maximizes the quadratic form of the current leading
    eigenvector over the probe's constraint set (with the power budget
    active). The difference of nuclear and spectral norms is nonincreasing
    across iterations; termination declares rank one when its normalized
    value drops below ``rank_tol``, stall when progress falls below
    ``sca_tol``.
    """
    probn, _ = _normalized(prob)
    if not _check_state_feasible(probn, r0_t, v0):
        raise ConvexCoreError("starting state violates the probe constraints")

    v = v0.v
    state = v0
    gap, spectral = dc_gap(v)
    trace = [gap]
    residuals: dict = {}
    iters = 0

    while True:
        if gap <= rank_tol * spectral:
            status = RANK_ONE
            break
        if iters >= max_iter:
            status = STALLED
            break
        _, q = np.linalg.eigh(v)
        u = q[:, -1]
        problem, handles = _build_probe_sdp(
            probn, r0_t, ("sca", u), include_budget=True
        )
        result = sdp.solve_sdp(problem, tol=tol)
        if result.status != sdp.OPTIMAL:
            status = STALLED
            residuals = {"primal": result.primal_res, "dual": result.dual_res,
                         "gap": result.rel_gap}
            break
        state = _recover_state(result, handles)
        v = state.v
        iters += 1
        residuals = {"primal": result.primal_res, "dual": result.dual_res,
                     "gap": result.rel_gap}
        gap, spectral = dc_gap(v)
        trace.append(gap)
        if len(trace) >= 2 and abs(trace[-2] - trace[-1]) < sca_tol:
            status = RANK_ONE if gap <= rank_tol * spectral else STALLED
            break

    return SolveReport(
        status=status,
        iterations=iters,
        residuals=residuals,
        dc_gap=gap,
        objective_trace=tuple(trace),
        state=state,
    )


def _probe(prob_raw: RateCellProblem, probn: RateCellProblem, r0: float,
           rank_tol: float, sca_tol: float, max_sca_iter: int, tol: float):
    """One bisection probe; returns (ProbeRecord, feasible-state-or-None)."""
    try:
        problem, handles = _build_probe_sdp(probn, r0, "power", include_budget=False)
        result = sdp.solve_sdp(problem, tol=tol)
        if result.status != sdp.OPTIMAL:
            raise SolverStallError("relaxed probe stalled")
    except SolverStallError:
        rec = ProbeRecord(r0, False, STALLED, None, 0, math.inf, ())
        return rec, None
    if result.primal_obj > probn.p_max * (1.0 + 1e-7) + 1e-15:
        rec = ProbeRecord(r0, False, INFEASIBLE, None, 0, math.inf, ())
        return rec, None

    state0 = _recover_state(result, handles)
    report = sca_rank_reduction(
        probn, r0, state0, rank_tol=rank_tol, sca_tol=sca_tol,
        max_iter=max_sca_iter, tol=tol,
    )
    if report.status != RANK_ONE:
        rec = ProbeRecord(r0, False, FEASIBLE, report.status, report.iterations,
                          report.dc_gap, report.objective_trace)
        return rec, None

    try:
        theta = extract_phases(report.state.v, rank_tol)
        ok, p_m, p_s = validate_phases(probn, r0, theta)
    except ConvexCoreError:
        ok = False
    rec = ProbeRecord(r0, ok, FEASIBLE, RANK_ONE, report.iterations,
                      report.dc_gap, report.objective_trace, validated=ok)
    if not ok:
        return rec, None
    return rec, (SdpState(v=report.state.v, p_m=p_m, p_s=p_s), theta)


def _rate_cap(prob: RateCellProblem) -> float:
    """Upper bound on the mobile user's achievable rate target."""
    cap = prob.gain_cap("m")
    if prob.scheme == OMA:
        return 0.5 * math.log2(1.0 + 2.0 * cap * prob.p_max / prob.sigma2)
    return math.log2(1.0 + cap * prob.p_max / prob.sigma2)


def _bisection(prob: RateCellProblem, eps0: float, rank_tol: float,
               sca_tol: float, max_sca_iter: int, tol: float) -> CellSolve:
    probn, _ = _normalized(prob)
    probes: list[ProbeRecord] = []
    stalls = 0

    if prob.scheme == NOMA and not _sic_attainable(probn):
        logger.debug("probe order=%s: decoding order unattainable", prob.order)
        return CellSolve(INFEASIBLE, 0.0, None, None, (), 0)

    # Cheap necessary condition: the static user alone must be servable.
    beta = (2.0 ** (2.0 * prob.rs_target) - 1.0) / 2.0 if prob.scheme == OMA \
        else 2.0 ** prob.rs_target - 1.0
    if beta * prob.sigma2 / prob.gain_cap("s") > prob.p_max:
        return CellSolve(INFEASIBLE, 0.0, None, None, (), 0)

    def run_probe(r0: float):
        nonlocal stalls
        rec, hit = _probe(prob, probn, r0, rank_tol, sca_tol, max_sca_iter, tol)
        probes.append(rec)
        if rec.relaxed_status == STALLED or rec.sca_status == STALLED:
            stalls += 1
        logger.debug(
            "probe scheme=%s order=%s r0=%.5f feasible=%s relaxed=%s sca=%s "
            "iters=%d dc_gap=%.2e",
            prob.scheme, prob.order, r0, rec.feasible, rec.relaxed_status,
            rec.sca_status, rec.sca_iterations, rec.dc_gap,
        )
        return hit

    best = run_probe(0.0)
    if best is None:
        return CellSolve(INFEASIBLE, 0.0, None, None, tuple(probes), stalls)

    r_lo, r_hi = 0.0, _rate_cap(prob)
    while r_hi - r_lo >= eps0:
        mid = (r_lo + r_hi) / 2.0
        hit = run_probe(mid)
        if hit is None:
            r_hi = mid
        else:
            r_lo = mid
            best = hit
    state, theta = best
    return CellSolve(FEASIBLE, r_lo, state, theta, tuple(probes), stalls)


def bisection_max_rate(prob: RateCellProblem, eps0: float = EPS0,
                       rank_tol: float = RANK_TOL, sca_tol: float = SCA_TOL,
                       max_sca_iter: int = MAX_SCA_ITER,
                       tol: float = SDP_TOL) -> CellSolve:
    """Largest feasible mobile-user rate for one NOMA decoding order."""
    if prob.scheme != NOMA:
        raise ConvexCoreError("bisection_max_rate expects a NOMA problem")
    return _bisection(prob, eps0, rank_tol, sca_tol, max_sca_iter, tol)


def solve_oma_cell(prob: RateCellProblem, eps0: float = EPS0,
                   rank_tol: float = RANK_TOL, sca_tol: float = SCA_TOL,
                   max_sca_iter: int = MAX_SCA_ITER,
                   tol: float = SDP_TOL) -> CellSolve:
    """Largest feasible mobile-user rate under orthogonal access."""
    if prob.scheme != OMA:
        raise ConvexCoreError("solve_oma_cell expects an OMA problem")
    return _bisection(prob, eps0, rank_tol, sca_tol, max_sca_iter, tol)
