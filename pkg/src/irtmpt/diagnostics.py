"""Numerical identifiability diagnostics.

Central-difference Jacobian of the canonical-coordinate -> category-probability
map, SVD rank with a relative cutoff, the multinomial Fisher information,
seeded simulation with per-cell substreams, multinomial log-likelihood, and a
bundled identifiability report.

Jacobian columns perturb one underlying entry each (a single theta or delta
component, or one free-probability logit).  The dropped last theta/delta entry
per process quotients the translation gauge; perturbing a single entry rather
than re-imposing the sum-to-zero constraint keeps every column local to one
respondent or item and spans the same column space, so the rank is unchanged.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .errors import (
    DataFormatError,
    DimensionMismatchError,
    DomainError,
    NonCanonicalError,
    RangeViolationError,
    ZeroProbabilityError,
)
from .fileio import fmt
from .forward import distribution_table
from .graph import CATEGORY_NAMES
from .params import (
    IrtParams,
    ModelDims,
    PsiTable,
    build_psi_table,
    canonicalize,
    coordinate_labels,
    param_count,
)
from . import equivalence
from .equivalence import (
    CaseLabel,
    EtaXiTransform,
    apply_transform,
    classify_case,
    eta_range,
    generator_eta_range,
    lift_table,
    verify_pair,
    xi_range,
)

PROB_FLOOR = 1e-12       # Fisher information refuses cells below this
LOGLIK_FLOOR = 1e-300    # log-likelihood refuses observed categories below this


def _perturbed(params: IrtParams, label: tuple, h: float) -> IrtParams:
    """Shift one coordinate by h: theta/delta/beta directly, psi2/7/8 in logit space."""
    kind = label[0]
    theta, delta, beta = params.theta, params.delta, params.beta
    psi2, psi7, psi8 = params.psi2, params.psi7, params.psi8
    if kind == "theta":
        theta = theta.copy()
        theta[label[2], label[1]] += h
    elif kind == "delta":
        delta = delta.copy()
        delta[label[2], label[1]] += h
    elif kind == "beta":
        beta = beta.copy()
        beta[label[1]] += h
    elif kind == "psi2":
        psi2 = psi2.copy()
        psi2[label[1]] = expit(logit(psi2[label[1]]) + h)
    elif kind == "psi7":
        psi7 = psi7.copy()
        psi7[label[1]] = expit(logit(psi7[label[1]]) + h)
    elif kind == "psi8":
        psi8 = float(expit(logit(psi8) + h))
    else:
        raise DomainError(f"unknown coordinate {label!r}")
    return IrtParams(theta=theta, delta=delta, beta=beta, psi2=psi2, psi7=psi7, psi8=psi8)


def _stacked(params: IrtParams, n_cats: int) -> np.ndarray:
    """Cell-major stack of the first n_cats category probabilities."""
    return distribution_table(build_psi_table(params))[:, :, :n_cats].ravel()


def fd_probability_column(
    params: IrtParams, label: tuple, step: float, n_cats: int = 7
) -> np.ndarray:
    """Central-difference derivative of the stacked probabilities for one coordinate."""
    plus = _stacked(_perturbed(params, label, +step), n_cats)
    minus = _stacked(_perturbed(params, label, -step), n_cats)
    return (plus - minus) / (2.0 * step)


@dataclass(frozen=True)
class JacobianMatrix:
    """rows = T*K*7 stacked probabilities (NA dropped per cell), cols = coordinates.

    Carries its evaluation point and step size so rank reports are auditable.
    """

    matrix: np.ndarray
    step: float
    dims: ModelDims
    labels: tuple[tuple, ...]
    params: IrtParams


def jacobian(params: IrtParams, step: float = 1e-5, n_cats: int = 7) -> JacobianMatrix:
    """Finite-difference Jacobian at a canonical parameter point."""
    if not params.is_canonical():
        raise NonCanonicalError("jacobian requires canonicalized parameters")
    if not 1e-8 <= step <= 1e-3:
        raise DomainError(f"step must lie in [1e-8, 1e-3], got {step!r}")
    dims = params.dims()
    labels = tuple(coordinate_labels(dims))
    cols = [fd_probability_column(params, lab, step, n_cats) for lab in labels]
    return JacobianMatrix(
        matrix=np.column_stack(cols), step=step, dims=dims, labels=labels, params=params
    )


@dataclass(frozen=True)
class RankReport:
    singular_values: np.ndarray   # descending
    rank: int
    rel_cutoff: float
    cutoff: float                 # absolute threshold actually applied
    rows: int
    cols: int
    deficiency: int               # cols - rank
    dims: ModelDims | None = None


def numerical_rank(J: JacobianMatrix | np.ndarray, rel_cutoff: float = 1e-7) -> RankReport:
    """Singular-value rank with threshold rel_cutoff * sigma_max."""
    is_jac = isinstance(J, JacobianMatrix)
    matrix = J.matrix if is_jac else np.asarray(J, dtype=float)
    s = np.linalg.svd(matrix, compute_uv=False)
    smax = float(s[0]) if s.size else 0.0
    cutoff = rel_cutoff * smax
    rank = 0 if smax == 0.0 else int(np.sum(s >= cutoff))
    return RankReport(
        singular_values=s,
        rank=rank,
        rel_cutoff=rel_cutoff,
        cutoff=cutoff,
        rows=matrix.shape[0],
        cols=matrix.shape[1],
        deficiency=matrix.shape[1] - rank,
        dims=J.dims if is_jac else None,
    )


def fisher_information(params: IrtParams, step: float = 1e-5) -> np.ndarray:
    """Multinomial information: sum over cells of Jc^T diag(1/p) Jc, all 8 categories."""
    if not params.is_canonical():
        raise NonCanonicalError("fisher_information requires canonicalized parameters")
    dims = params.dims()
    probs = distribution_table(build_psi_table(params))
    low = np.argwhere(probs < PROB_FLOOR)
    if low.size:
        t, k, c = low[0]
        raise ZeroProbabilityError(
            f"cell (t={t}, k={k}) category {CATEGORY_NAMES[c]} has probability "
            f"{probs[t, k, c]:.3g} below {PROB_FLOOR}"
        )
    J8 = jacobian(params, step=step, n_cats=8)
    weights = 1.0 / np.sqrt(probs.ravel())
    scaled = J8.matrix * weights[:, None]
    return scaled.T @ scaled


@dataclass(frozen=True)
class ResponseCounts:
    """Per-cell multinomial counts; every cell sums to n_per_cell."""

    counts: np.ndarray   # (T, K, 8) non-negative integers
    n_per_cell: int

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 3 or counts.shape[2] != 8:
            raise DimensionMismatchError(f"counts must be (T, K, 8), got {counts.shape}")
        if not np.issubdtype(counts.dtype, np.integer):
            counts = counts.astype(np.int64, casting="safe")
        if np.any(counts < 0):
            raise DomainError("counts must be non-negative")
        if np.any(counts.sum(axis=2) != self.n_per_cell):
            raise DomainError(f"every cell must sum to n_per_cell = {self.n_per_cell}")
        object.__setattr__(self, "counts", counts)

    @property
    def T(self) -> int:
        return self.counts.shape[0]

    @property
    def K(self) -> int:
        return self.counts.shape[1]


def _cell_draw(seed: int, t: int, k: int, n: int, p: np.ndarray) -> np.ndarray:
    # Counter-based generator keyed by (seed, t, k): cell draws are independent
    # of evaluation order, so any parallel schedule matches the serial result.
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, t, k))))
    return rng.multinomial(n, p / p.sum())


def simulate(
    params: IrtParams, n_per_cell: int, seed: int, workers: int = 1
) -> ResponseCounts:
    """Seeded multinomial draws from every cell's category distribution."""
    if n_per_cell < 1:
        raise DomainError(f"n_per_cell must be >= 1, got {n_per_cell}")
    if seed < 0:
        raise DomainError("seed must be a non-negative integer")
    probs = distribution_table(build_psi_table(params))
    T, K = probs.shape[:2]
    cells = [(t, k) for t in range(T) for k in range(K)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(
                pool.map(lambda tk: _cell_draw(seed, *tk, n_per_cell, probs[tk]), cells)
            )
    else:
        rows = [_cell_draw(seed, t, k, n_per_cell, probs[t, k]) for t, k in cells]
    counts = np.array(rows, dtype=np.int64).reshape(T, K, 8)
    return ResponseCounts(counts=counts, n_per_cell=n_per_cell)


def log_likelihood(table: PsiTable, data: ResponseCounts) -> float:
    """Multinomial log-likelihood of observed counts under a psi table."""
    if (table.T, table.K) != (data.T, data.K):
        raise DimensionMismatchError(
            f"table dims ({table.T}, {table.K}) vs counts dims ({data.T}, {data.K})"
        )
    probs = distribution_table(table)
    observed = data.counts > 0
    bad = observed & (probs < LOGLIK_FLOOR)
    if np.any(bad):
        t, k, c = np.argwhere(bad)[0]
        raise ZeroProbabilityError(
            f"observed category {CATEGORY_NAMES[c]} in cell (t={t}, k={k}) has "
            f"zero probability under the table"
        )
    return float(np.sum(data.counts[observed] * np.log(probs[observed])))


def counts_csv(data: ResponseCounts) -> str:
    buf = io.StringIO()
    buf.write("t,k," + ",".join(CATEGORY_NAMES) + "\n")
    for t in range(data.T):
        for k in range(data.K):
            row = ",".join(str(int(v)) for v in data.counts[t, k])
            buf.write(f"{t},{k},{row}\n")
    return buf.getvalue()


def counts_from_csv(text: str, context: str = "counts") -> ResponseCounts:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "t,k," + ",".join(CATEGORY_NAMES):
        raise DataFormatError(f"{context}: unexpected or missing header line")
    records: dict[tuple[int, int], list[int]] = {}
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 10:
            raise DataFormatError(f"{context}: line {i}: expected 10 fields")
        try:
            t, k = int(parts[0]), int(parts[1])
            vals = [int(v) for v in parts[2:]]
        except ValueError as exc:
            raise DataFormatError(f"{context}: line {i}: {exc}") from exc
        records[(t, k)] = vals
    T = 1 + max(t for t, _ in records)
    K = 1 + max(k for _, k in records)
    if len(records) != T * K:
        raise DataFormatError(f"{context}: expected {T * K} cell rows, got {len(records)}")
    counts = np.zeros((T, K, 8), dtype=np.int64)
    for (t, k), vals in records.items():
        counts[t, k] = vals
    totals = counts.sum(axis=2)
    if np.ptp(totals) != 0:
        raise DataFormatError(f"{context}: cells have unequal totals")
    return ResponseCounts(counts=counts, n_per_cell=int(totals.flat[0]))


# -- bundled report ------------------------------------------------------------

def _usable_eta(lo: float, hi: float, margin: float) -> dict:
    below = [lo, 1.0 - margin] if lo < 1.0 - margin else None
    above = [1.0 + margin, hi] if 1.0 + margin < hi else None
    return {"below_one": below, "above_one": above,
            "empty": below is None and above is None}


def _structure_ok(table: PsiTable, case: CaseLabel) -> bool:
    parts = (table.psi3, table.psi4, table.psi6)
    if case == CaseLabel.THETA6_ZERO:
        return all(equivalence._is_k_only(a) for a in parts)
    if case == CaseLabel.DELTA6_ZERO:
        return all(equivalence._is_t_only(a) for a in parts)
    if case == CaseLabel.BOTH_ZERO:
        return all(
            equivalence._is_k_only(a) and equivalence._is_t_only(a) for a in parts
        )
    return False


def _implied_transform(table: PsiTable, eta: float, case: CaseLabel) -> EtaXiTransform:
    """xi implied by eta for one-sided tables (scalar when item-degenerate)."""
    if case == CaseLabel.DELTA6_ZERO:
        psi3, psi6 = table.psi3[:, 0], table.psi6[:, 0]
    else:
        psi3, psi6 = table.psi3[0, 0], table.psi6[0, 0]
    a6 = 1.0 - eta * (1.0 - psi6)
    psi3p = psi3 * a6 / ((1.0 - psi3) * psi6 + psi3 * a6)
    xi = psi3p / psi3
    return EtaXiTransform(eta=eta, xi=xi)


def _solve_case_a_eta(table: PsiTable) -> float | None:
    """The unique eta making the implied xi item-constant, if one exists.

    With item-only psi3/psi6, pairwise constancy of (xi_k - 1)/(1 - eta) is
    linear in eta, so two items with distinct psi6 pin eta exactly.
    """
    psi3, psi6 = table.psi3[0, :], table.psi6[0, :]
    k1, k2 = int(np.argmin(psi6)), int(np.argmax(psi6))
    if abs(psi6[k2] - psi6[k1]) <= 1e-12:
        return None
    c = (1.0 - psi6) * (1.0 - psi3)
    a = psi6
    b = psi3 * (1.0 - psi6)
    den = c[k1] * b[k2] - c[k2] * b[k1]
    if abs(den) <= 1e-300:
        return None
    w = (c[k2] * a[k1] - c[k1] * a[k2]) / den
    return 1.0 - w


def _try_partner(table: PsiTable, tr: EtaXiTransform, tol: float) -> dict | None:
    try:
        result = apply_transform(table, tr)
    except (DomainError, RangeViolationError):
        return None
    if result.max_xi_deviation > 1e-9:
        return None
    verification = verify_pair(table, result.table, tol=tol)
    if not verification.passed:
        return None
    lifted, fits = lift_table(result.table)
    partner = {
        "found": True,
        "eta": tr.eta,
    }
    xi = np.asarray(tr.xi)
    if xi.ndim == 0:
        partner["xi"] = float(xi)
    else:
        partner["xi_per_t"] = xi
    partner["max_dist_distribution"] = verification.max_dist_distribution
    partner["max_dist_params"] = verification.max_dist_params
    partner["lift_ok"] = lifted is not None
    partner["lift_max_residual"] = max(f.max_residual for f in fits.values())
    return partner


def identifiability_report(
    params: IrtParams,
    case_tol: float = 1e-8,
    step: float = 1e-5,
    rel_cutoff: float = 1e-7,
    eta_margin: float = 0.05,
    tol: float = 1e-12,
    grid_points: int = 21,
) -> dict:
    """Case label, admissible ranges, Jacobian rank, and a constructed partner.

    The input is canonicalized first (a gauge move; distributions unchanged).
    A partner is attempted only when the degeneracy case and the psi3/psi4/psi6
    dependence structure admit the transform family and the margin-restricted
    eta set is non-empty.
    """
    was_canonical = params.is_canonical()
    params = params if was_canonical else canonicalize(params)
    dims = params.dims()
    case = classify_case(params, tol=case_tol)
    table = build_psi_table(params)
    lo_raw, hi_raw = eta_range(table)

    rank = numerical_rank(jacobian(params, step=step), rel_cutoff=rel_cutoff)
    spectrum = rank.singular_values
    report: dict = {
        "T": dims.T,
        "K": dims.K,
        "case": case.value,
        "canonicalized_input": not was_canonical,
        "param_count": param_count(dims),
        "eta_range": {"lo": lo_raw, "hi": hi_raw},
        "eta_margin": eta_margin,
        "rank": {
            "rank": rank.rank,
            "deficiency": rank.deficiency,
            "rel_cutoff": rank.rel_cutoff,
            "cutoff": rank.cutoff,
            "spectrum_head": spectrum[:5],
            "spectrum_tail": spectrum[-5:],
        },
    }

    if case == CaseLabel.NEITHER:
        report["partner"] = {
            "found": False,
            "reason": "no eta-transform admissible for non-degenerate "
                      "process-6 parameters",
        }
        report["summary"] = (
            f"case neither: no eta-transform admissible; "
            f"rank = {rank.rank} of {param_count(dims)}"
        )
        return report

    structure_ok = _structure_ok(table, case)
    report["transform_structure_ok"] = structure_ok
    if not structure_ok:
        report["partner"] = {
            "found": False,
            "reason": "psi3/psi4/psi6 dependence structure blocks the transform family",
        }
        report["summary"] = (
            f"case {case.value}: transform structure absent; "
            f"rank = {rank.rank} of {param_count(dims)}"
        )
        return report

    lo_gen, hi_gen = generator_eta_range(table)
    usable = _usable_eta(lo_gen, hi_gen, eta_margin)
    report["generator_eta_range"] = {"lo": lo_gen, "hi": hi_gen}
    report["usable_eta"] = usable

    partner: dict | None = None
    if case == CaseLabel.THETA6_ZERO:
        eta_star = _solve_case_a_eta(table)
        if eta_star is not None and lo_raw < eta_star < hi_raw and abs(eta_star - 1.0) > 1e-9:
            # implied xi must be item-constant at eta*; _try_partner rejects it otherwise
            psi3, psi6 = table.psi3[0, :], table.psi6[0, :]
            a6 = 1.0 - eta_star * (1.0 - psi6)
            xi_all = a6 / ((1.0 - psi3) * psi6 + psi3 * a6)
            tr = EtaXiTransform(eta=eta_star, xi=float(np.mean(xi_all)))
            partner = _try_partner(table, tr, tol)
    else:
        if not usable["empty"]:
            branch = usable["below_one"] or usable["above_one"]
            eta = 0.5 * (branch[0] + branch[1])
            partner = _try_partner(table, _implied_transform(table, eta, case), tol)

    if partner is None:
        reason = (
            "margin-restricted eta range is empty"
            if usable["empty"] and case != CaseLabel.THETA6_ZERO
            else "no admissible eta keeps the implied xi constant"
        )
        report["partner"] = {"found": False, "reason": reason}
    else:
        report["partner"] = partner
        if "xi" in partner:
            report["xi_range_at_eta"] = list(xi_range(partner["eta"], table))

    grid = np.linspace(lo_gen, hi_gen, grid_points + 2)[1:-1]
    representable = 0
    for eta in grid:
        if abs(eta - 1.0) <= 1e-9:
            continue
        candidate = _try_partner(table, _implied_transform(table, eta, case), tol)
        if candidate is not None and candidate["lift_ok"]:
            representable += 1
    report["eta_grid"] = {"points": grid_points, "representable": representable}
    found = report["partner"]["found"]
    report["summary"] = (
        f"case {case.value}: "
        + (
            f"equivalent partner found at eta = {report['partner']['eta']:.6g}"
            if found
            else f"no partner constructed ({report['partner']['reason']})"
        )
        + f"; rank = {rank.rank} of {param_count(dims)}"
    )
    return report
