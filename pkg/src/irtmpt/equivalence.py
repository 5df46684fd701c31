"""Observational-equivalence transforms and the constructive pair generator.

A pair of parameter vectors is observationally equivalent when every
(respondent, item) cell produces the same category distribution.  The family
implemented here rescales the word-level failure probabilities by a factor
eta (psi8' = 1 - (1-psi8)/eta, psi6' = 1 - eta*(1-psi6), ...) and rebalances
psi2 against psi3 through a second factor xi.  Such a transform can stay
inside the IRT model family only when the process-6 abilities or difficulties
are degenerate; the generator builds parameter vectors of exactly that shape,
together with a transformed partner, and verifies the equivalence numerically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.special import logit

from .errors import (
    DimensionMismatchError,
    DomainError,
    GenerationError,
    InternalConsistencyError,
    NonCanonicalError,
    RangeViolationError,
)
from .forward import check_necessary_equalities, distribution_table
from .params import (
    PROCESS_IDS,
    AdditiveFit,
    IrtParams,
    ModelDims,
    PsiTable,
    additive_decompose,
    build_psi_table,
    params_from_obj,
    params_to_obj,
    table_from_obj,
    table_to_obj,
)

# psi6 cells above this make the per-cell eta cap unbounded; they are excluded
# from the minimum.
PSI6_CAP_GUARD = 1.0 - 1e-9

# Structural tolerance for "depends only on t" / "only on k" checks.
STRUCTURE_ATOL = 1e-9

# Verified pairs must differ by at least this much somewhere in psi space.
MIN_SEPARATION = 1e-3

DIST_TOL = 1e-12

_COL6 = PROCESS_IDS.index(6)


class CaseLabel(enum.Enum):
    """Degeneracy pattern of the process-6 abilities/difficulties."""

    THETA6_ZERO = "theta6-zero"
    DELTA6_ZERO = "delta6-zero"
    BOTH_ZERO = "both-zero"
    NEITHER = "neither"


@dataclass(frozen=True)
class EtaXiTransform:
    """An (eta, xi) pair; xi may be a scalar or a per-respondent vector.

    For a transform that is part of a genuine equivalence, xi sits on the
    opposite side of 1 from eta; the identity is eta = xi = 1.
    """

    eta: float
    xi: float | npt.NDArray[np.float64]

    def __post_init__(self):
        eta = float(self.eta)
        if not np.isfinite(eta) or eta <= 0.0:
            raise DomainError(f"eta must be positive and finite, got {eta!r}")
        xi = np.asarray(self.xi, dtype=float)
        if np.any(xi <= 0.0) or not np.all(np.isfinite(xi)):
            raise DomainError("xi must be positive and finite")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "xi", float(xi) if xi.ndim == 0 else xi)

    def xi_vector(self, T: int) -> np.ndarray:
        xi = np.asarray(self.xi, dtype=float)
        if xi.ndim == 0:
            return np.full(T, float(xi))
        if xi.shape != (T,):
            raise DimensionMismatchError(f"xi must be scalar or length {T}")
        return xi

    def is_identity(self) -> bool:
        return self.eta == 1.0 and bool(np.all(np.asarray(self.xi) == 1.0))


@dataclass(frozen=True)
class TransformResult:
    """Transformed table plus the xi-constancy diagnostic.

    ``xi_cells`` holds the per-cell ratio psi3'/psi3 implied by eta alone;
    cells where it disagrees with the supplied xi beyond ``xi_tol`` are listed
    in ``xi_violations`` (such a table is not equivalent to the input).
    """

    table: PsiTable
    xi_cells: np.ndarray
    xi_violations: tuple[tuple[int, int], ...]
    max_xi_deviation: float


def _cap_cells(psi6: np.ndarray, m: np.ndarray) -> float:
    """min over cells of (1 - psi6*m)/(1 - psi6), excluding near-1 psi6 cells."""
    caps = np.where(
        psi6 > PSI6_CAP_GUARD, np.inf, (1.0 - psi6 * m) / (1.0 - psi6)
    )
    return float(np.min(caps))


def eta_range(table: PsiTable) -> tuple[float, float]:
    """Admissible eta interval for an arbitrary table.

    The lower end keeps psi8' and every psi7' positive; the upper end keeps
    psi4' and the implied psi2' below 1 in every cell.  For strictly interior
    tables the interval always contains 1 (only eta != 1 transforms anything).
    """
    lo = max(1.0 - table.psi8, float(np.max(1.0 - table.psi7)))
    p2 = table.psi2[:, None]
    m = np.maximum(table.psi4, p2 * (1.0 - table.psi3) / (1.0 - p2 * table.psi3))
    return lo, _cap_cells(table.psi6, m)


def _is_k_only(arr: np.ndarray) -> bool:
    return bool(np.max(np.ptp(arr, axis=0), initial=0.0) <= STRUCTURE_ATOL)


def _is_t_only(arr: np.ndarray) -> bool:
    return bool(np.max(np.ptp(arr, axis=1), initial=0.0) <= STRUCTURE_ATOL)


def _check_generator_structure(table: PsiTable) -> None:
    parts = (table.psi3, table.psi4, table.psi6)
    if not (all(map(_is_k_only, parts)) or all(map(_is_t_only, parts))):
        raise DomainError(
            "generator ranges need psi3/psi4/psi6 to depend on the item only "
            "or on the respondent only"
        )


def generator_eta_range(table: PsiTable) -> tuple[float, float]:
    """Eta interval safe for *any* psi3 the generator may later compute.

    Identical to :func:`eta_range` except that the psi2-driven cap uses psi2
    itself (its supremum over possible psi3 values), so the bound does not
    depend on psi3.  Requires the one-sided dependence structure.
    """
    _check_generator_structure(table)
    lo = max(1.0 - table.psi8, float(np.max(1.0 - table.psi7)))
    m = np.maximum(table.psi4, table.psi2[:, None])
    return lo, _cap_cells(table.psi6, m)


def _xi_bounds(eta: float, psi6k: np.ndarray) -> tuple[float, float]:
    bounds = (1.0 - eta + eta * psi6k) / psi6k
    if eta < 1.0:
        return 1.0, float(np.min(bounds))
    return float(np.max(bounds)), 1.0


def xi_range(eta: float, table: PsiTable) -> tuple[float, float]:
    """Admissible xi interval given eta, for tables with item-only psi6.

    For eta < 1 the interval is (1, min_k (1 - eta + eta*psi6_k)/psi6_k);
    for eta > 1 it mirrors to (max_k ..., 1).  eta = 1 is rejected: no
    non-trivial transform exists there.
    """
    if eta == 1.0:
        raise DomainError("eta = 1 admits no non-trivial transform")
    if eta <= 0.0:
        raise DomainError(f"eta must be positive, got {eta!r}")
    if not _is_k_only(table.psi6):
        raise DomainError("xi_range needs item-only psi6")
    return _xi_bounds(eta, table.psi6[0, :])


def apply_transform(
    table: PsiTable, tr: EtaXiTransform, xi_tol: float = 1e-12
) -> TransformResult:
    """Transform every cell of a table by (eta, xi).

    Raises :class:`RangeViolationError` if any transformed probability leaves
    (0, 1).  The result also reports where the supplied xi disagrees with the
    per-cell ratio implied by eta; a clean equivalence has no such cells.
    """
    T, K = table.T, table.K
    if tr.is_identity():
        return TransformResult(
            table=table,
            xi_cells=np.ones((T, K)),
            xi_violations=(),
            max_xi_deviation=0.0,
        )
    eta = tr.eta
    xi_t = tr.xi_vector(T)

    def _check(name: str, value: np.ndarray | float, where: str = "") -> None:
        arr = np.asarray(value)
        if np.any(arr <= 0.0) or np.any(arr >= 1.0):
            bad = np.argwhere((arr <= 0.0) | (arr >= 1.0))
            pos = tuple(int(i) for i in bad[0]) if arr.ndim else ()
            idx = "" if arr.ndim == 0 else str(pos)
            val = float(arr) if arr.ndim == 0 else float(arr[pos])
            raise RangeViolationError(f"{name}{idx}", val, f"open interval (0, 1){where}")

    psi8p = 1.0 - (1.0 - table.psi8) / eta
    _check("psi8'", psi8p, "; requires eta > 1 - psi8")
    psi7p = 1.0 - (1.0 - table.psi7) / eta
    _check("psi7'", psi7p, "; requires eta > 1 - psi7_k")
    psi6p = 1.0 - eta * (1.0 - table.psi6)
    _check("psi6'", psi6p, "; requires eta < 1/(1 - psi6)")
    denom = (1.0 - table.psi3) * table.psi6 + table.psi3 * psi6p
    psi3p = table.psi3 * psi6p / denom
    _check("psi3'", psi3p)
    psi4p = table.psi4 * table.psi6 / psi6p
    _check("psi4'", psi4p, "; requires eta < (1 - psi4*psi6)/(1 - psi6)")
    psi2p = table.psi2 / xi_t
    _check("psi2'", psi2p, "; requires xi > psi2_t")

    xi_cells = psi3p / table.psi3
    deviation = np.abs(psi3p - xi_t[:, None] * table.psi3)
    bad_cells = np.argwhere(deviation > xi_tol)
    out = PsiTable(
        psi1=table.psi1.copy(),
        psi2=psi2p,
        psi3=psi3p,
        psi4=psi4p,
        psi5=table.psi5.copy(),
        psi6=psi6p,
        psi7=psi7p,
        psi8=float(psi8p),
    )
    return TransformResult(
        table=out,
        xi_cells=xi_cells,
        xi_violations=tuple((int(t), int(k)) for t, k in bad_cells),
        max_xi_deviation=float(np.max(deviation)),
    )


def classify_case(params: IrtParams, tol: float = 1e-8) -> CaseLabel:
    """Degeneracy pattern of the canonical process-6 columns."""
    if not params.is_canonical():
        raise NonCanonicalError("classify_case requires canonicalized parameters")
    theta_zero = float(np.max(np.abs(params.theta[:, _COL6]))) <= tol
    delta_zero = float(np.max(np.abs(params.delta[:, _COL6]))) <= tol
    if theta_zero and delta_zero:
        return CaseLabel.BOTH_ZERO
    if theta_zero:
        return CaseLabel.THETA6_ZERO
    if delta_zero:
        return CaseLabel.DELTA6_ZERO
    return CaseLabel.NEITHER


@dataclass(frozen=True)
class PairVerification:
    """Distances between two tables: observable (distribution) and parameter."""

    max_dist_distribution: float
    max_dist_params: float
    tol: float
    passed: bool


def verify_pair(a: PsiTable, b: PsiTable, tol: float = DIST_TOL) -> PairVerification:
    """Max per-cell L-infinity distance between category distributions."""
    if (a.T, a.K) != (b.T, b.K):
        raise DimensionMismatchError(
            f"tables have dims ({a.T}, {a.K}) vs ({b.T}, {b.K})"
        )
    dist = float(np.max(np.abs(distribution_table(a) - distribution_table(b))))
    return PairVerification(
        max_dist_distribution=dist,
        max_dist_params=a.max_abs_difference(b),
        tol=tol,
        passed=dist <= tol,
    )


@dataclass(frozen=True)
class EquivalentPair:
    """A verified observationally-equivalent pair.

    ``omega`` is an IRT parameter vector, ``omega_prime_table`` its transformed
    partner; ``omega_prime`` is the partner lifted back to IRT coordinates
    (always succeeds for generated pairs).
    """

    omega: IrtParams
    omega_table: PsiTable
    omega_prime_table: PsiTable
    omega_prime: IrtParams | None
    transform: EtaXiTransform
    case: CaseLabel
    verification: PairVerification


def _centered_column(values: np.ndarray) -> tuple[np.ndarray, float]:
    """Split a vector into a sum-zero part and its mean."""
    mean = float(values.mean())
    return values - mean, mean


def _k_only_column(psi_k: np.ndarray) -> tuple[np.ndarray, float]:
    """delta column and beta reproducing an item-only psi (theta = 0)."""
    x = logit(psi_k)
    beta = float(x.mean())
    return beta - x, beta


def _t_only_column(psi_t: np.ndarray) -> tuple[np.ndarray, float]:
    """theta column and beta reproducing a respondent-only psi (delta = 0)."""
    x = logit(psi_t)
    beta = float(x.mean())
    return x - beta, beta


def lift_table(table: PsiTable, tol: float = 1e-9) -> tuple[IrtParams | None, dict[int, AdditiveFit]]:
    """Lift a psi table to IRT coordinates via additive fits of the logits.

    Returns (params, fits); params is None when any linked process fails the
    additive fit at ``tol``.
    """
    fits: dict[int, AdditiveFit] = {}
    arrays = {1: table.psi1, 3: table.psi3, 4: table.psi4, 5: table.psi5, 6: table.psi6}
    for s in PROCESS_IDS:
        fits[s] = additive_decompose(logit(arrays[s]), tol=tol)
    if not all(f.ok for f in fits.values()):
        return None, fits
    theta = np.column_stack([fits[s].theta for s in PROCESS_IDS])
    delta = np.column_stack([fits[s].delta for s in PROCESS_IDS])
    beta = np.array([fits[s].beta for s in PROCESS_IDS])
    params = IrtParams(
        theta=theta, delta=delta, beta=beta,
        psi2=table.psi2.copy(), psi7=table.psi7.copy(), psi8=table.psi8,
    )
    return params, fits


def _inset(rng: np.random.Generator, lo: float, hi: float) -> float:
    """Uniform draw over the middle 80% of (lo, hi); keeps results off the ends."""
    return lo + (0.1 + 0.8 * rng.uniform()) * (hi - lo)


def generate_nonidentifiable(
    dims: ModelDims,
    case: CaseLabel,
    seed: int,
    eta_margin: float = 0.05,
    retry_limit: int = 1000,
) -> EquivalentPair:
    """Construct a verified equivalent pair of the requested degeneracy case.

    Base probabilities are drawn uniformly on (0.15, 0.85) from a single
    stream seeded by ``seed``; processes 1 and 5 get additive logits so omega
    lies in the model family.  eta is drawn from the generator range with
    |eta - 1| >= eta_margin (preferring eta < 1), xi from its range given eta
    (item-degenerate cases) or implied per respondent (delta6-zero).  Draws
    are repeated up to ``retry_limit`` times if a range comes up empty.
    """
    T, K = ModelDims(*dims).validate()
    if case == CaseLabel.NEITHER:
        raise DomainError("no equivalence transform exists for the 'neither' case")
    if not 0.0 < eta_margin < 0.5:
        raise DomainError(f"eta_margin must lie in (0, 0.5), got {eta_margin!r}")
    rng = np.random.default_rng(seed)
    last_reason = "no attempt made"

    for _ in range(retry_limit):
        pair = _attempt(rng, T, K, case, eta_margin)
        if isinstance(pair, str):
            last_reason = pair
            continue
        return pair
    raise GenerationError(
        f"exhausted {retry_limit} attempts for case {case.value} at T={T}, K={K} "
        f"(margin {eta_margin}); last failure: {last_reason}"
    )


def _attempt(
    rng: np.random.Generator, T: int, K: int, case: CaseLabel, margin: float
) -> EquivalentPair | str:
    """One generation attempt; returns a failure reason string to trigger a retry."""
    u = lambda size=None: rng.uniform(0.15, 0.85, size)
    psi8 = float(u())
    psi7 = u(K)
    if case == CaseLabel.THETA6_ZERO:
        psi6_base, psi4_base = u(K), u(K)
        psi3_base = None
    elif case == CaseLabel.DELTA6_ZERO:
        psi6_base, psi4_base, psi3_base = u(T), u(T), u(T)
    else:
        psi6_base, psi4_base = np.full(K, float(u())), np.full(K, float(u()))
        psi3_base = None
    psi2 = u(T)
    theta1, delta1, beta1 = rng.uniform(-1, 1, T), rng.uniform(-1, 1, K), rng.uniform(-0.5, 0.5)
    theta5, delta5, beta5 = rng.uniform(-1, 1, T), rng.uniform(-1, 1, K), rng.uniform(-0.5, 0.5)

    item_side = case != CaseLabel.DELTA6_ZERO
    psi6_cells = (
        np.broadcast_to(psi6_base[None, :], (T, K))
        if item_side
        else np.broadcast_to(psi6_base[:, None], (T, K))
    )
    psi4_cells = (
        np.broadcast_to(psi4_base[None, :], (T, K))
        if item_side
        else np.broadcast_to(psi4_base[:, None], (T, K))
    )
    lo = max(1.0 - psi8, float(np.max(1.0 - psi7)))
    hi = _cap_cells(psi6_cells, np.maximum(psi4_cells, psi2[:, None]))
    if lo < 1.0 - margin:
        eta = _inset(rng, lo, 1.0 - margin)
    elif 1.0 + margin < hi:
        eta = _inset(rng, 1.0 + margin, hi)
    else:
        return f"no eta with |eta-1| >= {margin} inside ({lo:.4g}, {hi:.4g})"

    if item_side:
        # Draw xi, then the item-only psi3 that makes xi the exact psi2/psi2' ratio.
        xi_lo, xi_hi = _xi_bounds(eta, psi6_base)
        if not xi_lo < xi_hi:
            return f"empty xi interval at eta={eta:.4g}"
        xi = _inset(rng, xi_lo, xi_hi)
        a6 = 1.0 - eta * (1.0 - psi6_base)
        psi3_base = (a6 / xi - psi6_base) / ((1.0 - eta) * (1.0 - psi6_base))
        if np.any(psi3_base <= 0.0) or np.any(psi3_base >= 1.0):
            return "computed psi3 left (0, 1)"
        transform = EtaXiTransform(eta=eta, xi=float(xi))
    else:
        # psi3 was drawn; the per-respondent xi is implied by eta.
        a6 = 1.0 - eta * (1.0 - psi6_base)
        psi3p = psi3_base * a6 / ((1.0 - psi3_base) * psi6_base + psi3_base * a6)
        xi_t = psi3p / psi3_base
        if np.any(psi2 / xi_t >= 1.0):
            return "implied xi pushes psi2' to 1"
        transform = EtaXiTransform(eta=eta, xi=xi_t)

    omega = _assemble_params(
        case, T, K, theta1, delta1, beta1, theta5, delta5, beta5,
        psi2, psi3_base, psi4_base, psi6_base, psi7, psi8,
    )
    omega_table = build_psi_table(omega)
    try:
        result = apply_transform(omega_table, transform)
    except RangeViolationError as exc:
        return f"transform left range: {exc}"
    prime_table = result.table
    if result.max_xi_deviation > 1e-10:
        raise InternalConsistencyError(
            f"xi-constancy violated by construction: {result.max_xi_deviation}"
        )

    verification = verify_pair(omega_table, prime_table, tol=DIST_TOL)
    if verification.max_dist_params < MIN_SEPARATION:
        return f"tables too close ({verification.max_dist_params:.3g})"
    if classify_case(omega) != case:
        return "degenerate draw changed the case label"
    if not verification.passed:
        raise InternalConsistencyError(
            f"constructed pair not equivalent: distribution distance "
            f"{verification.max_dist_distribution}"
        )
    equalities = check_necessary_equalities(omega_table, prime_table, tol=1e-12)
    if not equalities.passed:
        raise InternalConsistencyError(
            f"necessary equalities fail on constructed pair: {equalities.discrepancies}"
        )
    omega_prime, fits = lift_table(prime_table)
    if omega_prime is None:
        worst = max(f.max_residual for f in fits.values())
        raise InternalConsistencyError(
            f"transformed table not representable in IRT coordinates "
            f"(max additive residual {worst})"
        )
    return EquivalentPair(
        omega=omega,
        omega_table=omega_table,
        omega_prime_table=prime_table,
        omega_prime=omega_prime,
        transform=transform,
        case=case,
        verification=verification,
    )


def _assemble_params(
    case, T, K, theta1, delta1, beta1, theta5, delta5, beta5,
    psi2, psi3_base, psi4_base, psi6_base, psi7, psi8,
) -> IrtParams:
    theta = np.zeros((T, len(PROCESS_IDS)))
    delta = np.zeros((K, len(PROCESS_IDS)))
    beta = np.zeros(len(PROCESS_IDS))

    for col, th, de, be in ((0, theta1, delta1, beta1), (3, theta5, delta5, beta5)):
        th_c, th_m = _centered_column(th)
        de_c, de_m = _centered_column(de)
        theta[:, col] = th_c
        delta[:, col] = de_c
        beta[col] = be + th_m - de_m

    one_sided = {1: psi3_base, 2: psi4_base, 4: psi6_base}  # columns for s = 3, 4, 6
    for col, base in one_sided.items():
        if case == CaseLabel.DELTA6_ZERO:
            theta[:, col], beta[col] = _t_only_column(base)
        else:
            delta[:, col], beta[col] = _k_only_column(base)
    return IrtParams(theta=theta, delta=delta, beta=beta, psi2=psi2, psi7=psi7, psi8=psi8)


# -- pair bundle serialization ------------------------------------------------

def pair_to_obj(pair: EquivalentPair) -> dict:
    obj = {
        "omega": params_to_obj(pair.omega),
        "omega_prime_table": table_to_obj(pair.omega_prime_table),
        "eta": pair.transform.eta,
    }
    xi = np.asarray(pair.transform.xi)
    if xi.ndim == 0:
        obj["xi"] = float(xi)
    else:
        obj["xi_per_t"] = xi
    obj["case"] = pair.case.value
    obj["verification"] = {
        "max_dist_distribution": pair.verification.max_dist_distribution,
        "max_dist_params": pair.verification.max_dist_params,
    }
    return obj


def bundle_tables(obj: dict, context: str = "bundle") -> tuple[PsiTable, PsiTable]:
    """Both members of a serialized pair bundle, as psi tables."""
    from .fileio import require

    omega = params_from_obj(require(obj, "omega", context), context=f"{context}.omega")
    prime = table_from_obj(
        require(obj, "omega_prime_table", context), context=f"{context}.omega_prime_table"
    )
    return build_psi_table(omega), prime
