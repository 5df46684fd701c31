"""IRT parameter space: logit link, gauge fixing, psi tables, coordinate flattening.

Five processes (1, 3, 4, 5, 6) are parameterized by respondent ability theta,
item difficulty delta, and an intercept beta through a logit link.  Process 2
is a free probability per respondent, process 7 per item, process 8 global.
Adding a constant to a theta column and another to the matching delta column
while shifting beta by their difference leaves every psi unchanged; the
sum-to-zero canonical form fixes that translation freedom.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit, logit as _logit

from .errors import (
    DataFormatError,
    DimensionMismatchError,
    DomainError,
    NonCanonicalError,
)
from . import fileio

# Processes carrying the theta/delta/beta link, in column order.
PROCESS_IDS: tuple[int, ...] = (1, 3, 4, 5, 6)
N_LINKED = len(PROCESS_IDS)

_P_LO = np.nextafter(0.0, 1.0)
_P_HI = np.nextafter(1.0, 0.0)

# |column sum| below this counts as canonical (sum-to-zero).
CANONICAL_ATOL = 1e-8


class ModelDims(NamedTuple):
    """Respondent/item counts; the case analysis needs at least two of each."""

    T: int
    K: int

    def validate(self) -> "ModelDims":
        if self.T < 2 or self.K < 2:
            raise DomainError(f"need T >= 2 and K >= 2, got T={self.T}, K={self.K}")
        return self


def link(theta_ts: float, delta_ks: float, beta_s: float) -> float:
    """psi = logistic(theta - delta + beta), clamped strictly inside (0, 1)."""
    x = np.asarray(theta_ts - delta_ks + beta_s, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("link arguments must be finite")
    return float(np.clip(expit(x), _P_LO, _P_HI))


def logit(p):
    return _logit(p)


@dataclass(frozen=True)
class IrtParams:
    """Full parameter vector.

    theta: (T, 5) respondent abilities, columns ordered as PROCESS_IDS.
    delta: (K, 5) item difficulties, same column order.
    beta:  (5,) intercepts.
    psi2:  (T,) free probabilities, psi7: (K,), psi8: scalar, all open (0, 1).
    """

    theta: np.ndarray
    delta: np.ndarray
    beta: np.ndarray
    psi2: np.ndarray
    psi7: np.ndarray
    psi8: float

    def __post_init__(self):
        theta = np.atleast_2d(np.asarray(self.theta, dtype=float))
        delta = np.atleast_2d(np.asarray(self.delta, dtype=float))
        beta = np.asarray(self.beta, dtype=float).reshape(-1)
        psi2 = np.asarray(self.psi2, dtype=float).reshape(-1)
        psi7 = np.asarray(self.psi7, dtype=float).reshape(-1)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "psi2", psi2)
        object.__setattr__(self, "psi7", psi7)
        object.__setattr__(self, "psi8", float(self.psi8))
        if theta.shape[1] != N_LINKED or delta.shape[1] != N_LINKED:
            raise DimensionMismatchError(
                f"theta/delta need {N_LINKED} process columns, got "
                f"{theta.shape} and {delta.shape}"
            )
        if beta.shape != (N_LINKED,):
            raise DimensionMismatchError(f"beta must have shape (5,), got {beta.shape}")
        if psi2.shape != (theta.shape[0],):
            raise DimensionMismatchError("psi2 length must equal respondent count")
        if psi7.shape != (delta.shape[0],):
            raise DimensionMismatchError("psi7 length must equal item count")
        for name, arr in (("theta", theta), ("delta", delta), ("beta", beta)):
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} must be finite")
        free = np.concatenate([psi2, psi7, [self.psi8]])
        if np.any(free <= 0.0) or np.any(free >= 1.0):
            raise DomainError("psi2/psi7/psi8 must lie strictly inside (0, 1)")

    @property
    def T(self) -> int:
        return self.theta.shape[0]

    @property
    def K(self) -> int:
        return self.delta.shape[0]

    def dims(self) -> ModelDims:
        return ModelDims(self.T, self.K).validate()

    def is_canonical(self, atol: float = CANONICAL_ATOL) -> bool:
        return bool(
            np.all(np.abs(self.theta.sum(axis=0)) <= atol)
            and np.all(np.abs(self.delta.sum(axis=0)) <= atol)
        )


@dataclass(frozen=True)
class GaugeShift:
    """Per-process translation (u_s on theta, v_s on delta, v_s - u_s on beta)."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).reshape(-1)
        v = np.asarray(self.v, dtype=float).reshape(-1)
        if u.shape != (N_LINKED,) or v.shape != (N_LINKED,):
            raise DimensionMismatchError("gauge shift needs 5 entries per vector")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise DomainError("gauge shift must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)


@dataclass(frozen=True)
class PsiTable:
    """Per-cell success probabilities with their dependence structure.

    psi1, psi3, psi4, psi5, psi6 are (T, K); psi2 is (T,), psi7 (K,),
    psi8 scalar.  All entries strictly inside (0, 1).
    """

    psi1: np.ndarray
    psi2: np.ndarray
    psi3: np.ndarray
    psi4: np.ndarray
    psi5: np.ndarray
    psi6: np.ndarray
    psi7: np.ndarray
    psi8: float

    def __post_init__(self):
        T, K = np.asarray(self.psi1).shape
        for name in ("psi1", "psi3", "psi4", "psi5", "psi6"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (T, K):
                raise DimensionMismatchError(f"{name} must have shape ({T}, {K})")
            object.__setattr__(self, name, arr)
        psi2 = np.asarray(self.psi2, dtype=float).reshape(-1)
        psi7 = np.asarray(self.psi7, dtype=float).reshape(-1)
        if psi2.shape != (T,):
            raise DimensionMismatchError("psi2 must be indexed by respondent only")
        if psi7.shape != (K,):
            raise DimensionMismatchError("psi7 must be indexed by item only")
        object.__setattr__(self, "psi2", psi2)
        object.__setattr__(self, "psi7", psi7)
        object.__setattr__(self, "psi8", float(self.psi8))
        for name in ("psi1", "psi2", "psi3", "psi4", "psi5", "psi6", "psi7"):
            arr = np.asarray(getattr(self, name))
            if np.any(arr <= 0.0) or np.any(arr >= 1.0) or not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} entries must lie strictly inside (0, 1)")
        if not 0.0 < self.psi8 < 1.0:
            raise DomainError("psi8 must lie strictly inside (0, 1)")

    @property
    def T(self) -> int:
        return self.psi1.shape[0]

    @property
    def K(self) -> int:
        return self.psi1.shape[1]

    def cell(self, t: int, k: int) -> np.ndarray:
        """The 8-vector (psi_1 .. psi_8) for one cell."""
        return np.array(
            [
                self.psi1[t, k], self.psi2[t], self.psi3[t, k], self.psi4[t, k],
                self.psi5[t, k], self.psi6[t, k], self.psi7[k], self.psi8,
            ]
        )

    def cells(self) -> np.ndarray:
        """(T, K, 8) array of per-cell psi vectors."""
        T, K = self.psi1.shape
        out = np.empty((T, K, 8))
        out[:, :, 0] = self.psi1
        out[:, :, 1] = self.psi2[:, None]
        out[:, :, 2] = self.psi3
        out[:, :, 3] = self.psi4
        out[:, :, 4] = self.psi5
        out[:, :, 5] = self.psi6
        out[:, :, 6] = self.psi7[None, :]
        out[:, :, 7] = self.psi8
        return out

    def max_abs_difference(self, other: "PsiTable") -> float:
        if (self.T, self.K) != (other.T, other.K):
            raise DimensionMismatchError("tables have different dims")
        return float(np.max(np.abs(self.cells() - other.cells())))


def build_psi_table(params: IrtParams) -> PsiTable:
    """Apply the logit link for the five linked processes; copy the free ones."""
    linked = {}
    for c, s in enumerate(PROCESS_IDS):
        x = params.theta[:, c][:, None] - params.delta[:, c][None, :] + params.beta[c]
        linked[s] = np.clip(expit(x), _P_LO, _P_HI)
    return PsiTable(
        psi1=linked[1],
        psi2=params.psi2.copy(),
        psi3=linked[3],
        psi4=linked[4],
        psi5=linked[5],
        psi6=linked[6],
        psi7=params.psi7.copy(),
        psi8=params.psi8,
    )


def gauge_shift(params: IrtParams, shift: GaugeShift) -> IrtParams:
    """Translate (theta, delta, beta) along the psi-preserving direction."""
    return IrtParams(
        theta=params.theta + shift.u[None, :],
        delta=params.delta + shift.v[None, :],
        beta=params.beta + (shift.v - shift.u),
        psi2=params.psi2,
        psi7=params.psi7,
        psi8=params.psi8,
    )


def canonicalize(params: IrtParams) -> IrtParams:
    """Gauge-equivalent representative with sum-to-zero theta and delta columns."""
    t_mean = params.theta.mean(axis=0)
    d_mean = params.delta.mean(axis=0)
    return gauge_shift(params, GaugeShift(u=-t_mean, v=-d_mean))


def param_count(dims: ModelDims) -> int:
    """Free parameter count in canonical form: 5(T+K-1) + T + K + 1 = 6T+6K-4."""
    T, K = dims.validate()
    return 6 * T + 6 * K - 4


def coordinate_labels(dims: ModelDims) -> list[tuple]:
    """Flat coordinate layout, in order.

    Per linked process: T-1 free theta entries, K-1 free delta entries, beta;
    then T psi2 logits, K psi7 logits, one psi8 logit.
    """
    T, K = dims.validate()
    labels: list[tuple] = []
    for c, s in enumerate(PROCESS_IDS):
        labels += [("theta", c, t) for t in range(T - 1)]
        labels += [("delta", c, k) for k in range(K - 1)]
        labels.append(("beta", c))
    labels += [("psi2", t) for t in range(T)]
    labels += [("psi7", k) for k in range(K)]
    labels.append(("psi8",))
    return labels


def to_canonical_coords(params: IrtParams) -> np.ndarray:
    """Flatten canonical params; free probabilities enter as logits."""
    if not params.is_canonical():
        raise NonCanonicalError("to_canonical_coords requires sum-to-zero columns")
    dims = params.dims()
    parts = []
    for c in range(N_LINKED):
        parts.append(params.theta[: dims.T - 1, c])
        parts.append(params.delta[: dims.K - 1, c])
        parts.append([params.beta[c]])
    parts.append(_logit(params.psi2))
    parts.append(_logit(params.psi7))
    parts.append([_logit(params.psi8)])
    return np.concatenate([np.asarray(p, dtype=float) for p in parts])


def from_canonical_coords(coords: np.ndarray, dims: ModelDims) -> IrtParams:
    """Inverse of :func:`to_canonical_coords`; the dropped entries close each sum."""
    dims = dims.validate()
    coords = np.asarray(coords, dtype=float).reshape(-1)
    n = param_count(dims)
    if coords.shape != (n,):
        raise DimensionMismatchError(f"expected {n} coordinates, got {coords.shape[0]}")
    T, K = dims
    theta = np.zeros((T, N_LINKED))
    delta = np.zeros((K, N_LINKED))
    beta = np.zeros(N_LINKED)
    pos = 0
    for c in range(N_LINKED):
        theta[: T - 1, c] = coords[pos : pos + T - 1]
        theta[T - 1, c] = -theta[: T - 1, c].sum()
        pos += T - 1
        delta[: K - 1, c] = coords[pos : pos + K - 1]
        delta[K - 1, c] = -delta[: K - 1, c].sum()
        pos += K - 1
        beta[c] = coords[pos]
        pos += 1
    psi2 = expit(coords[pos : pos + T])
    pos += T
    psi7 = expit(coords[pos : pos + K])
    pos += K
    psi8 = float(expit(coords[pos]))
    return IrtParams(theta=theta, delta=delta, beta=beta, psi2=psi2, psi7=psi7, psi8=psi8)


@dataclass(frozen=True)
class AdditiveFit:
    """Result of fitting L[t, k] ~ theta_t - delta_k + beta by means.

    ``ok`` is False when the max-abs residual exceeds the tolerance; the fit
    and residual are reported either way.
    """

    theta: np.ndarray
    delta: np.ndarray
    beta: float
    max_residual: float
    ok: bool


def additive_decompose(L: np.ndarray, tol: float = 1e-9) -> AdditiveFit:
    """Row/column/grand-mean fit of an additive two-way layout.

    beta is the grand mean, theta the centered row means, delta the negated
    centered column means, so the fitted theta and delta sum to zero.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2:
        raise DimensionMismatchError(f"expected a matrix, got shape {L.shape}")
    if not np.all(np.isfinite(L)):
        raise DomainError("matrix must be finite")
    grand = L.mean()
    theta = L.mean(axis=1) - grand
    delta = -(L.mean(axis=0) - grand)
    fitted = theta[:, None] - delta[None, :] + grand
    max_residual = float(np.max(np.abs(L - fitted)))
    return AdditiveFit(
        theta=theta,
        delta=delta,
        beta=float(grand),
        max_residual=max_residual,
        ok=max_residual <= tol,
    )


# -- JSON parameter files ----------------------------------------------------

_S_KEYS = tuple(f"s{s}" for s in PROCESS_IDS)


def params_to_obj(params: IrtParams) -> dict:
    return {
        "T": params.T,
        "K": params.K,
        "theta": {key: params.theta[:, c] for c, key in enumerate(_S_KEYS)},
        "delta": {key: params.delta[:, c] for c, key in enumerate(_S_KEYS)},
        "beta": {key: float(params.beta[c]) for c, key in enumerate(_S_KEYS)},
        "psi2": params.psi2,
        "psi7": params.psi7,
        "psi8": params.psi8,
    }


def params_from_obj(obj: dict, context: str = "params") -> IrtParams:
    if not isinstance(obj, dict):
        raise DataFormatError(f"{context}: expected a JSON object")
    T = fileio.require(obj, "T", context)
    K = fileio.require(obj, "K", context)
    if not isinstance(T, int) or not isinstance(K, int) or T < 1 or K < 1:
        raise DataFormatError(f"{context}: T and K must be positive integers")
    theta = np.empty((T, N_LINKED))
    delta = np.empty((K, N_LINKED))
    beta = np.empty(N_LINKED)
    theta_obj = fileio.require(obj, "theta", context)
    delta_obj = fileio.require(obj, "delta", context)
    beta_obj = fileio.require(obj, "beta", context)
    for c, key in enumerate(_S_KEYS):
        theta[:, c] = fileio.as_float_array(
            fileio.require(theta_obj, key, f"{context}.theta"), T, f"{context}.theta.{key}"
        )
        delta[:, c] = fileio.as_float_array(
            fileio.require(delta_obj, key, f"{context}.delta"), K, f"{context}.delta.{key}"
        )
        b = fileio.require(beta_obj, key, f"{context}.beta")
        if not isinstance(b, (int, float)):
            raise DataFormatError(f"{context}.beta.{key}: expected a number")
        beta[c] = float(b)
    psi2 = fileio.as_float_array(fileio.require(obj, "psi2", context), T, f"{context}.psi2")
    psi7 = fileio.as_float_array(fileio.require(obj, "psi7", context), K, f"{context}.psi7")
    psi8 = fileio.require(obj, "psi8", context)
    if not isinstance(psi8, (int, float)):
        raise DataFormatError(f"{context}.psi8: expected a number")
    try:
        return IrtParams(theta=theta, delta=delta, beta=beta, psi2=psi2, psi7=psi7,
                         psi8=float(psi8))
    except (DomainError, DimensionMismatchError) as exc:
        raise DataFormatError(f"{context}: {exc}") from exc


def write_params(path: str, params: IrtParams) -> None:
    fileio.atomic_write_text(path, fileio.to_json(params_to_obj(params)))


def read_params(path: str) -> IrtParams:
    return params_from_obj(fileio.load_json(path), context=path)


def table_to_obj(table: PsiTable) -> dict:
    return {
        "psi1": table.psi1,
        "psi2": table.psi2,
        "psi3": table.psi3,
        "psi4": table.psi4,
        "psi5": table.psi5,
        "psi6": table.psi6,
        "psi7": table.psi7,
        "psi8": table.psi8,
    }


def table_from_obj(obj: dict, context: str = "table") -> PsiTable:
    if not isinstance(obj, dict):
        raise DataFormatError(f"{context}: expected a JSON object")
    try:
        psi1 = np.asarray(fileio.require(obj, "psi1", context), dtype=float)
        if psi1.ndim != 2:
            raise DataFormatError(f"{context}.psi1: expected a matrix")
        T, K = psi1.shape
        kwargs = {"psi1": psi1}
        for name, shape_len in (("psi3", None), ("psi4", None), ("psi5", None),
                                ("psi6", None)):
            arr = np.asarray(fileio.require(obj, name, context), dtype=float)
            if arr.shape != (T, K):
                raise DataFormatError(f"{context}.{name}: expected shape ({T}, {K})")
            kwargs[name] = arr
        kwargs["psi2"] = fileio.as_float_array(
            fileio.require(obj, "psi2", context), T, f"{context}.psi2")
        kwargs["psi7"] = fileio.as_float_array(
            fileio.require(obj, "psi7", context), K, f"{context}.psi7")
        psi8 = fileio.require(obj, "psi8", context)
        if not isinstance(psi8, (int, float)):
            raise DataFormatError(f"{context}.psi8: expected a number")
        kwargs["psi8"] = float(psi8)
        return PsiTable(**kwargs)
    except (DomainError, DimensionMismatchError) as exc:
        raise DataFormatError(f"{context}: {exc}") from exc
