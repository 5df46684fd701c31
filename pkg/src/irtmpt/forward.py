"""Closed-form category distributions and the conditional-probability algebra."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, DomainError, ZeroProbabilityError
from .fileio import fmt
from .graph import CATEGORIES, CATEGORY_NAMES, ResponseCategory
from .params import PsiTable

# Conditioning events below this probability count as impossible.
ZERO_EVENT = 1e-300


def _distribution_from_components(p1, p2, p3, p4, p5, p6, p7, p8):
    """Stack the eight category probabilities from psi components (broadcasting)."""
    shape = np.broadcast(p1, p2, p3, p4, p5, p6, p7, p8).shape
    out = np.empty(shape + (8,))
    out[..., ResponseCategory.C] = p1 * p2 * p3 * p4 * p5 * p6
    out[..., ResponseCategory.S] = p1 * p2 * (1 - p3) * p6
    out[..., ResponseCategory.F] = p1 * p2 * p3 * ((1 - p4) * p6 + (1 - p6) * p7)
    out[..., ResponseCategory.M] = p1 * p2 * p3 * p4 * (1 - p5) * p6
    out[..., ResponseCategory.U] = p1 * (1 - p2) * p6 + p1 * (1 - p2 * p3) * (1 - p6) * p8
    out[..., ResponseCategory.N] = p1 * p2 * p3 * (1 - p6) * (1 - p7)
    out[..., ResponseCategory.AN] = p1 * (1 - p2 * p3) * (1 - p6) * (1 - p8)
    out[..., ResponseCategory.NA] = 1 - p1
    return out


def category_distribution(psi_cell: np.ndarray) -> np.ndarray:
    """Category distribution for one cell's psi 8-vector (boundaries allowed)."""
    psi = np.asarray(psi_cell, dtype=float)
    if psi.shape != (8,):
        raise DomainError(f"psi must have shape (8,), got {psi.shape}")
    if np.any(psi < 0.0) or np.any(psi > 1.0) or not np.all(np.isfinite(psi)):
        raise DomainError(f"psi components must lie in [0, 1], got {psi!r}")
    return _distribution_from_components(*psi)


def distribution_table(table: PsiTable) -> np.ndarray:
    """(T, K, 8) distributions for every cell of a psi table."""
    return _distribution_from_components(
        table.psi1,
        table.psi2[:, None],
        table.psi3,
        table.psi4,
        table.psi5,
        table.psi6,
        table.psi7[None, :],
        table.psi8,
    )


@dataclass(frozen=True)
class ConditionalProbs:
    """The seven conditional probabilities p1..p7 describing one cell.

    p1: any naming attempt; p2: word-level outcome given an attempt;
    p3/p4: semantic / abstruse-neologism share of the non-word outcomes;
    p5/p6/p7: correct / mixed / neologism share of the word outcomes.
    Entries may be NaN when their conditioning event has zero probability.
    """

    p1: float
    p2: float
    p3: float
    p4: float
    p5: float
    p6: float
    p7: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p1, self.p2, self.p3, self.p4, self.p5, self.p6, self.p7])


def conditional_probs_from_distribution(d: np.ndarray) -> ConditionalProbs:
    """Definitional ratios from a full category distribution.

    Raises :class:`ZeroProbabilityError` when the attempt event has zero
    probability (everything downstream is then undefined); the two sub-events
    yield NaN components instead, since several of them stay well defined
    through the psi route at such boundaries.
    """
    d = np.asarray(d, dtype=float)
    if d.shape != (8,):
        raise DomainError(f"distribution must have shape (8,), got {d.shape}")
    p1 = 1.0 - d[ResponseCategory.NA]
    if p1 <= ZERO_EVENT:
        raise ZeroProbabilityError(
            "conditioning event 'R != NA' has zero probability"
        )
    word = d[ResponseCategory.C] + d[ResponseCategory.M] + d[ResponseCategory.F] \
        + d[ResponseCategory.N]
    nonword = d[ResponseCategory.AN] + d[ResponseCategory.U] + d[ResponseCategory.S]
    p2 = word / p1
    if nonword > ZERO_EVENT:
        p3 = d[ResponseCategory.S] / nonword
        p4 = d[ResponseCategory.AN] / nonword
    else:
        p3 = p4 = float("nan")
    if word > ZERO_EVENT:
        p5 = d[ResponseCategory.C] / word
        p6 = d[ResponseCategory.M] / word
        p7 = d[ResponseCategory.N] / word
    else:
        p5 = p6 = p7 = float("nan")
    return ConditionalProbs(float(p1), float(p2), float(p3), float(p4),
                            float(p5), float(p6), float(p7))


def conditional_probs_from_psi(psi_cell: np.ndarray) -> ConditionalProbs:
    """The same conditionals written directly in psi components."""
    psi = np.asarray(psi_cell, dtype=float)
    if psi.shape != (8,):
        raise DomainError(f"psi must have shape (8,), got {psi.shape}")
    if np.any(psi < 0.0) or np.any(psi > 1.0) or not np.all(np.isfinite(psi)):
        raise DomainError(f"psi components must lie in [0, 1], got {psi!r}")
    s1, s2, s3, s4, s5, s6, s7, s8 = psi
    p1 = s1
    p2 = s2 * s3
    residual = 1.0 - p2
    p3 = s2 * (1.0 - s3) * s6 / residual if residual > ZERO_EVENT else float("nan")
    p4 = (1.0 - s6) * (1.0 - s8)
    p5 = s4 * s5 * s6
    p6 = s4 * (1.0 - s5) * s6
    p7 = (1.0 - s6) * (1.0 - s7)
    return ConditionalProbs(float(p1), float(p2), float(p3), float(p4),
                            float(p5), float(p6), float(p7))


@dataclass(frozen=True)
class RatioSet:
    """Four invariant combinations of the conditionals.

    r_a = p5/p6 (selection odds), r_b = p5+p6, r_c = (1-p2)p3/p2,
    r_d = p7/p4.  In psi terms: psi5/(1-psi5), psi4*psi6,
    (1-psi3)*psi6/psi3, (1-psi7)/(1-psi8).
    """

    r_a: float
    r_b: float
    r_c: float
    r_d: float


def derived_ratios(p: ConditionalProbs) -> RatioSet:
    for name, den in (("p6", p.p6), ("p2", p.p2), ("p4", p.p4)):
        if not den > 0.0:
            raise DomainError(f"ratio denominator {name} is zero")
    return RatioSet(
        r_a=p.p5 / p.p6,
        r_b=p.p5 + p.p6,
        r_c=(1.0 - p.p2) * p.p3 / p.p2,
        r_d=p.p7 / p.p4,
    )


# The seven relations any observationally-equal pair of tables must satisfy,
# keyed by the invariant quantity each one compares.
EQUALITY_NAMES: tuple[str, ...] = (
    "psi1",
    "psi5_odds",
    "psi4_psi6",
    "psi2_psi3",
    "psi3_ratio",
    "psi6_psi8",
    "psi7_psi8_ratio",
)


@dataclass(frozen=True)
class EqualityReport:
    """Max per-relation discrepancy over all cells, plus an overall verdict."""

    discrepancies: dict[str, float]
    tol: float
    passed: bool

    def failing(self) -> list[str]:
        return [k for k, v in self.discrepancies.items() if v > self.tol]


def check_necessary_equalities(a: PsiTable, b: PsiTable, tol: float = 1e-12) -> EqualityReport:
    """Compare the seven invariant quantities of two psi tables cell by cell."""
    if (a.T, a.K) != (b.T, b.K):
        raise DimensionMismatchError(
            f"tables have dims ({a.T}, {a.K}) vs ({b.T}, {b.K})"
        )
    a2 = a.psi2[:, None]
    b2 = b.psi2[:, None]
    a7 = a.psi7
    b7 = b.psi7
    disc = {
        "psi1": np.abs(a.psi1 - b.psi1),
        "psi5_odds": np.abs(a.psi5 / (1 - a.psi5) - b.psi5 / (1 - b.psi5)),
        "psi4_psi6": np.abs(a.psi4 * a.psi6 - b.psi4 * b.psi6),
        "psi2_psi3": np.abs(a2 * a.psi3 - b2 * b.psi3),
        "psi3_ratio": np.abs(
            (1 - a.psi3) * a.psi6 / a.psi3 - (1 - b.psi3) * b.psi6 / b.psi3
        ),
        "psi6_psi8": np.abs((1 - a.psi6) * (1 - a.psi8) - (1 - b.psi6) * (1 - b.psi8)),
        "psi7_psi8_ratio": np.abs((1 - a7) / (1 - a.psi8) - (1 - b7) / (1 - b.psi8)),
    }
    maxima = {name: float(np.max(disc[name])) for name in EQUALITY_NAMES}
    return EqualityReport(
        discrepancies=maxima,
        tol=tol,
        passed=all(v <= tol for v in maxima.values()),
    )


def distribution_csv(table: PsiTable) -> str:
    """Full distribution table as CSV, one row per cell, t-major order."""
    dist = distribution_table(table)
    buf = io.StringIO()
    buf.write("t,k," + ",".join(CATEGORY_NAMES) + "\n")
    for t in range(table.T):
        for k in range(table.K):
            row = ",".join(fmt(dist[t, k, c]) for c in CATEGORIES)
            buf.write(f"{t},{k},{row}\n")
    return buf.getvalue()
