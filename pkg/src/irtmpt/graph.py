"""Processing-tree DAG for the picture-naming model and a path-enumeration oracle.

The graph encodes the latent word-production stages (Attempt, Sem, LexSem,
LexPhon, LexSel, five Phon gates, Word-L, Word-T) and the eight observable
response categories.  Every edge carries a process index s in 1..8 and a
polarity; traversal probability is psi_s on success edges and 1 - psi_s on
failure edges.  Summing path products gives category probabilities without
any algebraic simplification, which makes this module an independent oracle
for the closed forms in :mod:`irtmpt.forward`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GraphStructureError


class ResponseCategory(enum.IntEnum):
    """The eight response categories, in canonical serialization order."""

    C = 0   # Correct
    S = 1   # Semantic error
    F = 2   # Formal error
    M = 3   # Mixed error
    U = 4   # Unrelated error
    N = 5   # Neologism
    AN = 6  # Abstruse neologism
    NA = 7  # Non-naming attempt


CATEGORIES: tuple[ResponseCategory, ...] = tuple(ResponseCategory)
CATEGORY_NAMES: tuple[str, ...] = tuple(c.name for c in CATEGORIES)

N_PROCESSES = 8


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    process: int        # s in 1..8
    success: bool       # True -> factor psi_s, False -> factor 1 - psi_s


@dataclass(frozen=True)
class ProcessGraph:
    """Directed acyclic process graph with a unique root and observable leaves.

    Edge order is significant: it fixes the depth-first child ordering used by
    :func:`enumerate_paths`, so path indices are reproducible.
    """

    root: str
    edges: tuple[Edge, ...]
    observables: tuple[str, ...] = CATEGORY_NAMES

    def out_edges(self, node: str) -> list[Edge]:
        return [e for e in self.edges if e.src == node]

    def nodes(self) -> list[str]:
        seen: dict[str, None] = {self.root: None}
        for e in self.edges:
            seen.setdefault(e.src, None)
            seen.setdefault(e.dst, None)
        return list(seen)

    def validate(self) -> None:
        """Check root uniqueness, observable leaves, and complementary branching."""
        targets = {e.dst for e in self.edges}
        if self.root in targets:
            raise GraphStructureError(f"root {self.root!r} has incoming edges")
        obs = set(self.observables)
        for node in self.nodes():
            out = self.out_edges(node)
            if node in obs:
                if out:
                    raise GraphStructureError(f"observable {node!r} has outgoing edges")
                continue
            if not out:
                raise GraphStructureError(f"latent node {node!r} is a dead end")
            procs = {e.process for e in out}
            pols = [e.success for e in out]
            if len(out) != 2 or len(procs) != 1 or sum(pols) != 1:
                raise GraphStructureError(
                    f"latent node {node!r} must branch on one process with "
                    f"complementary polarities"
                )
        for node in obs:
            if node not in targets:
                raise GraphStructureError(f"observable {node!r} unreachable")


# One path through the graph: terminal category plus the ordered edge factors.
@dataclass(frozen=True)
class Path:
    category: ResponseCategory
    factors: tuple[tuple[int, bool], ...]   # (process, success) per edge


@dataclass(frozen=True)
class PathSet:
    paths: tuple[Path, ...]

    def by_category(self) -> dict[ResponseCategory, list[Path]]:
        out: dict[ResponseCategory, list[Path]] = {c: [] for c in CATEGORIES}
        for p in self.paths:
            out[p.category].append(p)
        return out

    def counts(self) -> dict[str, int]:
        by = self.by_category()
        return {c.name: len(by[c]) for c in CATEGORIES}


def build_default_graph() -> ProcessGraph:
    """The hard-coded production DAG (collapsed form, path multiplicity intact)."""
    E = Edge
    edges = (
        E("Attempt", "NA", 1, False),
        E("Attempt", "Sem", 1, True),
        E("Sem", "Phon1", 2, False),
        E("Sem", "LexSem", 2, True),
        E("LexSem", "Phon2", 3, False),
        E("LexSem", "LexPhon", 3, True),
        E("LexPhon", "Phon3", 4, False),
        E("LexPhon", "LexSel", 4, True),
        E("LexSel", "Phon4", 5, False),
        E("LexSel", "Phon5", 5, True),
        E("Phon1", "WordL", 6, False),
        E("Phon1", "U", 6, True),
        E("Phon2", "WordL", 6, False),
        E("Phon2", "S", 6, True),
        E("Phon3", "WordT", 6, False),
        E("Phon3", "F", 6, True),
        E("Phon4", "WordT", 6, False),
        E("Phon4", "M", 6, True),
        E("Phon5", "WordT", 6, False),
        E("Phon5", "C", 6, True),
        E("WordL", "AN", 8, False),
        E("WordL", "U", 8, True),
        E("WordT", "N", 7, False),
        E("WordT", "F", 7, True),
    )
    g = ProcessGraph(root="Attempt", edges=edges)
    g.validate()
    return g


def enumerate_paths(graph: ProcessGraph) -> PathSet:
    """All root-to-observable paths, depth-first in edge order.

    Raises :class:`GraphStructureError` if a cycle is reachable from the root.
    """
    graph.validate()
    obs = set(graph.observables)
    cat_by_name = {c.name: c for c in CATEGORIES}
    paths: list[Path] = []

    def walk(node: str, factors: list[tuple[int, bool]], trail: set[str]) -> None:
        if node in obs:
            paths.append(Path(cat_by_name[node], tuple(factors)))
            return
        if node in trail:
            raise GraphStructureError(f"cycle through {node!r}")
        trail = trail | {node}
        for e in graph.out_edges(node):
            walk(e.dst, factors + [(e.process, e.success)], trail)

    walk(graph.root, [], set())
    return PathSet(tuple(paths))


def oracle_distribution(paths: PathSet, psi: np.ndarray) -> np.ndarray:
    """Category distribution by brute-force summation of path products.

    ``psi`` is the 8-vector (psi_1 .. psi_8) for one (respondent, item) cell;
    boundary values 0 and 1 are legal.  Returns the 8 probabilities in
    canonical category order.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (N_PROCESSES,):
        raise DomainError(f"psi must have shape (8,), got {psi.shape}")
    if np.any(psi < 0.0) or np.any(psi > 1.0) or not np.all(np.isfinite(psi)):
        raise DomainError(f"psi components must lie in [0, 1], got {psi!r}")
    out = np.zeros(len(CATEGORIES))
    for path in paths.paths:
        prod = 1.0
        for s, success in path.factors:
            prod *= psi[s - 1] if success else 1.0 - psi[s - 1]
        out[path.category] += prod
    return out
