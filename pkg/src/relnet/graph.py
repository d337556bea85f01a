"""Uncertain-graph model: vertices, probabilistic edges, realizations.

An uncertain graph is undirected; every edge carries an independent existence
probability in (0, 1].  A *realization* assigns each edge one of three states
(existent, non-existent, uncertain); a fully decided assignment is a possible
graph.  Edge indices follow input order and everything downstream (diagram
layers, trace output) keys off that order.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from random import Random
from typing import Iterable, Optional, Sequence

from .numerics import Probability, to_fraction


class GraphFormatError(ValueError):
    """Malformed edge-list or terminal input."""


class GraphInvariantError(ValueError):
    """Structurally invalid graph for the requested operation."""


class EdgeState(IntEnum):
    NON_EXISTENT = 0
    EXISTENT = 1
    UNCERTAIN = 2


Assignment = Sequence[EdgeState]


@dataclass(frozen=True)
class UncertainGraph:
    """Immutable undirected multigraph with per-edge probabilities.

    Vertices are dense ids 0..n-1.  Parallel edges are allowed (they arise
    naturally during reduction); self-loops are rejected at ingestion and may
    only appear transiently inside reduction rewrites.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    probs: tuple[float, ...]
    # Exact decimal readings of the probabilities, kept when the graph came
    # from text or from exact-mode arithmetic; used by exact computations.
    exact_probs: Optional[tuple[Fraction, ...]] = field(default=None, compare=False)
    _incident: tuple[tuple[int, ...], ...] = field(
        init=False, repr=False, compare=False, default=()
    )

    def __post_init__(self) -> None:
        if len(self.edges) != len(self.probs):
            raise GraphInvariantError("edge and probability counts differ")
        if self.exact_probs is not None and len(self.exact_probs) != len(self.edges):
            raise GraphInvariantError("edge and exact probability counts differ")
        inc: list[list[int]] = [[] for _ in range(self.n)]
        for i, (u, v) in enumerate(self.edges):
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphInvariantError(f"edge {i} endpoint out of range")
            inc[u].append(i)
            if v != u:
                inc[v].append(i)
        for p in self.probs:
            if not (0.0 < p <= 1.0):
                raise GraphInvariantError(f"probability {p} out of range (0, 1]")
        object.__setattr__(self, "_incident", tuple(tuple(x) for x in inc))

    @property
    def m(self) -> int:
        return len(self.edges)

    def incident(self, v: int) -> tuple[int, ...]:
        return self._incident[v]

    def degree(self, v: int) -> int:
        return len(self._incident[v])

    def prob_values(self, exact: bool = False) -> Sequence[Probability]:
        if not exact:
            return self.probs
        if self.exact_probs is not None:
            return self.exact_probs
        return tuple(to_fraction(p) for p in self.probs)

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        parent = list(range(self.n))
        for u, v in self.edges:
            ru, rv = _find(parent, u), _find(parent, v)
            if ru != rv:
                parent[rv] = ru
        root = _find(parent, 0)
        return all(_find(parent, v) == root for v in range(1, self.n))


@dataclass(frozen=True)
class TerminalSet:
    vertices: frozenset[int]

    def __post_init__(self) -> None:
        if len(self.vertices) < 2:
            raise GraphInvariantError("at least 2 terminals required")

    @classmethod
    def of(cls, ids: Iterable[int]) -> "TerminalSet":
        return cls(frozenset(int(v) for v in ids))

    def validate(self, g: UncertainGraph) -> None:
        bad = [v for v in self.vertices if not (0 <= v < g.n)]
        if bad:
            raise GraphInvariantError(f"terminals not in graph: {sorted(bad)}")

    @property
    def k(self) -> int:
        return len(self.vertices)

    def sorted(self) -> tuple[int, ...]:
        return tuple(sorted(self.vertices))


def _find(parent: list[int], x: int) -> int:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


# ---------------------------------------------------------------------------
# Assignments
# ---------------------------------------------------------------------------

def all_uncertain(m: int) -> list[EdgeState]:
    return [EdgeState.UNCERTAIN] * m


def is_possible_graph(assignment: Assignment) -> bool:
    return all(s != EdgeState.UNCERTAIN for s in assignment)


def assignment_probability(
    g: UncertainGraph, assignment: Assignment, *, exact: bool = False
) -> Probability:
    """Probability mass of a (possibly partial) realization.

    Existent edges contribute p(e), non-existent ones 1 - p(e); uncertain
    edges contribute factor 1, so a partial assignment's mass equals the sum
    over all of its completions.
    """
    if len(assignment) != g.m:
        raise GraphInvariantError("assignment does not cover every edge")
    probs = g.prob_values(exact)
    if exact:
        acc = Fraction(1)
        for s, p in zip(assignment, probs):
            if s == EdgeState.EXISTENT:
                acc *= p
            elif s == EdgeState.NON_EXISTENT:
                acc *= 1 - p
        return acc
    acc_f = 1.0
    for s, p in zip(assignment, probs):
        if s == EdgeState.EXISTENT:
            acc_f *= p
        elif s == EdgeState.NON_EXISTENT:
            acc_f *= 1.0 - p
    return acc_f


def sample_possible_graph(
    g: UncertainGraph, base: Assignment, rng: Random
) -> list[EdgeState]:
    """Complete a partial realization by flipping each uncertain edge.

    Decided entries of ``base`` are preserved.  Draws are independent across
    calls (with-replacement semantics).
    """
    out = list(base)
    probs = g.probs
    rnd = rng.random
    for i, s in enumerate(out):
        if s == EdgeState.UNCERTAIN:
            out[i] = EdgeState.EXISTENT if rnd() < probs[i] else EdgeState.NON_EXISTENT
    return out


def terminals_connected(
    g: UncertainGraph, assignment: Assignment, terminals: TerminalSet
) -> bool:
    """True iff all terminals share a component of the existent-edge subgraph."""
    if not is_possible_graph(assignment):
        raise GraphInvariantError("assignment still has uncertain edges")
    parent = list(range(g.n))
    edges = g.edges
    for i, s in enumerate(assignment):
        if s == EdgeState.EXISTENT:
            u, v = edges[i]
            ru, rv = _find(parent, u), _find(parent, v)
            if ru != rv:
                parent[rv] = ru
    it = iter(terminals.vertices)
    root = _find(parent, next(it))
    return all(_find(parent, t) == root for t in it)


# ---------------------------------------------------------------------------
# File ingestion
# ---------------------------------------------------------------------------

def parse_graph(text: str, *, require_connected: bool = True) -> UncertainGraph:
    return load_graph(io.StringIO(text), require_connected=require_connected)


def load_graph(source, *, require_connected: bool = True) -> UncertainGraph:
    """Read the ``u v p`` edge-list format.

    One edge per line, whitespace separated, 0-based integer vertex ids and a
    decimal probability; ``#`` starts a comment line.  Edge order in the file
    defines edge indices.
    """
    if isinstance(source, (str, bytes, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            return load_graph(fh, require_connected=require_connected)

    edges: list[tuple[int, int]] = []
    probs: list[float] = []
    literals: list[Fraction] = []
    max_vertex = -1
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise GraphFormatError(f"line {lineno}: expected 'u v p', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: bad vertex id") from None
        try:
            p = float(parts[2])
            p_exact = Fraction(parts[2])
        except (ValueError, ZeroDivisionError):
            raise GraphFormatError(f"line {lineno}: bad probability {parts[2]!r}") from None
        if u < 0 or v < 0:
            raise GraphFormatError(f"line {lineno}: negative vertex id")
        if u == v:
            raise GraphFormatError(f"line {lineno}: self-loop not allowed")
        if not (0.0 < p <= 1.0):
            raise GraphFormatError(f"line {lineno}: probability out of range (0, 1]")
        edges.append((u, v))
        probs.append(p)
        literals.append(p_exact)
        max_vertex = max(max_vertex, u, v)

    if not edges:
        raise GraphFormatError("empty edge list")
    g = UncertainGraph(
        n=max_vertex + 1,
        edges=tuple(edges),
        probs=tuple(probs),
        exact_probs=tuple(literals),
    )
    if require_connected and not g.is_connected():
        raise GraphFormatError("graph is not connected")
    return g


def write_graph(g: UncertainGraph, path, *, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for (u, v), p in zip(g.edges, g.probs):
            fh.write(f"{u} {v} {p!r}\n")


def parse_terminals(spec: str, g: UncertainGraph) -> TerminalSet:
    """Terminals from a comma list such as ``0,5,9`` or ``@file`` reference."""
    if spec.startswith("@"):
        return load_terminals(spec[1:], g)
    try:
        ids = [int(x) for x in spec.split(",") if x.strip() != ""]
    except ValueError:
        raise GraphFormatError(f"bad terminal list {spec!r}") from None
    ts = TerminalSet.of(ids)
    ts.validate(g)
    return ts


def load_terminals(path, g: UncertainGraph) -> TerminalSet:
    ids: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                ids.append(int(line))
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad terminal id") from None
    ts = TerminalSet.of(ids)
    ts.validate(g)
    return ts

