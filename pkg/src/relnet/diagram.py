"""Width-bounded frontier diagram: bounds computation plus sampling scheduler.

Edges are decided one per layer.  A node summarizes every realization prefix
that is still undecided, keeping only per-frontier attributes: connected
component ids, per-component terminal counts, and per-component counts of
undecided incident edges.  Prefixes proven connected or disconnected leave
the diagram immediately and feed two running masses, the lower bound ``p_c``
and the complement of the upper bound ``p_d``.  Only one layer is resident
at a time.

When a layer outgrows the configured width, the lowest-priority nodes are
deleted and become sampling strata: each deleted node's remaining edge set is
collapsed onto its components (a quotient graph) and completions are drawn
from it.  The final estimate combines the bounds with the per-stratum draws.
"""

from __future__ import annotations

import time
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from . import rng as rngmod
from .estimators import (
    Bounds,
    EstimateReport,
    SampleBudget,
    StratumDraw,
    combine_strata,
    ht_variance,
    reduced_sample_count,
    stratified_mc_variance,
)
from .graph import (
    GraphInvariantError,
    TerminalSet,
    UncertainGraph,
    all_uncertain,
    assignment_probability,
    sample_possible_graph,
    terminals_connected,
)
from .numerics import KahanSum, Probability, to_fraction


class WidthCapExceeded(RuntimeError):
    """Unbounded construction grew past the configured hard cap."""


# ---------------------------------------------------------------------------
# Edge ordering and frontiers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeOrder:
    """A processing order for the edges and the induced frontier profile.

    ``order[l]`` is the original index of the edge decided at layer l.
    ``frontiers[l]`` lists the vertices incident to both decided and
    undecided edges just before layer l is processed; it is derived from the
    order alone.
    """

    order: tuple[int, ...]
    positions: tuple[int, ...]
    first: tuple[int, ...]
    last: tuple[int, ...]
    frontiers: tuple[tuple[int, ...], ...]
    incident_positions: tuple[tuple[int, ...], ...]

    @property
    def max_frontier(self) -> int:
        return max((len(f) for f in self.frontiers), default=0)


def order_edges(
    g: UncertainGraph, terminals: Optional[TerminalSet] = None
) -> EdgeOrder:
    """Default ordering: breadth-first from a terminal.

    Edges are emitted when their first endpoint is dequeued, which keeps the
    frontier narrow on path-like and planar-like graphs.
    """
    m = g.m
    start = min(terminals.vertices) if terminals is not None else 0
    emitted = [False] * m
    order: list[int] = []
    visited = [False] * g.n
    visited[start] = True
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for j in g.incident(u):
            if emitted[j]:
                continue
            emitted[j] = True
            order.append(j)
            a, b = g.edges[j]
            x = b if a == u else a
            if not visited[x]:
                visited[x] = True
                queue.append(x)
    if len(order) != m:
        raise GraphInvariantError("graph is not connected")

    positions = [0] * m
    for pos, j in enumerate(order):
        positions[j] = pos
    inc_pos: list[list[int]] = [[] for _ in range(g.n)]
    for v in range(g.n):
        inc_pos[v] = sorted(positions[j] for j in g.incident(v))
    first = [p[0] if p else m for p in inc_pos]
    last = [p[-1] if p else -1 for p in inc_pos]
    frontiers: list[tuple[int, ...]] = []
    for l in range(m + 1):
        frontiers.append(
            tuple(v for v in range(g.n) if first[v] < l <= last[v])
        )
    return EdgeOrder(
        order=tuple(order),
        positions=tuple(positions),
        first=tuple(first),
        last=tuple(last),
        frontiers=tuple(frontiers),
        incident_positions=tuple(tuple(p) for p in inc_pos),
    )


# ---------------------------------------------------------------------------
# Nodes and transitions
# ---------------------------------------------------------------------------

class Node:
    """Frontier summary of a set of undecided realization prefixes.

    ``comp[i]`` is the component id of the i-th frontier vertex, ids
    canonical by first occurrence along the frontier.  ``t`` and ``d`` are
    indexed by component id: terminals connected into the component, and
    undecided edge endpoints still attached to it.
    """

    __slots__ = ("p", "comp", "t", "d", "order")

    def __init__(
        self,
        p: Probability,
        comp: tuple[int, ...],
        t: tuple[int, ...],
        d: tuple[int, ...],
        order: int = 0,
    ) -> None:
        self.p = p
        self.comp = comp
        self.t = t
        self.d = d
        self.order = order

    def merge_key(self) -> tuple:
        return (self.comp, tuple(x > 0 for x in self.t))

    def __repr__(self) -> str:  # diagnostic only
        return f"Node(p={self.p!r}, comp={self.comp}, t={self.t}, d={self.d})"


ONE_SINK = "one"
ZERO_SINK = "zero"


@dataclass(frozen=True)
class _LayerStep:
    """Precomputed geometry for deciding the edge at one layer."""

    layer: int
    edge_index: int
    u: int
    v: int
    u_pos: int  # position of u in the old frontier, -1 if entering
    v_pos: int
    u_tinit: int  # terminal count of u's singleton component on entry
    v_tinit: int
    u_dinit: int  # undecided incident edges of u on entry (this edge included)
    v_dinit: int
    next_src: tuple[int, ...]  # per new-frontier vertex: old pos, or -2 (u) / -3 (v)


def _make_step(
    g: UncertainGraph, eo: EdgeOrder, layer: int, terminals: TerminalSet
) -> _LayerStep:
    j = eo.order[layer]
    u, v = g.edges[j]
    fl = eo.frontiers[layer]
    fn = eo.frontiers[layer + 1]
    pos = {x: i for i, x in enumerate(fl)}
    src = []
    for x in fn:
        if x == u:
            src.append(-2)
        elif x == v:
            src.append(-3)
        else:
            src.append(pos[x])
    u_fut = len(eo.incident_positions[u]) - bisect_right(eo.incident_positions[u], layer)
    v_fut = len(eo.incident_positions[v]) - bisect_right(eo.incident_positions[v], layer)
    return _LayerStep(
        layer=layer,
        edge_index=j,
        u=u,
        v=v,
        u_pos=pos.get(u, -1),
        v_pos=pos.get(v, -1),
        u_tinit=1 if u in terminals.vertices else 0,
        v_tinit=1 if v in terminals.vertices else 0,
        u_dinit=u_fut + 1,
        v_dinit=v_fut + 1,
        next_src=tuple(src),
    )


def _finish(src, t, d, nc, merged_from, merged_to):
    """Renumber surviving components over the new frontier.

    Returns ZERO_SINK when a terminal-bearing component has no member left,
    else (comp ids, t, d, t-sign pattern), ids canonical by first occurrence.
    """
    remap = [-1] * nc
    cc: list[int] = []
    ct: list[int] = []
    cd: list[int] = []
    sign: list[bool] = []
    fresh = 0
    for c in src:
        if c == merged_from:
            c = merged_to
        i = remap[c]
        if i < 0:
            i = fresh
            fresh += 1
            remap[c] = i
            tc = t[c]
            ct.append(tc)
            cd.append(d[c])
            sign.append(tc > 0)
        cc.append(i)
    for c in range(nc):
        if t[c] > 0 and remap[c] < 0 and c != merged_from:
            return ZERO_SINK
    return (tuple(cc), tuple(ct), tuple(cd), tuple(sign))


def _apply_both(node: Node, step: _LayerStep, k: int):
    """Both transitions of a node across one edge decision.

    Returns (off, on) where each entry is ONE_SINK, ZERO_SINK, or the child
    attribute tuple produced by :func:`_finish`.  The shared bookkeeping
    (component entry, undecided-count decrement) is done once.
    """
    comp = node.comp
    baset = list(node.t)
    based = list(node.d)

    u_pos = step.u_pos
    if u_pos >= 0:
        cu = comp[u_pos]
    else:
        cu = len(baset)
        baset.append(step.u_tinit)
        based.append(step.u_dinit)
    v_pos = step.v_pos
    if v_pos >= 0:
        cv = comp[v_pos]
    else:
        cv = len(baset)
        baset.append(step.v_tinit)
        based.append(step.v_dinit)
    based[cu] -= 1
    based[cv] -= 1
    nc = len(baset)

    src = [
        comp[s] if s >= 0 else (cu if s == -2 else cv)
        for s in step.next_src
    ]
    off = _finish(src, baset, based, nc, -1, -1)
    if cu == cv:
        # a cycle-closing edge changes nothing structural either way
        return off, off
    tcu = baset[cu] + baset[cv]
    if tcu == k:
        return off, ONE_SINK
    newt = list(baset)
    newd = list(based)
    newt[cu] = tcu
    newd[cu] += newd[cv]
    return off, _finish(src, newt, newd, nc, cv, cu)


def _apply(node: Node, step: _LayerStep, existent: bool, k: int):
    """Single-state transition; see :func:`_apply_both`."""
    off, on = _apply_both(node, step, k)
    return on if existent else off


def extend(
    g: UncertainGraph,
    eo: EdgeOrder,
    layer: int,
    node: Node,
    existent: bool,
    terminals: TerminalSet,
    *,
    exact: bool = False,
):
    """Public transition: returns ONE_SINK, ZERO_SINK, or the child Node."""
    step = _make_step(g, eo, layer, terminals)
    res = _apply(node, step, existent, terminals.k)
    pe = g.prob_values(exact)[step.edge_index]
    child_p = node.p * pe if existent else node.p * (1 - pe)
    if res is ONE_SINK or res is ZERO_SINK:
        return res
    comp, t, d, _ = res
    return Node(child_p, comp, t, d)


def check_connected(
    g: UncertainGraph,
    eo: EdgeOrder,
    layer: int,
    node: Node,
    existent: bool,
    terminals: TerminalSet,
) -> bool:
    """True iff every completion of the transitioned prefix is connected."""
    step = _make_step(g, eo, layer, terminals)
    return _apply(node, step, existent, terminals.k) is ONE_SINK


def check_disconnected(
    g: UncertainGraph,
    eo: EdgeOrder,
    layer: int,
    node: Node,
    existent: bool,
    terminals: TerminalSet,
) -> bool:
    """True iff no completion of the transitioned prefix is connected."""
    step = _make_step(g, eo, layer, terminals)
    return _apply(node, step, existent, terminals.k) is ZERO_SINK


# ---------------------------------------------------------------------------
# Merging, priorities, deletion
# ---------------------------------------------------------------------------

def merge(nodes: Iterable[Node]) -> list[Node]:
    """Collapse nodes whose component pattern and terminal signs agree.

    Such nodes transition to the same sinks under every continuation, so
    their masses add without changing the bounds trajectory.
    """
    table: dict[tuple, Node] = {}
    for nd in nodes:
        key = nd.merge_key()
        kept = table.get(key)
        if kept is None:
            table[key] = nd
        else:
            kept.p = kept.p + nd.p
    return list(table.values())


def node_priority(node: Node, k: int) -> float:
    """Deletion priority: mass times closeness to either sink.

    A component scores t/k (nearly all terminals gathered) or 1/d (nearly
    out of undecided edges), whichever is larger; nodes with no
    terminal-bearing component score 0 and are deleted first.
    """
    best = 0.0
    for c, tc in enumerate(node.t):
        if tc > 0:
            score = max(tc / k, 1.0 / node.d[c])
            if score > best:
                best = score
    return float(node.p) * best


def split_layer(nodes: list[Node], width: int, k: int) -> tuple[list[Node], list[Node]]:
    """Keep the ``width`` highest-priority nodes; the rest are deleted."""
    if len(nodes) <= width:
        return nodes, []
    ranked = sorted(nodes, key=lambda nd: (-node_priority(nd, k), nd.order))
    return ranked[:width], ranked[width:]


def allocate_draws(masses: Sequence[float], budget: int) -> list[int]:
    """Largest-remainder proportional allocation of a draw budget."""
    n = len(masses)
    if n == 0 or budget <= 0:
        return [0] * n
    total = sum(masses)
    if total <= 0:
        return [0] * n
    shares = [budget * m / total for m in masses]
    alloc = [int(sh) for sh in shares]
    leftover = budget - sum(alloc)
    if leftover > 0:
        rema = sorted(range(n), key=lambda i: (-(shares[i] - alloc[i]), i))
        for i in rema[:leftover]:
            alloc[i] += 1
    return alloc


# ---------------------------------------------------------------------------
# Stratum sampling (dynamic programming over the quotient graph)
# ---------------------------------------------------------------------------

def stratum_quotient(
    g: UncertainGraph, eo: EdgeOrder, layer: int, node: Node, terminals: TerminalSet
) -> tuple[UncertainGraph, TerminalSet]:
    """Collapse a node's decided prefix onto its components.

    The quotient has one vertex per live component plus one per vertex not
    yet reached by the ordering; its edges are the undecided edges of the
    original graph.  All completions of the node connect the terminals iff
    the corresponding quotient realization connects every terminal-bearing
    component and every unreached terminal.
    """
    fl = eo.frontiers[layer]
    fpos = {x: i for i, x in enumerate(fl)}
    nc = len(node.t)
    extra: dict[int, int] = {}

    for tvert in sorted(terminals.vertices):
        if eo.first[tvert] >= layer:
            extra.setdefault(tvert, nc + len(extra))

    def vmap(x: int) -> int:
        i = fpos.get(x)
        if i is not None:
            return node.comp[i]
        eid = extra.get(x)
        if eid is None:
            eid = nc + len(extra)
            extra[x] = eid
        return eid

    qedges: list[tuple[int, int]] = []
    qprobs: list[float] = []
    for pos in range(layer, g.m):
        j = eo.order[pos]
        u, v = g.edges[j]
        mu, mv = vmap(u), vmap(v)
        if mu == mv:
            continue  # internal to a component, cannot change connectivity
        qedges.append((mu, mv))
        qprobs.append(g.probs[j])

    targets = [c for c in range(nc) if node.t[c] > 0]
    targets.extend(extra[x] for x in sorted(terminals.vertices) if x in extra)
    quotient = UncertainGraph(
        n=nc + len(extra), edges=tuple(qedges), probs=tuple(qprobs)
    )
    return quotient, TerminalSet.of(targets)


def sample_group_stratum(
    g: UncertainGraph,
    eo: EdgeOrder,
    layer: int,
    terminals: TerminalSet,
    nodes: Sequence[Node],
    mass: float,
    draws: int,
    *,
    seed: int = 0,
    threads: int = 1,
    want_outcomes: bool = False,
) -> StratumDraw:
    """Sample a pooled node group as one stratum of the undecided region.

    Draws split into per-thread batches, each on its own derived stream, so
    the result does not depend on scheduling.
    """
    batches = allocate_draws([1.0] * max(1, threads), draws)
    jobs = [
        (b, rngmod.stream(seed, "layer", layer, "batch", bi))
        for bi, b in enumerate(batches)
        if b > 0
    ]

    def work(item):
        b, rng = item
        return _sample_group(g, eo, layer, terminals, nodes, b, rng, want_outcomes)

    if threads > 1 and len(jobs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(item) for item in jobs]

    successes = sum(r[0] for r in results)
    outcomes = None
    if want_outcomes:
        outcomes = []
        for r in results:
            outcomes.extend(r[1])
    return StratumDraw(mass=mass, draws=draws, successes=successes, outcomes=outcomes)


def delete_and_sample(
    g: UncertainGraph,
    eo: EdgeOrder,
    layer: int,
    terminals: TerminalSet,
    nodes: list[Node],
    width: int,
    budget: int,
    *,
    seed: int = 0,
    threads: int = 1,
    want_outcomes: bool = False,
) -> tuple[list[Node], Optional[StratumDraw], float]:
    """Prune an oversized layer, sampling the evicted nodes as one stratum.

    Returns (survivors, stratum or None, deleted mass).  The stratum is None
    when nothing was deleted or the budget was zero; in the latter case the
    deleted mass is reported so the caller can account for it.
    """
    survivors, deleted = split_layer(nodes, width, terminals.k)
    if not deleted:
        return survivors, None, 0.0
    mass = 0.0
    for nd in deleted:
        mass += float(nd.p)
    if budget <= 0:
        return survivors, None, mass
    stratum = sample_group_stratum(
        g, eo, layer, terminals, deleted, mass, budget,
        seed=seed, threads=threads, want_outcomes=want_outcomes,
    )
    return survivors, stratum, mass


def _sample_group(
    g: UncertainGraph,
    eo: EdgeOrder,
    layer: int,
    terminals: TerminalSet,
    nodes: Sequence[Node],
    draws: int,
    rng,
    want_outcomes: bool,
):
    """Draw completions from a pooled group of same-layer nodes.

    Each draw first picks a node with probability proportional to its mass
    (the group is one stratum; per-node masses are usually far too small to
    budget individually), then completes the node's quotient graph.
    Quotients are built lazily, only for nodes actually hit.
    """
    masses = [float(nd.p) for nd in nodes]
    cum: list[float] = []
    acc = 0.0
    for x in masses:
        acc += x
        cum.append(acc)
    total = acc
    cache: dict[int, tuple[UncertainGraph, TerminalSet, list]] = {}
    successes = 0
    outcomes: Optional[list] = [] if want_outcomes else None
    for _ in range(draws):
        i = bisect_right(cum, rng.random() * total)
        if i >= len(nodes):
            i = len(nodes) - 1
        entry = cache.get(i)
        if entry is None:
            quotient, qterms = stratum_quotient(g, eo, layer, nodes[i], terminals)
            entry = (quotient, qterms, all_uncertain(quotient.m))
            cache[i] = entry
        quotient, qterms, base = entry
        a = sample_possible_graph(quotient, base, rng)
        ok = terminals_connected(quotient, a, qterms)
        if ok:
            successes += 1
        if want_outcomes:
            key = (nodes[i].order, sum(1 << b for b, s in enumerate(a) if s == 1))
            q = (masses[i] / total) * float(assignment_probability(quotient, a))
            outcomes.append((key, q, ok))
    return successes, outcomes


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

@dataclass
class BuildConfig:
    width: Optional[int] = None  # None: unbounded (exact construction)
    samples: int = 0
    estimator: str = "mc"
    seed: int = 0
    merge_nodes: bool = True
    precision: str = "double"  # or "exact"
    threads: int = 1
    width_cap: Optional[int] = 1_000_000

    def __post_init__(self) -> None:
        if self.width is not None and self.width < 1:
            raise ValueError("width must be >= 1")
        if self.samples < 0:
            raise ValueError("sample count must be >= 0")
        if self.estimator not in ("mc", "ht"):
            raise ValueError("estimator must be 'mc' or 'ht'")
        if self.precision not in ("double", "exact"):
            raise ValueError("precision must be 'double' or 'exact'")


class _MassAccumulator:
    """Kahan in double mode, exact rational otherwise."""

    def __init__(self, exact: bool) -> None:
        self.exact = exact
        self._kahan = KahanSum()
        self._frac = Fraction(0)

    def add(self, x: Probability) -> None:
        if self.exact:
            self._frac += x
        else:
            self._kahan.add(x)  # type: ignore[arg-type]

    @property
    def value(self) -> float:
        return float(self._frac) if self.exact else self._kahan.value

    @property
    def raw(self) -> Probability:
        return self._frac if self.exact else self._kahan.value


def construct(
    g: UncertainGraph,
    terminals: TerminalSet,
    config: BuildConfig,
    trace: Optional[list] = None,
) -> EstimateReport:
    """Run the full layered construction and return the estimate report.

    Bounds accumulate monotonically as prefixes reach the sinks; the sample
    budget is re-reduced after every layer from the current bounds; deleted
    and leftover nodes are sampled through their quotient graphs.
    """
    terminals.validate(g)
    t_start = time.perf_counter()
    exact = config.precision == "exact"
    eo = order_edges(g, terminals)
    probs = g.prob_values(exact)
    k = terminals.k
    m = g.m
    s = config.samples
    width = config.width

    p_c = _MassAccumulator(exact)
    p_d = _MassAccumulator(exact)
    prior_deleted = _MassAccumulator(exact)
    one: Probability = Fraction(1) if exact else 1.0
    layer_nodes: list[Node] = [Node(one, (), (), (), 0)]
    strata: list[StratumDraw] = []
    unsampled_mass = KahanSum()
    drawn = 0
    max_width = 1
    layers_done = 0
    want_outcomes = config.estimator == "ht"
    sample_time = 0.0
    s_prime = s

    def current_bounds() -> Bounds:
        pc = min(1.0, p_c.value)
        pd = min(1.0, p_d.value)
        if pc + pd > 1.0:  # shave accumulated dust
            pd = max(0.0, 1.0 - pc)
        return Bounds(pc, pd)

    def run_group(nodes: list[Node], mass: float, draws: int, layer: int) -> int:
        """Sample a pooled node group as one stratum; returns draws taken."""
        nonlocal sample_time
        if draws <= 0 or not nodes:
            if mass > 0:
                unsampled_mass.add(mass)
            return 0
        t0 = time.perf_counter()
        strata.append(
            sample_group_stratum(
                g, eo, layer, terminals, nodes, mass, draws,
                seed=config.seed, threads=config.threads,
                want_outcomes=want_outcomes,
            )
        )
        sample_time += time.perf_counter() - t0
        return draws

    for layer in range(m):
        step = _make_step(g, eo, layer, terminals)
        pe = probs[step.edge_index]
        pe_off = 1 - pe
        nxt: dict[tuple, Node] = {}
        creation = 0
        nxt_get = nxt.get
        merging = config.merge_nodes
        resident_mass = 0.0
        for nd in layer_nodes:
            off, on = _apply_both(nd, step, k)
            np_ = nd.p
            for res, mass in ((off, np_ * pe_off), (on, np_ * pe)):
                if res is ONE_SINK:
                    p_c.add(mass)
                elif res is ZERO_SINK:
                    p_d.add(mass)
                else:
                    comp, t, d, sign = res
                    key = (comp, sign) if merging else creation
                    kept = nxt_get(key)
                    if kept is None:
                        nxt[key] = Node(mass, comp, t, d, creation)
                        creation += 1
                    else:
                        kept.p = kept.p + mass
                    resident_mass += mass
        layer_nodes = list(nxt.values())
        layers_done = layer + 1
        if config.width_cap is not None and len(layer_nodes) > config.width_cap:
            raise WidthCapExceeded(
                f"layer {layer + 1} width {len(layer_nodes)} exceeds cap {config.width_cap}"
            )
        max_width = max(max_width, len(layer_nodes))

        bounds_now = current_bounds()
        s_prime = reduced_sample_count(s, bounds_now)

        deleted_mass_layer = 0.0
        samples_layer = 0
        if width is not None and len(layer_nodes) > width:
            survivors, deleted = split_layer(layer_nodes, width, k)
            surv_mass = _MassAccumulator(exact)
            for nd in survivors:
                surv_mass.add(nd.p)
            # expected deleted mass from the maintained attributes
            p_hat = max(
                0.0,
                1.0 - prior_deleted.value - surv_mass.value - p_c.value - p_d.value,
            )
            actual = _MassAccumulator(exact)
            for nd in deleted:
                actual.add(nd.p)
            deleted_mass_layer = actual.value
            # the layer's share of the reduced budget, never past the request
            budget = max(0, min(int(s_prime * p_hat), s - drawn))
            samples_layer = run_group(deleted, deleted_mass_layer, budget, layer + 1)
            drawn += samples_layer
            prior_deleted.add(actual.raw)
            layer_nodes = survivors
            resident_mass = surv_mass.value

        if trace is not None:
            trace.append(
                {
                    "layer": layer + 1,
                    "width": len(layer_nodes),
                    "p_c": p_c.value,
                    "p_d": p_d.value,
                    "deleted_mass": deleted_mass_layer,
                    "samples_drawn": samples_layer,
                    "resident_mass": resident_mass,
                }
            )

        if not layer_nodes:
            break

        # Budget check: once sampling has begun, stop constructing as soon
        # as finishing by sampling the resident nodes meets the budget.
        if drawn > 0 and drawn + int(s_prime * resident_mass) >= s_prime:
            budget = max(0, min(int(s_prime * resident_mass), s - drawn))
            batch = run_group(layer_nodes, resident_mass, budget, layer + 1)
            drawn += batch
            if trace is not None:
                trace.append(
                    {
                        "layer": layer + 1,
                        "width": 0,
                        "p_c": p_c.value,
                        "p_d": p_d.value,
                        "deleted_mass": resident_mass,
                        "samples_drawn": batch,
                        "resident_mass": 0.0,
                    }
                )
            layer_nodes = []
            break

    bounds = current_bounds()
    s_final = reduced_sample_count(s, bounds)
    budget_final = SampleBudget(requested=s, reduced=s_final)
    residual = unsampled_mass.value
    if layer_nodes:
        # Natural completion leaves no nodes; anything left means the loop
        # ended without consuming them (possible only with zero layers).
        residual += sum(float(nd.p) for nd in layer_nodes)

    t_est = time.perf_counter()
    is_exact = bounds.undecided <= 1e-12 and not strata
    if is_exact:
        estimate = bounds.p_c
        variance = 0.0
    else:
        estimate = combine_strata(config.estimator, strata, bounds, residual)
        if drawn >= 1:
            if config.estimator == "ht":
                records = []
                for st in strata:
                    if st.outcomes:
                        for _, q, okc in st.outcomes:
                            records.append((st.mass * q, okc))
                # the simplified correction can overshoot; a variance
                # estimate reported to users stays nonnegative
                variance = max(0.0, ht_variance(estimate, records, drawn, bounds))
            else:
                variance = stratified_mc_variance(estimate, bounds, drawn)
        else:
            variance = 0.0
        variance += (0.5 * residual) ** 2  # midpoint fallback allowance

    report = EstimateReport(
        estimate=float(estimate),
        bounds=bounds,
        budget=budget_final,
        samples_used=drawn,
        variance=variance,
        estimator=config.estimator,
        exact=is_exact,
        unsampled_mass=residual,
        layers=layers_done,
        max_width=max_width,
        timings={
            "construct": time.perf_counter() - t_start - sample_time,
            "sample": sample_time,
            "finalize": time.perf_counter() - t_est,
        },
    )
    if exact:
        report.raw = {
            "p_c": str(p_c.raw),
            "p_d": str(p_d.raw),
        }
        if is_exact:
            report.raw["estimate"] = str(p_c.raw)
    return report


def exact_reliability(
    g: UncertainGraph,
    terminals: TerminalSet,
    *,
    width_cap: int = 1_000_000,
    precision: str = "double",
) -> Probability:
    """Exact reliability via the unbounded construction.

    Fails with :class:`WidthCapExceeded` when any layer outgrows the cap.
    """
    cfg = BuildConfig(
        width=None, samples=0, precision=precision, width_cap=width_cap
    )
    report = construct(g, terminals, cfg)
    gap = 1.0 - report.bounds.p_c - report.bounds.p_d
    if abs(gap) > 1e-9:
        raise GraphInvariantError(
            f"construction left {gap} mass undecided in exact run"
        )
    if precision == "exact":
        return to_fraction(Fraction(report.raw["p_c"]))
    return report.bounds.p_c
