"""End-to-end estimation: preprocess, per-part construction, product.

The reliability of a decomposed problem is the bridge factor times the
product of the parts' reliabilities, so per-part estimates (or exact values)
combine multiplicatively.  Sample budgets split across parts proportionally
to edge counts.  A plain-sampling baseline without bounds or preprocessing
is provided for comparisons.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import rng as rngmod
from .diagram import BuildConfig, construct, exact_reliability
from .estimators import (
    Bounds,
    EstimateReport,
    ht_variance,
    mc_variance,
    reduced_sample_count,
)
from .graph import (
    TerminalSet,
    UncertainGraph,
    all_uncertain,
    assignment_probability,
    sample_possible_graph,
    terminals_connected,
)
from .numerics import Probability, round_sig, to_fraction
from .reduction import Decomposition, preprocess


@dataclass
class PipelineResult:
    estimate: float
    bridge_factor: float
    p_c: float  # product-form lower bound
    p_d: float  # complement of the product-form upper bound
    s: int
    s_reduced: int
    samples_used: int
    variance: float
    estimator: str
    exact: bool
    preprocessed: bool
    parts: list[EstimateReport] = field(default_factory=list)
    part_shapes: list[tuple[int, int]] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    raw: dict[str, str] = field(default_factory=dict)

    def to_dict(self, *, include_timings: bool = False, digits: int = 12) -> dict:
        out = {
            "estimate": round_sig(self.estimate, digits),
            "bridge_factor": round_sig(self.bridge_factor, digits),
            "p_c": round_sig(self.p_c, digits),
            "p_d": round_sig(self.p_d, digits),
            "s": self.s,
            "s_reduced": self.s_reduced,
            "samples_used": self.samples_used,
            "variance": round_sig(self.variance, digits),
            "estimator": self.estimator,
            "exact": self.exact,
            "preprocessed": self.preprocessed,
            "parts": [
                dict(p.to_dict(include_timings=include_timings, digits=digits),
                     n=shape[0], m=shape[1])
                for p, shape in zip(self.parts, self.part_shapes)
            ],
        }
        if self.raw:
            out["raw"] = dict(sorted(self.raw.items()))
        if include_timings:
            out["timings"] = {k: round(v, 6) for k, v in sorted(self.timings.items())}
        return out


def split_budget(total: int, weights: list[int]) -> list[int]:
    """Proportional split with a minimum of one per positive-weight part."""
    n = len(weights)
    if n == 0:
        return []
    wsum = sum(weights)
    if wsum <= 0 or total <= 0:
        return [0] * n
    shares = [total * w / wsum for w in weights]
    alloc = [int(x) for x in shares]
    leftover = total - sum(alloc)
    order = sorted(range(n), key=lambda i: (-(shares[i] - alloc[i]), i))
    for i in order[:leftover]:
        alloc[i] += 1
    for i in range(n):
        if alloc[i] == 0 and weights[i] > 0:
            donor = max(range(n), key=lambda j: alloc[j])
            if alloc[donor] >= 2:
                alloc[donor] -= 1
                alloc[i] = 1
    return alloc


def estimate_pipeline(
    g: UncertainGraph,
    terminals: TerminalSet,
    *,
    s: int,
    w: Optional[int],
    estimator: str = "mc",
    seed: int = 0,
    precision: str = "double",
    threads: int = 1,
    use_preprocess: bool = True,
    width_cap: Optional[int] = 1_000_000,
    trace: Optional[list] = None,
) -> PipelineResult:
    """Full pipeline: preprocess, construct per part, combine by product."""
    t0 = time.perf_counter()
    exact_mode = precision == "exact"
    if use_preprocess:
        deco = preprocess(g, terminals)
    else:
        one = Fraction(1) if g.exact_probs is not None else None
        deco = Decomposition(
            bridge_factor=1.0, bridge_factor_exact=one, parts=((g, terminals),)
        )
    t_pre = time.perf_counter() - t0

    budgets = split_budget(s, [pg.m for pg, _ in deco.parts])
    parts: list[EstimateReport] = []
    shapes: list[tuple[int, int]] = []
    construct_time = 0.0
    sample_time = 0.0
    for idx, ((pg, pt), budget) in enumerate(zip(deco.parts, budgets)):
        cfg = BuildConfig(
            width=w,
            samples=budget,
            estimator=estimator,
            seed=rngmod.derive_seed(seed, "part", idx),
            precision=precision,
            threads=threads,
            width_cap=width_cap,
        )
        rep = construct(pg, pt, cfg, trace=trace)
        parts.append(rep)
        shapes.append((pg.n, pg.m))
        construct_time += rep.timings.get("construct", 0.0)
        sample_time += rep.timings.get("sample", 0.0)

    pb = deco.bridge_factor
    estimate = pb
    lower = pb
    upper = pb
    all_exact = True
    samples_used = 0
    s_reduced = 0
    # product variance: Var(prod) = prod(v_i + r_i^2) - prod(r_i^2), scaled
    # by the squared (deterministic) bridge factor
    var_acc = 1.0
    sq_acc = 1.0
    for rep in parts:
        estimate *= rep.estimate
        lower *= rep.bounds.p_c
        upper *= 1.0 - rep.bounds.p_d
        all_exact = all_exact and rep.exact
        samples_used += rep.samples_used
        s_reduced += rep.budget.reduced
        var_acc *= rep.variance + rep.estimate * rep.estimate
        sq_acc *= rep.estimate * rep.estimate
    variance = max(0.0, pb * pb * (var_acc - sq_acc))
    s_reduced = min(s, s_reduced) if parts else 0

    result = PipelineResult(
        estimate=estimate,
        bridge_factor=pb,
        p_c=lower,
        p_d=1.0 - upper,
        s=s,
        s_reduced=s_reduced if parts else 0,
        samples_used=samples_used,
        variance=variance,
        estimator=estimator,
        exact=all_exact,
        preprocessed=use_preprocess,
        parts=parts,
        part_shapes=shapes,
        timings={
            "preprocess": t_pre,
            "construct": construct_time,
            "sample": sample_time,
            "total": time.perf_counter() - t0,
        },
    )
    if exact_mode and deco.bridge_factor_exact is not None:
        result.raw["bridge_factor"] = str(deco.bridge_factor_exact)
        if all_exact and all("estimate" in rep.raw for rep in parts):
            value = deco.bridge_factor_exact
            for rep in parts:
                value *= Fraction(rep.raw["estimate"])
            result.raw["estimate"] = str(value)
    return result


def exact_pipeline(
    g: UncertainGraph,
    terminals: TerminalSet,
    *,
    width_cap: int = 1_000_000,
    precision: str = "double",
    use_preprocess: bool = True,
) -> Probability:
    """Exact reliability through the same decomposition path.

    This is the reference the benchmark harness compares estimates against;
    parts are solved by the unbounded construction.
    """
    if not use_preprocess:
        return exact_reliability(
            g, terminals, width_cap=width_cap, precision=precision
        )
    deco = preprocess(g, terminals)
    if precision == "exact":
        value: Probability = (
            deco.bridge_factor_exact
            if deco.bridge_factor_exact is not None
            else to_fraction(deco.bridge_factor)
        )
    else:
        value = deco.bridge_factor
    for pg, pt in deco.parts:
        value = value * exact_reliability(
            pg, pt, width_cap=width_cap, precision=precision
        )
    return value


# ---------------------------------------------------------------------------
# Plain-sampling baselines (no bounds, no preprocessing)
# ---------------------------------------------------------------------------

def plain_sample_estimate(
    g: UncertainGraph,
    terminals: TerminalSet,
    *,
    s: int,
    estimator: str = "mc",
    seed: int = 0,
) -> PipelineResult:
    """Independent draws over the whole realization space.

    Monte Carlo reports the mean connectivity indicator over s draws; the
    unequal-probability variant weighs each distinct sampled realization by
    its probability over its inclusion probability.
    """
    terminals.validate(g)
    if s < 1:
        raise ValueError("sample count must be >= 1")
    t0 = time.perf_counter()
    rng = rngmod.stream(seed, "plain")
    base = all_uncertain(g.m)
    successes = 0
    records: list[tuple[float, bool]] = []
    seen: dict[int, tuple[float, bool]] = {}
    want_ht = estimator == "ht"
    for _ in range(s):
        a = sample_possible_graph(g, base, rng)
        ok = terminals_connected(g, a, terminals)
        if ok:
            successes += 1
        if want_ht:
            pr = float(assignment_probability(g, a))
            key = sum(1 << i for i, st in enumerate(a) if st == 1)
            records.append((pr, ok))
            seen[key] = (pr, ok)

    if want_ht:
        est = 0.0
        for pr, ok in seen.values():
            if ok:
                pi = 1.0 - (1.0 - pr) ** s
                est += pr / pi
        est = min(1.0, est)
        variance = ht_variance(est, records, s)
    else:
        est = successes / s
        variance = mc_variance(est, s)

    elapsed = time.perf_counter() - t0
    bounds = Bounds(0.0, 0.0)
    return PipelineResult(
        estimate=est,
        bridge_factor=1.0,
        p_c=bounds.p_c,
        p_d=bounds.p_d,
        s=s,
        s_reduced=reduced_sample_count(s, bounds),
        samples_used=s,
        variance=variance,
        estimator=estimator,
        exact=False,
        preprocessed=False,
        timings={"preprocess": 0.0, "construct": 0.0, "sample": elapsed, "total": elapsed},
    )
