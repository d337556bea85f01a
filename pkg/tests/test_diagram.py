import json

import pytest

from relnet.diagram import (
    delete_and_sample,
    ONE_SINK,
    ZERO_SINK,
    BuildConfig,
    Node,
    WidthCapExceeded,
    allocate_draws,
    check_connected,
    check_disconnected,
    construct,
    exact_reliability,
    extend,
    merge,
    node_priority,
    order_edges,
    split_layer,
    stratum_quotient,
)
from relnet.exact import brute_force_reliability
from relnet.graph import EdgeState, TerminalSet, parse_graph
from relnet.generate import random_terminals, tree_rich_graph
from conftest import naive_reliability, small_case


def path_graph(k=3, p=0.5):
    return parse_graph("\n".join(f"{i} {i + 1} {p}" for i in range(k)))


class TestOrderEdges:
    def test_path_order_and_frontier(self):
        g = path_graph(5)
        eo = order_edges(g, TerminalSet.of([0, 5]))
        assert list(eo.order) == [0, 1, 2, 3, 4]
        assert eo.max_frontier == 1

    def test_star_frontier_is_center(self):
        g = parse_graph("0 1 0.5\n0 2 0.5\n0 3 0.5\n0 4 0.5")
        eo = order_edges(g, TerminalSet.of([1, 4]))
        for l in range(1, g.m):
            assert eo.frontiers[l] == (0,)

    def test_every_edge_once(self):
        for seed in range(10):
            g, t = small_case(seed)
            eo = order_edges(g, t)
            assert sorted(eo.order) == list(range(g.m))

    def test_karate_frontier_below_vertex_count(self, karate_graph):
        eo = order_edges(karate_graph, TerminalSet.of([0, 33]))
        assert 0 < eo.max_frontier < karate_graph.n

    def test_frontier_profile_on_known_graph(self):
        # after the first two edges only b and c touch decided and undecided
        g = parse_graph(
            "0 1 0.5\n0 2 0.5\n1 2 0.5\n1 3 0.5\n2 3 0.5\n3 4 0.5"
        )
        eo = order_edges(g, TerminalSet.of([0, 4]))
        assert list(eo.order) == [0, 1, 2, 3, 4, 5]
        assert eo.frontiers[2] == (1, 2)


class TestTransitions:
    def test_joining_edge_hits_one_sink(self):
        g = parse_graph("0 1 0.7")
        t = TerminalSet.of([0, 1])
        eo = order_edges(g, t)
        root = Node(1.0, (), (), ())
        assert extend(g, eo, 0, root, True, t) is ONE_SINK
        assert check_connected(g, eo, 0, root, True, t)

    def test_missing_sole_edge_hits_zero_sink(self):
        g = parse_graph("0 1 0.7")
        t = TerminalSet.of([0, 1])
        eo = order_edges(g, t)
        root = Node(1.0, (), (), ())
        assert extend(g, eo, 0, root, False, t) is ZERO_SINK
        assert check_disconnected(g, eo, 0, root, False, t)

    def test_component_out_of_undecided_edges_sinks(self):
        # path 0-1-2, terminals {0,2}: take e0, drop e1
        g = path_graph(2)
        t = TerminalSet.of([0, 2])
        eo = order_edges(g, t)
        root = Node(1.0, (), (), ())
        child = extend(g, eo, 0, root, True, t)
        assert isinstance(child, Node)
        assert child.p == pytest.approx(0.5)
        assert extend(g, eo, 1, child, False, t) is ZERO_SINK

    def test_child_attributes_on_triangle(self):
        g = parse_graph("0 1 0.5\n0 2 0.5\n1 2 0.5")
        t = TerminalSet.of([0, 1, 2])
        eo = order_edges(g, t)
        root = Node(1.0, (), (), ())
        both_in = extend(g, eo, 0, root, True, t)
        assert both_in.comp == (0, 0)
        assert both_in.t == (2,)
        split = extend(g, eo, 0, root, False, t)
        assert split.comp == (0, 1)
        assert split.t == (1, 1)

    def test_not_connected_when_no_terminals_gathered(self):
        g = path_graph(3)
        t = TerminalSet.of([0, 3])
        eo = order_edges(g, t)
        root = Node(1.0, (), (), ())
        assert not check_connected(g, eo, 0, root, True, t)

    def test_nodes_carry_attributes_for_their_layer_frontier(self):
        for seed in (0, 4, 6):
            g, t = small_case(seed, max_edges=9)
            eo = order_edges(g, t)
            stack = [(0, Node(1.0, (), (), ()))]
            while stack:
                layer, node = stack.pop()
                assert len(node.comp) == len(eo.frontiers[layer])
                if layer == g.m:
                    continue
                for existent in (False, True):
                    res = extend(g, eo, layer, node, existent, t)
                    if isinstance(res, Node):
                        stack.append((layer + 1, res))

    def test_sink_verdicts_sound_against_enumeration(self):
        # every sink produced anywhere in the prefix tree must agree with a
        # brute-force check over all completions of that prefix
        for seed in (0, 1, 2, 5):
            g, t = small_case(seed, max_edges=8)
            eo = order_edges(g, t)
            root = Node(1.0, (), (), ())
            stack = [(0, root, [])]
            while stack:
                layer, node, prefix = stack.pop()
                for existent in (False, True):
                    states = prefix + [existent]
                    res = extend(g, eo, layer, node, existent, t)
                    all_conn, none_conn = _completion_profile(g, eo, t, states)
                    if res is ONE_SINK:
                        assert all_conn
                    elif res is ZERO_SINK:
                        assert none_conn
                    else:
                        stack.append((layer + 1, res, states))


def _completion_profile(g, eo, t, decided):
    """(all connected?, none connected?) over completions of a prefix."""
    from relnet.graph import terminals_connected

    rest = g.m - len(decided)
    seen_conn = False
    seen_disc = False
    for mask in range(1 << rest):
        a = [EdgeState.NON_EXISTENT] * g.m
        for pos, ex in enumerate(decided):
            a[eo.order[pos]] = EdgeState.EXISTENT if ex else EdgeState.NON_EXISTENT
        for bit in range(rest):
            j = eo.order[len(decided) + bit]
            a[j] = EdgeState.EXISTENT if mask >> bit & 1 else EdgeState.NON_EXISTENT
        if terminals_connected(g, a, t):
            seen_conn = True
        else:
            seen_disc = True
        if seen_conn and seen_disc:
            break
    return (not seen_disc, not seen_conn)


class TestMerge:
    def test_equal_sign_patterns_merge(self):
        a = Node(0.25, (0, 1), (2, 0), (3, 1), order=0)
        b = Node(0.5, (0, 1), (1, 0), (2, 1), order=1)
        merged = merge([a, b])
        assert len(merged) == 1
        assert merged[0].p == pytest.approx(0.75)

    def test_different_sign_patterns_stay_apart(self):
        a = Node(0.25, (0, 1), (1, 0), (3, 1), order=0)
        b = Node(0.5, (0, 1), (0, 1), (2, 1), order=1)
        assert len(merge([a, b])) == 2

    def test_different_component_patterns_stay_apart(self):
        a = Node(0.25, (0, 0), (1,), (3,), order=0)
        b = Node(0.5, (0, 1), (1, 1), (2, 2), order=1)
        assert len(merge([a, b])) == 2

    def test_merged_and_unmerged_bounds_agree(self):
        for seed in range(15):
            g, t = small_case(seed, max_edges=10)
            a = construct(g, t, BuildConfig(width=None, samples=0))
            b = construct(g, t, BuildConfig(width=None, samples=0, merge_nodes=False))
            assert a.bounds.p_c == pytest.approx(b.bounds.p_c, abs=1e-12)
            assert a.bounds.p_d == pytest.approx(b.bounds.p_d, abs=1e-12)


class TestPriority:
    def test_formula(self):
        nd = Node(0.1, (0,), (2,), (3,))
        assert node_priority(nd, 4) == pytest.approx(0.05)

    def test_zero_without_terminals(self):
        nd = Node(0.9, (0, 1), (0, 0), (2, 2))
        assert node_priority(nd, 3) == 0.0

    def test_linear_in_mass(self):
        lo = Node(0.1, (0,), (1,), (2,))
        hi = Node(0.4, (0,), (1,), (2,))
        assert node_priority(hi, 3) == pytest.approx(4 * node_priority(lo, 3))

    def test_split_layer_keeps_top(self):
        nodes = [Node(p, (0,), (1,), (1,), order=i)
                 for i, p in enumerate((0.1, 0.5, 0.3))]
        survivors, deleted = split_layer(nodes, 2, 2)
        assert [nd.p for nd in survivors] == [0.5, 0.3]
        assert [nd.p for nd in deleted] == [0.1]

    def test_split_layer_noop_when_under_width(self):
        nodes = [Node(0.5, (0,), (1,), (1,))]
        survivors, deleted = split_layer(nodes, 5, 2)
        assert survivors == nodes and deleted == []


class TestAllocateDraws:
    def test_proportional_with_remainders(self):
        assert allocate_draws([0.5, 0.25, 0.25], 4) == [2, 1, 1]

    def test_total_preserved(self):
        alloc = allocate_draws([0.61, 0.2, 0.1, 0.09], 7)
        assert sum(alloc) == 7

    def test_zero_budget(self):
        assert allocate_draws([0.3, 0.7], 0) == [0, 0]


class TestDeleteAndSample:
    def _layer(self, seed):
        from relnet.diagram import _apply_both, _make_step

        g, t = small_case(seed, max_edges=10)
        eo = order_edges(g, t)
        nodes = [Node(1.0, (), (), (), 0)]
        layer = 0
        while len(nodes) < 4 and layer < g.m - 1:
            step = _make_step(g, eo, layer, t)
            pe = g.probs[step.edge_index]
            nxt = []
            for nd in nodes:
                off, on = _apply_both(nd, step, t.k)
                for res, mass in ((off, nd.p * (1 - pe)), (on, nd.p * pe)):
                    if res not in (ONE_SINK, ZERO_SINK):
                        comp, tt, dd, _ = res
                        nxt.append(Node(mass, comp, tt, dd, len(nxt)))
            nodes = nxt
            layer += 1
        return g, eo, t, nodes, layer

    def test_under_width_is_noop(self):
        g, eo, t, nodes, layer = self._layer(6)
        survivors, stratum, mass = delete_and_sample(
            g, eo, layer, t, nodes, len(nodes), 50, seed=0
        )
        assert survivors == nodes
        assert stratum is None and mass == 0.0

    def test_deleted_nodes_become_a_stratum(self):
        g, eo, t, nodes, layer = self._layer(6)
        if len(nodes) < 2:
            pytest.skip("layer too small for this seed")
        survivors, stratum, mass = delete_and_sample(
            g, eo, layer, t, nodes, 1, 30, seed=0
        )
        assert len(survivors) == 1
        assert stratum is not None
        assert stratum.draws == 30
        assert stratum.mass == pytest.approx(mass)
        assert mass == pytest.approx(sum(float(n.p) for n in nodes)
                                     - float(survivors[0].p))

    def test_zero_budget_reports_mass_only(self):
        g, eo, t, nodes, layer = self._layer(6)
        if len(nodes) < 2:
            pytest.skip("layer too small for this seed")
        survivors, stratum, mass = delete_and_sample(
            g, eo, layer, t, nodes, 1, 0, seed=0
        )
        assert stratum is None
        assert mass > 0.0


class TestStratumQuotient:
    def test_quotient_reliability_matches_prefix_conditional(self):
        for seed in (1, 3, 4, 8, 11):
            g, t = small_case(seed, max_edges=9)
            eo = order_edges(g, t)
            root = Node(1.0, (), (), ())
            # walk a fixed prefix, skipping states that sink
            node, layer, decided = root, 0, []
            while layer < g.m - 2:
                advanced = False
                for existent in (bool(seed % 2), not bool(seed % 2)):
                    res = extend(g, eo, layer, node, existent, t)
                    if isinstance(res, Node):
                        node, layer = res, layer + 1
                        decided.append(existent)
                        advanced = True
                        break
                if not advanced:
                    break
            if layer == 0:
                continue
            quotient, qterms = stratum_quotient(g, eo, layer, node, t)
            got = brute_force_reliability(quotient, qterms).reliability
            expected = _conditional_reliability(g, eo, t, decided)
            assert got == pytest.approx(expected, abs=1e-9)


def _conditional_reliability(g, eo, t, decided):
    from relnet.graph import terminals_connected

    rest = g.m - len(decided)
    hits = 0.0
    total = 0.0
    for mask in range(1 << rest):
        a = [EdgeState.NON_EXISTENT] * g.m
        prob = 1.0
        for pos, ex in enumerate(decided):
            a[eo.order[pos]] = EdgeState.EXISTENT if ex else EdgeState.NON_EXISTENT
        for bit in range(rest):
            j = eo.order[len(decided) + bit]
            on = bool(mask >> bit & 1)
            a[j] = EdgeState.EXISTENT if on else EdgeState.NON_EXISTENT
            prob *= g.probs[j] if on else 1.0 - g.probs[j]
        total += prob
        if terminals_connected(g, a, t):
            hits += prob
    return hits / total


class TestConstruct:
    def test_unbounded_run_is_exact(self):
        for seed in range(20):
            g, t = small_case(seed, max_edges=12)
            rep = construct(g, t, BuildConfig(width=None, samples=0))
            ref = brute_force_reliability(g, t).reliability
            assert rep.exact
            assert rep.bounds.p_c + rep.bounds.p_d == pytest.approx(1.0, abs=1e-9)
            assert rep.estimate == pytest.approx(ref, abs=1e-9)
            assert rep.samples_used == 0

    def test_certain_graph(self):
        g = parse_graph("0 1 1\n1 2 1\n0 2 1")
        rep = construct(g, TerminalSet.of([0, 1, 2]), BuildConfig(width=None))
        assert rep.estimate == 1.0
        assert rep.bounds.p_c == 1.0

    def test_bounds_sandwich_and_monotone_at_small_widths(self):
        for seed in range(12):
            g, t = small_case(seed, max_edges=12)
            ref = brute_force_reliability(g, t).reliability
            for w in (1, 2, 8):
                trace = []
                rep = construct(
                    g, t, BuildConfig(width=w, samples=300, seed=seed), trace=trace
                )
                prev_c, prev_d = 0.0, 0.0
                for row in trace:
                    assert row["p_c"] <= ref + 1e-9
                    assert ref <= 1.0 - row["p_d"] + 1e-9
                    assert row["p_c"] >= prev_c - 1e-12
                    assert row["p_d"] >= prev_d - 1e-12
                    prev_c, prev_d = row["p_c"], row["p_d"]
                assert rep.bounds.p_c - 1e-9 <= rep.estimate <= 1 - rep.bounds.p_d + 1e-9
                assert rep.samples_used <= 300

    def test_mass_conservation_per_layer(self):
        for seed in range(10):
            g, t = small_case(seed, max_edges=12)
            trace = []
            construct(g, t, BuildConfig(width=2, samples=150, seed=seed), trace=trace)
            cum_deleted = 0.0
            for row in trace:
                cum_deleted += row["deleted_mass"]
                total = row["resident_mass"] + cum_deleted + row["p_c"] + row["p_d"]
                assert total == pytest.approx(1.0, abs=1e-9)

    def test_deterministic_reports(self):
        g, t = small_case(7, max_edges=12)
        cfg = BuildConfig(width=2, samples=250, seed=11)
        d1 = json.dumps(construct(g, t, cfg).to_dict(), sort_keys=True)
        d2 = json.dumps(construct(g, t, cfg).to_dict(), sort_keys=True)
        assert d1 == d2

    def test_width_one_still_within_bounds(self):
        g, t = small_case(3, max_edges=10)
        rep = construct(g, t, BuildConfig(width=1, samples=100, seed=0))
        assert rep.bounds.p_c - 1e-9 <= rep.estimate <= 1 - rep.bounds.p_d + 1e-9

    def test_ht_estimator_runs(self):
        g, t = small_case(5, max_edges=10)
        rep = construct(g, t, BuildConfig(width=2, samples=200, estimator="ht", seed=2))
        assert rep.estimator == "ht"
        assert rep.bounds.p_c - 1e-9 <= rep.estimate <= 1 - rep.bounds.p_d + 1e-9

    def test_tree_rich_pipeline_stays_exact_at_default_width(self):
        from relnet.pipeline import estimate_pipeline

        g = tree_rich_graph(141, cycle_count=10, seed=9)
        t = random_terminals(g, 5, seed=9)
        res = estimate_pipeline(g, t, s=10000, w=10000, seed=0)
        assert res.exact
        assert res.samples_used == 0

    def test_statistical_agreement_with_oracle(self):
        import statistics

        g, t = small_case(13, max_edges=12)
        ref = brute_force_reliability(g, t).reliability
        ests = [
            construct(g, t, BuildConfig(width=2, samples=400, seed=i)).estimate
            for i in range(100)
        ]
        mean = statistics.fmean(ests)
        se = statistics.stdev(ests) / 10.0
        assert abs(mean - ref) <= 3 * se + 1e-9


class TestExactReliability:
    def test_single_edge(self):
        g = parse_graph("0 1 0.7")
        assert exact_reliability(g, TerminalSet.of([0, 1])) == pytest.approx(0.7)

    def test_triangle(self):
        g = parse_graph("0 1 0.5\n0 2 0.5\n1 2 0.5")
        r = exact_reliability(g, TerminalSet.of([0, 1, 2]))
        assert r == pytest.approx(0.5, abs=1e-12)

    def test_sweep_against_naive_oracle(self):
        for seed in range(30):
            g, t = small_case(seed, max_edges=11)
            assert exact_reliability(g, t) == pytest.approx(
                naive_reliability(g, t), abs=1e-9
            )

    def test_width_cap_raises(self, karate_graph):
        with pytest.raises(WidthCapExceeded):
            exact_reliability(karate_graph, TerminalSet.of([0, 16, 33]), width_cap=50)

    def test_exact_precision_mode(self):
        from fractions import Fraction

        g = parse_graph("0 1 0.5\n0 2 0.5\n1 2 0.5")
        r = exact_reliability(g, TerminalSet.of([0, 1, 2]), precision="exact")
        assert r == Fraction(1, 2)

    def test_exact_precision_survives_underflow(self):
        from fractions import Fraction

        lines = "\n".join(f"{i} {i + 1} 1e-20" for i in range(20))
        g = parse_graph(lines)
        r = exact_reliability(g, TerminalSet.of([0, 20]), precision="exact")
        assert r == Fraction(1, 10 ** 400)
