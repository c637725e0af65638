import numpy as np
import pytest

import oracle
from cascpath.casedata import Line
from cascpath.scenarios import Scenario
from cascpath.search import (
    SearchConfig,
    SearchContext,
    line_failure_probabilities,
    line_failure_probability,
    run_study,
    search_scenario,
)
from conftest import make_five_bus


def _example_line(pb=0.001, lb=100.0, beta=1.2):
    return Line(1, 1, 2, 0.1, lb, beta, pb)


def test_failure_probability_branches():
    """Hand evaluation of the three branches of the piecewise model."""
    line = _example_line()
    assert line_failure_probability(line, 50.0) == 0.001
    assert line_failure_probability(line, -50.0) == 0.001
    assert line_failure_probability(line, 110.0) == pytest.approx(
        0.999 * 110.0 / 120.0 + 0.001
    )  # = 0.91675
    assert line_failure_probability(line, 120.0) == pytest.approx(1.0)
    assert line_failure_probability(line, 150.0) == 1.0


def test_failure_probability_discontinuity_and_limits():
    line = _example_line()
    # continuous at the relay threshold
    assert line_failure_probability(line, 120.0 - 1e-3) == pytest.approx(1.0, abs=1e-4)
    # jump at the long-term limit: right value is (1-pb)/beta + pb
    right = line_failure_probability(line, 100.0 + 1e-3)
    assert right == pytest.approx(0.999 / 1.2 + 0.001, abs=1e-4)
    assert line_failure_probability(line, 100.0) == 0.001
    # range [pb, 1]
    for f in np.linspace(0.0, 200.0, 500):
        p = line_failure_probability(line, f)
        assert 0.001 <= p <= 1.0


def test_vectorized_matches_scalar(rts79):
    rng = np.random.default_rng(2)
    flows = rng.uniform(-700, 700, rts79.n_line)
    vec = line_failure_probabilities(rts79, flows)
    for k, line in enumerate(rts79.lines):
        assert vec[k] == line_failure_probability(line, flows[k])


def _scenario(case, scale=1.0, index=0):
    loads = scale * case.arr.base_load
    return Scenario(index=index, wind_output=np.zeros(0), load=loads, rng_seed=0)


def test_epsilon_one_prunes_everything(five_bus):
    ctx = SearchContext(five_bus, SearchConfig(epsilon=0.9999, m=3))
    paths = search_scenario(ctx, _scenario(five_bus), epsilon=0.9999)
    assert paths == []


def test_product_arithmetic_pruning(five_bus):
    """Depth-2 paths at 1e-6 survive epsilon 1e-7; depth-3 at 1e-9 do not."""
    ctx = SearchContext(five_bus, SearchConfig(epsilon=1e-7, m=500, depth_limit=8))
    paths = search_scenario(ctx, _scenario(five_bus), epsilon=1e-7, m=10_000)
    depths = {}
    for p in paths:
        d = sum(ev.kind in ("gen-failure", "line-failure") for ev in p.events)
        depths[d] = depths.get(d, 0) + 1
    assert 1 in depths and 2 in depths
    assert 3 not in depths
    for p in paths:
        assert p.probability >= 1e-7


@pytest.mark.parametrize("scale", [0.6, 1.0])
def test_matches_bruteforce_enumerator(scale):
    """Full-search equivalence against the independent naive enumerator:
    same paths, probabilities, sheds and top-m selection."""
    case = make_five_bus()
    scen = _scenario(case, scale=scale)
    eps, depth = 1e-6, 8

    ref = oracle.enumerate_paths(case, scen, eps, depth)
    ctx = SearchContext(case, SearchConfig(epsilon=eps, m=3, depth_limit=depth))
    got = search_scenario(ctx, scen, epsilon=eps, m=10_000, depth_limit=depth)

    assert len(got) == len(ref)
    key_ref = sorted(
        (r["elements"], round(r["probability"], 15), round(r["shed"], 9), r["terminal"])
        for r in ref
    )
    key_got = sorted(
        (p.elements, round(p.probability, 15), round(p.shed_mw, 9), p.terminal)
        for p in got
    )
    for a, b in zip(key_ref, key_got):
        assert a[0] == b[0]
        assert a[1] == pytest.approx(b[1], abs=1e-9)
        assert a[2] == pytest.approx(b[2], abs=1e-9)
        assert a[3] == b[3]

    # top-m selection agrees exactly
    top_ref = oracle.top_m(ref, 3)
    top_got = search_scenario(ctx, scen, epsilon=eps, m=3, depth_limit=depth)
    for r, g in zip(top_ref, top_got):
        assert r["elements"] == g.elements
        assert r["probability"] == pytest.approx(g.probability, abs=1e-12)
        assert r["shed"] == pytest.approx(g.shed_mw, abs=1e-9)


def test_probability_nonincreasing_along_paths(five_bus):
    ctx = SearchContext(five_bus, SearchConfig(epsilon=1e-9, m=50))
    paths = search_scenario(ctx, _scenario(five_bus), m=50)
    for p in paths:
        probs = [ev.probability for ev in p.events
                 if ev.kind in ("gen-failure", "line-failure")]
        assert p.probability == pytest.approx(np.prod(probs), rel=1e-12)
        assert p.probability <= min(probs) + 1e-15


def test_no_shedding_scenario_emits_m_paths(five_bus):
    """Single failures at light load shed nothing, yet m paths are still
    reported (the severity-sorted prefix of the enumeration)."""
    ctx = SearchContext(five_bus, SearchConfig(epsilon=1e-4, m=3))
    paths = search_scenario(ctx, _scenario(five_bus, scale=0.3), epsilon=1e-4)
    assert len(paths) == 3
    assert all(p.shed_mw == 0.0 for p in paths)
    # severity ties break toward higher probability
    assert paths[0].probability >= paths[1].probability >= paths[2].probability


def test_run_study_aggregates(five_bus):
    scenarios = [_scenario(five_bus, s, i) for i, s in enumerate([0.5, 0.8, 1.0])]
    rep = run_study(five_bus, scenarios, SearchConfig(epsilon=1e-6, m=3))
    assert len(rep.paths) == 9
    assert len(rep.hourly) == 3
    assert rep.workload["scenarios"] == 3
    assert not rep.errors
    # graph nodes cover every element that appears in a path
    seen = {el for p in rep.paths for el in p.elements}
    assert set(rep.graph_nodes) == seen


def test_run_study_empty():
    case = make_five_bus()
    rep = run_study(case, [], SearchConfig())
    assert rep.paths == [] and rep.hourly == []


def test_worker_invariance(five_bus):
    scenarios = [_scenario(five_bus, s, i)
                 for i, s in enumerate([0.5, 0.7, 0.9, 1.0, 0.6, 0.8])]
    a = run_study(five_bus, scenarios, SearchConfig(epsilon=1e-6, m=3, workers=1))
    b = run_study(five_bus, scenarios, SearchConfig(epsilon=1e-6, m=3, workers=4))
    assert len(a.paths) == len(b.paths)
    for pa, pb in zip(a.paths, b.paths):
        assert pa.elements == pb.elements
        assert pa.probability == pb.probability
        assert pa.shed_mw == pb.shed_mw
        assert pa.terminal == pb.terminal


def test_depth_limit_terminal(five_bus):
    ctx = SearchContext(five_bus, SearchConfig(epsilon=1e-15, m=10, depth_limit=2))
    paths = search_scenario(ctx, _scenario(five_bus), epsilon=1e-15, m=10_000,
                            depth_limit=2)
    deep = [p for p in paths
            if sum(e.kind.endswith("failure") for e in p.events) == 2]
    assert deep and all(p.terminal in ("depth-limit", "islanded") for p in deep)
