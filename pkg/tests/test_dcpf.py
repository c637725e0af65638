import numpy as np
import pytest

from cascpath.casedata import Bus, CaseData, Generator, Line
from cascpath.dcpf import UnbalancedInjectionError, dc_power_flow, relay_fixed_point
from cascpath.gsdf import IslandingError, build_gsdf, build_susceptance
from conftest import balanced_injections


def test_flow_hand_values(tri3):
    g = build_gsdf(tri3)
    fv = dc_power_flow(g, np.array([-1.0, 1.0, 0.0]))
    assert np.allclose(fv.flows, [-2 / 3, 1 / 3, -1 / 3])


def test_flow_linearity(tri3):
    g = build_gsdf(tri3)
    rng = np.random.default_rng(1)
    p = balanced_injections(rng, tri3)
    f1 = dc_power_flow(g, p).flows
    f2 = dc_power_flow(g, 2 * p).flows
    assert np.allclose(2 * f1, f2)
    assert np.all(dc_power_flow(g, np.zeros(3)).flows == 0.0)


def test_unbalanced_rejected(tri3):
    g = build_gsdf(tri3)
    with pytest.raises(UnbalancedInjectionError):
        dc_power_flow(g, np.array([1.0, 1.0, 0.0]))
    with pytest.raises(UnbalancedInjectionError):
        dc_power_flow(g, np.array([1.0, -1.0]))


def _relay_case(limits, betas=None):
    betas = betas or [1.2] * 3
    return CaseData(
        name="relay3",
        buses=(Bus(1, True, 0.0), Bus(2, False, 100.0), Bus(3, False, 0.0)),
        lines=(
            Line(1, 1, 2, 0.1, limits[0], betas[0]),
            Line(2, 2, 3, 0.1, limits[1], betas[1]),
            Line(3, 1, 3, 0.1, limits[2], betas[2]),
        ),
        generators=(Generator(1, 1, 300.0, 10.0),),
    )


def test_relay_no_trips(tri3):
    g = build_gsdf(tri3)
    sys = build_susceptance(tri3)
    out = relay_fixed_point(tri3, sys, g, np.array([-30.0, 30.0, 0.0]))
    assert out.iterations == 0
    assert out.tripped_lines == ()
    assert np.array_equal(out.final_state, [1, 1, 1])


def test_relay_single_trip():
    """Line 1 carries 2/3 of bus-2's demand and exceeds its threshold; after
    it trips the radial flows stay inside the remaining limits."""
    case = _relay_case([50.0, 100.0, 100.0])
    g = build_gsdf(case)
    sys = build_susceptance(case)
    inj = np.array([100.0, -100.0, 0.0])  # flow on line 1 is -66.7 > 60 = 1.2*50
    out = relay_fixed_point(case, sys, g, inj)
    assert out.iterations == 1
    assert out.tripped_lines == ((1,),)
    assert np.array_equal(out.final_state, [0, 1, 1])
    # all remaining flows within relay limits
    lim = case.arr.relay_threshold * case.arr.flow_limit
    assert np.all(np.abs(out.final_flows.flows) <= lim + 1e-6)


def test_relay_cascade_two_iterations_matches_naive():
    """First trip overloads the other corridor; verify against a step-by-step
    reference that rebuilds the sensitivity matrix from scratch."""
    case = _relay_case([50.0, 70.0, 70.0])
    g = build_gsdf(case)
    sys = build_susceptance(case)
    inj = np.array([100.0, -100.0, 0.0])
    # line1: 66.7 > 60 trips; then line2/3 carry 100 > 84 -> islanding of bus 2
    with pytest.raises(IslandingError):
        relay_fixed_point(case, sys, g, inj)

    # milder limits: second iteration trips nothing
    case2 = _relay_case([50.0, 90.0, 90.0])
    g2 = build_gsdf(case2)
    sys2 = build_susceptance(case2)
    out = relay_fixed_point(case2, sys2, g2, inj)
    # naive reference loop
    state = np.ones(3, dtype=np.int8)
    batches = []
    while True:
        gg = build_gsdf(case2, state)
        flows = gg.values @ inj
        lim = case2.arr.relay_threshold * case2.arr.flow_limit
        viol = np.flatnonzero((state == 1) & (np.abs(flows) > lim + 1e-6))
        if viol.size == 0:
            break
        batches.append(tuple(int(v) + 1 for v in viol))
        for v in viol:
            state[v] = 0
    assert out.tripped_lines == tuple(batches)
    assert np.array_equal(out.final_state, state)
    ref_flows = build_gsdf(case2, state).values @ inj
    assert np.abs(out.final_flows.flows - ref_flows).max() <= 1e-8


def stressed_relay_states(case, rng, n_draws, max_removals=3):
    """Post-contingency relay inputs: a settled dispatch, mildly over-scaled,
    whose flows must redistribute after up to three line removals."""
    from cascpath.dcopf import DispatchProblem, solve_problem
    from cascpath.gsdf import build_gsdf as _bg
    from cascpath.gsdf import island_partition

    g = _bg(case)
    draws = []
    while len(draws) < n_draws:
        scale = rng.uniform(0.7, 1.05)
        sol = solve_problem(DispatchProblem(
            case=case,
            gsdf=g,
            gen_state=np.ones(case.n_gen),
            gen_caps=case.arr.gen_pmax.copy(),
            loads=scale * case.arr.base_load,
        ))
        state = np.ones(case.n_line, dtype=np.int8)
        for lid in rng.choice(case.n_line, size=rng.integers(1, max_removals + 1),
                              replace=False):
            state[lid] = 0
        if len(island_partition(case, state)) > 1:
            continue
        gamma = rng.uniform(1.0, 1.19)
        draws.append((state, gamma * sol.injections))
    return draws


def _relay_outcome(case, state, p, use_woodbury):
    sys0 = build_susceptance(case, state)
    g0 = build_gsdf(case, state)
    try:
        out = relay_fixed_point(case, sys0, g0, p, use_woodbury=use_woodbury)
    except IslandingError as err:
        return ("islanded", tuple(map(tuple, err.partition)))
    return ("ok", out)


def test_relay_woodbury_equals_scratch(rts79):
    """The loop reaches the same outcome with rank updates or rebuilds,
    whether it settles at a fixed point or trips itself into islanding."""
    rng = np.random.default_rng(3)
    cascades = 0
    for state, p in stressed_relay_states(rts79, rng, 60):
        a = _relay_outcome(rts79, state, p, True)
        b = _relay_outcome(rts79, state, p, False)
        assert a[0] == b[0]
        if a[0] == "islanded":
            assert a[1] == b[1]
            cascades += 1
        else:
            ra, rb = a[1], b[1]
            assert np.array_equal(ra.final_state, rb.final_state)
            assert ra.tripped_lines == rb.tripped_lines
            assert np.abs(ra.final_flows.flows - rb.final_flows.flows).max() <= 1e-8
            if ra.iterations > 0:
                cascades += 1
    assert cascades >= 10, "stress generator produced too few cascades"


def test_relay_sequential_mode():
    case = _relay_case([50.0, 90.0, 90.0])
    g = build_gsdf(case)
    sys = build_susceptance(case)
    out = relay_fixed_point(case, sys, g, np.array([100.0, -100.0, 0.0]),
                            sequential=True)
    assert all(len(batch) == 1 for batch in out.tripped_lines)


def test_relay_termination_bound(rts79):
    """Iterations never exceed the line count (the trip set strictly shrinks)."""
    rng = np.random.default_rng(11)
    for state, p in stressed_relay_states(rts79, rng, 40):
        sys0 = build_susceptance(rts79, state)
        g0 = build_gsdf(rts79, state)
        try:
            out = relay_fixed_point(rts79, sys0, g0, p)
        except IslandingError:
            continue
        assert out.iterations <= rts79.n_line
