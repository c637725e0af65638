import numpy as np
import pytest

from cascpath.dcopf import DispatchProblem, build_lp_blocks, solve_baseline
from cascpath.gsdf import IslandingError, build_gsdf
from cascpath.lsd import (
    Lsd,
    affine_solve,
    lookup_or_build_gsdf,
    make_region,
    region_test,
    solve_dcopf_accelerated,
    state_key,
)


def _phi(case, loads=None, caps=None):
    caps = case.arr.gen_pmax.copy() if caps is None else caps
    loads = case.arr.base_load.copy() if loads is None else loads
    return np.concatenate([caps, loads])


def test_gsdf_cache_hit(rts79):
    lsd = Lsd(rts79)
    key = np.ones(rts79.n_line, dtype=np.int8)
    a = lookup_or_build_gsdf(lsd, rts79, key)
    b = lookup_or_build_gsdf(lsd, rts79, key)
    assert a is b
    assert lsd.stats.gsdf_hits == 1
    assert np.abs(a.values - build_gsdf(rts79).values).max() == 0.0


def test_gsdf_cache_builds_from_base(rts79):
    """A two-removal key built while a one-removal key is cached still
    matches the from-scratch construction."""
    lsd = Lsd(rts79)
    one = np.ones(rts79.n_line, dtype=np.int8)
    one[0] = 0
    lookup_or_build_gsdf(lsd, rts79, one)
    two = one.copy()
    two[5] = 0
    got = lookup_or_build_gsdf(lsd, rts79, two)
    ref = build_gsdf(rts79, two)
    assert np.abs(got.values - ref.values).max() <= 1e-8


def test_gsdf_cache_islanding(rts79):
    lsd = Lsd(rts79)
    key = np.ones(rts79.n_line, dtype=np.int8)
    key[10] = 0  # bridge to bus 7
    with pytest.raises(IslandingError):
        lookup_or_build_gsdf(lsd, rts79, key)


def test_region_contains_its_anchor(rts79):
    blocks = build_lp_blocks(rts79, build_gsdf(rts79))
    phi = _phi(rts79)
    sol = solve_baseline(blocks, phi)
    region = make_region(blocks, phi, sol)
    assert region is not None
    assert region_test(region, phi)
    # the affine map reproduces the generating solution
    again = affine_solve(region, blocks, phi)
    assert np.abs(again.injections - sol.injections).max() <= 1e-9
    assert again.objective == pytest.approx(sol.objective, abs=1e-8)


def test_region_rejects_active_set_change(rts79):
    """Pushing one load far enough changes the active set; the membership
    test must say no, and a full re-solve confirms a different basis."""
    blocks = build_lp_blocks(rts79, build_gsdf(rts79))
    phi0 = _phi(rts79, loads=0.8 * rts79.arr.base_load)
    sol0 = solve_baseline(blocks, phi0)
    region = make_region(blocks, phi0, sol0)
    phi1 = _phi(rts79, loads=1.02 * rts79.arr.base_load)
    sol1 = solve_baseline(blocks, phi1)
    if set(sol1.active_set) != set(sol0.active_set):
        assert not region_test(region, phi1)


def test_region_accepts_small_perturbation(two_bus):
    """80 -> 79 MW keeps the line binding; affine equals the full solve."""
    blocks = build_lp_blocks(two_bus, build_gsdf(two_bus))
    phi0 = _phi(two_bus)
    sol0 = solve_baseline(blocks, phi0)
    region = make_region(blocks, phi0, sol0)
    phi1 = _phi(two_bus, loads=np.array([0.0, 79.0]))
    assert region_test(region, phi1)
    fast = affine_solve(region, blocks, phi1)
    slow = solve_baseline(blocks, phi1)
    assert fast.shedding == pytest.approx([0.0, 29.0], abs=1e-9)
    assert fast.injections == pytest.approx([50.0, -50.0], abs=1e-9)
    assert fast.objective == pytest.approx(slow.objective, rel=1e-9)


def test_affine_matches_baseline_random(rts79):
    """Random in-region parameter draws: identical objective and solution."""
    rng = np.random.default_rng(17)
    blocks = build_lp_blocks(rts79, build_gsdf(rts79))
    phi0 = _phi(rts79, loads=0.85 * rts79.arr.base_load)
    sol0 = solve_baseline(blocks, phi0)
    region = make_region(blocks, phi0, sol0)
    hits = 0
    for _ in range(200):
        phi = phi0 * (1.0 + rng.uniform(-0.01, 0.01, phi0.size))
        if not region_test(region, phi):
            continue
        hits += 1
        fast = affine_solve(region, blocks, phi)
        slow = solve_baseline(blocks, phi)
        assert fast.objective == pytest.approx(slow.objective, rel=1e-6)
        assert np.abs(fast.injections - slow.injections).max() <= 1e-6
    assert hits >= 50


def test_solve_caches_and_reuses(rts79):
    lsd = Lsd(rts79)
    state = np.ones(rts79.n_line, dtype=np.int8)
    phi = _phi(rts79)
    first = lsd.solve(state, phi)
    second = lsd.solve(state, phi)
    assert second.from_cache
    assert np.array_equal(first.injections, second.injections)
    assert lsd.stats.region_hits == 1 and lsd.stats.region_misses == 1


def test_solve_transparent_over_draws(rts79):
    """Cache-enabled results equal cache-disabled full solves over random
    wind/load draws on a fixed line state."""
    rng = np.random.default_rng(23)
    lsd = Lsd(rts79)
    state = np.ones(rts79.n_line, dtype=np.int8)
    state[21] = 0
    blocks = build_lp_blocks(rts79, build_gsdf(rts79, state))
    for _ in range(100):
        scale = rng.uniform(0.4, 1.05)
        phi = _phi(rts79, loads=scale * rts79.arr.base_load)
        fast = lsd.solve(state, phi)
        slow = solve_baseline(blocks, phi)
        assert fast.objective == pytest.approx(slow.objective, rel=1e-6, abs=1e-6)
        assert np.abs(fast.shedding - slow.shedding).max() <= 1e-6
    assert lsd.stats.region_hits > 50


def test_dictionary_growth_bounded(rts79):
    lsd = Lsd(rts79, max_entries=3)
    for k in range(6):
        state = np.ones(rts79.n_line, dtype=np.int8)
        state[k] = 0
        lsd.entry(state)
    # 7 entries passed through (6 keys + the base state); 3 remain
    assert len(lsd) <= 3
    assert lsd.stats.evictions == 4


def test_solve_accelerated_entrypoint(rts79):
    lsd = Lsd(rts79)
    prob = DispatchProblem(
        case=rts79,
        gsdf=build_gsdf(rts79),
        gen_state=np.ones(rts79.n_gen),
        gen_caps=rts79.arr.gen_pmax.copy(),
        loads=rts79.arr.base_load.copy(),
    )
    sol = solve_dcopf_accelerated(lsd, prob)
    ref = solve_baseline(build_lp_blocks(rts79, prob.gsdf), prob.phi)
    assert sol.objective == pytest.approx(ref.objective, rel=1e-9)


def test_state_key_stable():
    a = state_key(np.array([1, 0, 1], dtype=np.int8))
    b = state_key([1, 0, 1])
    assert a == b and isinstance(a, bytes)


def test_persistence_roundtrip(tmp_path, rts79):
    lsd = Lsd(rts79)
    for k in (0, 3, 7):
        state = np.ones(rts79.n_line, dtype=np.int8)
        state[k] = 0
        lsd.entry(state)
    path = tmp_path / "dict.npz"
    lsd.save(path)
    fresh = Lsd(rts79)
    count = fresh.load(path)
    assert count == len(lsd)
    assert len(fresh) == len(lsd)
