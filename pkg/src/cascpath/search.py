"""Markov-chain search over failure states.

Each step of a path is one random component failure (a generator or a line),
followed by the fast protection-relay cascade and a re-dispatch; relay trips
and re-dispatch are dependent consequences carrying probability one, so a
path's probability is the product of its random-failure probabilities only.
Children whose path probability falls below the threshold epsilon are
pruned; per scenario the m paths with the most load shedding are kept.

The enumeration itself contains no randomness: given a case, a scenario and
a config it is fully deterministic, and scenarios are independent work units
that may run on several worker threads sharing one line-status dictionary.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .casedata import CaseData, Line
from .dcpf import FLOW_SNAP_MW, relay_fixed_point
from .dcopf import build_lp_blocks, solve_baseline
from .gsdf import IslandingError, build_susceptance, gsdf_from_system, woodbury_update
from .lsd import Lsd
from .scenarios import Scenario


@dataclass(frozen=True)
class SearchConfig:
    epsilon: float = 1e-9
    m: int = 3
    depth_limit: int = 8
    workers: int = 1
    lsd_enabled: bool = True
    woodbury_enabled: bool = True
    # studies default to the physical per-bus generation floor; without it
    # the re-dispatch objective rewards dumping power at expensive buses
    # until line limits bind, which manufactures congestion at any load
    gen_nonnegative: bool = True
    sequential_relay: bool = False
    max_entries: int | None = None

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.depth_limit < 1:
            raise ValueError("depth_limit must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class SystemState:
    """Binary in-service status of all lines and generators."""

    line_state: np.ndarray
    gen_state: np.ndarray

    def __post_init__(self):
        self.line_state.setflags(write=False)
        self.gen_state.setflags(write=False)


@dataclass(frozen=True)
class CascadeEvent:
    kind: str            # "gen-failure" | "line-failure" | "relay-trip" | "redispatch"
    elements: tuple      # element labels like ("G05",) / ("L23", "L29")
    probability: float   # (0,1] for random failures, 1.0 otherwise
    shed_mw: float = 0.0  # shedding level after a redispatch event


@dataclass(frozen=True)
class CascadePath:
    scenario_index: int
    events: tuple
    probability: float
    shed_mw: float       # largest shedding level reached along the path
    terminal: str        # converged | below-threshold | islanded | depth-limit
    elements: tuple      # failed elements in order (random failures + relay trips)

    def sort_key(self):
        # severity snapped to the MW tolerance so sub-noise differences in
        # otherwise equal sheddings cannot reorder the selection
        return (-round(self.shed_mw, 6), -self.probability, self.elements)


def line_failure_probability(line: Line, flow: float) -> float:
    """Flow-dependent failure probability of one line.

    Base probability up to the long-term limit, a linear ramp between the
    limit and the relay threshold (reaching exactly 1 at the threshold), and
    1 above it.  Comparisons use a small MW snap so numerically equivalent
    operating points land on the same branch regardless of how the flow was
    computed.
    """
    a = abs(flow)
    lb = line.flow_limit_base
    beta = line.relay_threshold
    pb = line.base_fail_prob
    if a <= lb + FLOW_SNAP_MW:
        return pb
    if a <= beta * lb + FLOW_SNAP_MW:
        return min((1.0 - pb) * a / (beta * lb) + pb, 1.0)
    return 1.0


def line_failure_probabilities(case: CaseData, flows: np.ndarray) -> np.ndarray:
    """Vectorized line_failure_probability over all lines of a case."""
    a = np.abs(flows)
    lb = case.arr.flow_limit
    beta = case.arr.relay_threshold
    pb = case.arr.line_fail_prob
    ramp = np.minimum((1.0 - pb) * a / (beta * lb) + pb, 1.0)
    return np.where(
        a <= lb + FLOW_SNAP_MW,
        pb,
        np.where(a <= beta * lb + FLOW_SNAP_MW, ramp, 1.0),
    )


class _Timers:
    __slots__ = ("sampling", "dcpf", "dcopf")

    def __init__(self):
        self.sampling = 0.0
        self.dcpf = 0.0
        self.dcopf = 0.0

    def merge(self, other: "_Timers"):
        self.sampling += other.sampling
        self.dcpf += other.dcpf
        self.dcopf += other.dcopf


class _Node:
    """Settled operating point reached by a path prefix."""

    __slots__ = ("line_state", "gen_state", "injections", "shed_vector",
                 "flows", "shed_level", "gsdf", "sys")

    def __init__(self, line_state, gen_state, injections, shed_vector, flows,
                 shed_level, gsdf=None, sys=None):
        self.line_state = line_state
        self.gen_state = gen_state
        self.injections = injections
        self.shed_vector = shed_vector
        self.flows = flows
        self.shed_level = shed_level
        self.gsdf = gsdf   # carried only when the dictionary is disabled
        self.sys = sys


class SearchContext:
    """Per-study wiring shared by all scenario searches."""

    def __init__(self, case: CaseData, config: SearchConfig, lsd: Lsd | None = None):
        self.case = case
        self.config = config
        if config.lsd_enabled:
            self.lsd = lsd if lsd is not None else Lsd(
                case,
                use_woodbury=config.woodbury_enabled,
                gen_nonnegative=config.gen_nonnegative,
                max_entries=config.max_entries,
            )
        else:
            self.lsd = None
        arr = case.arr
        self.conv_gen_idx = np.flatnonzero((~arr.gen_is_wind) & (arr.gen_fail_prob > 0))
        self.gen_labels = tuple(f"G{g.id:02d}" for g in case.generators)
        self.line_labels = tuple(f"L{ln.id:02d}" for ln in case.lines)
        self.wind_idx = np.flatnonzero(arr.gen_is_wind)

    def effective_caps(self, scenario: Scenario) -> np.ndarray:
        """Per-unit capacity with wind entries set to the scenario output."""
        caps = self.case.arr.gen_pmax.copy()
        if self.wind_idx.size:
            caps[self.wind_idx] = scenario.wind_output
        return caps


def _settle(ctx: SearchContext, caps: np.ndarray, loads: np.ndarray,
            line_state: np.ndarray, gen_state: np.ndarray,
            injections_pre: np.ndarray, parent: _Node | None,
            timers: _Timers) -> tuple[_Node, tuple]:
    """Relay cascade then re-dispatch; returns (settled node, relay trip batches).

    Raises IslandingError if the triggering failure or a relay trip
    disconnects the network.
    """
    case = ctx.case
    cfg = ctx.config
    t0 = time.perf_counter()
    if ctx.lsd is not None:
        ent = ctx.lsd.entry(line_state)
        sys, gsdf = ent.sys, ent.gsdf
    elif parent is not None and np.array_equal(line_state, parent.line_state):
        sys, gsdf = parent.sys, parent.gsdf
    elif cfg.woodbury_enabled and parent is not None:
        removed = [int(i) + 1 for i in
                   np.flatnonzero((parent.line_state == 1) & (line_state == 0))]
        gsdf, sys = woodbury_update(case, parent.sys, parent.gsdf, removed)
    else:
        sys = build_susceptance(case, line_state)
        gsdf = gsdf_from_system(case, sys)
    outcome = relay_fixed_point(
        case, sys, gsdf, injections_pre,
        use_woodbury=cfg.woodbury_enabled,
        sequential=cfg.sequential_relay,
    )
    final_state = outcome.final_state
    if ctx.lsd is not None:
        ent = ctx.lsd.entry(final_state)
        final_gsdf, final_sys = ent.gsdf, ent.sys
    else:
        final_gsdf, final_sys = outcome.final_gsdf, outcome.final_sys
    timers.dcpf += time.perf_counter() - t0

    phi = np.concatenate([caps * gen_state, loads])
    t0 = time.perf_counter()
    if ctx.lsd is not None:
        sol = ctx.lsd.solve(final_state, phi)
    else:
        blocks = build_lp_blocks(case, final_gsdf, cfg.gen_nonnegative)
        sol = solve_baseline(blocks, phi)
    timers.dcopf += time.perf_counter() - t0

    if sol.status != "optimal":
        # numerical blackout: every remaining MW of load counts as shed
        injections = np.zeros(case.n_bus)
        shed_vector = loads.copy()
        shed_level = float(loads.sum())
    else:
        injections = sol.injections
        shed_vector = sol.shedding
        shed_level = sol.total_shed if sol.total_shed > FLOW_SNAP_MW else 0.0
    t0 = time.perf_counter()
    flows = final_gsdf.values @ injections
    timers.dcpf += time.perf_counter() - t0
    node = _Node(
        line_state=final_state,
        gen_state=gen_state,
        injections=injections,
        shed_vector=shed_vector,
        flows=flows,
        shed_level=shed_level,
        gsdf=None if ctx.lsd is not None else final_gsdf,
        sys=None if ctx.lsd is not None else final_sys,
    )
    return node, outcome.tripped_lines


def _redistribute_gen_loss(case: CaseData, caps: np.ndarray, node: _Node,
                           loads: np.ndarray, gen_idx: int) -> np.ndarray:
    """Pre-redispatch injections after losing one unit.

    The unit's pro-rata share of its bus generation is removed and spread
    over the remaining in-service units in proportion to capacity headroom,
    approximating the governor response that carries the system until the
    re-dispatch settles.  The returned vector stays balanced.
    """
    arr = case.arr
    p = node.injections.copy()
    in_service = node.gen_state.astype(bool)
    avail = np.where(in_service, caps, 0.0)
    bus_cap = np.zeros(case.n_bus)
    np.add.at(bus_cap, arr.gen_bus, avail)
    bus_gen = np.maximum(p + loads - node.shed_vector, 0.0)
    per_unit = bus_gen[arr.gen_bus] * avail / np.maximum(bus_cap[arr.gen_bus], 1e-12)
    lost = per_unit[gen_idx]
    if lost <= 0.0:
        return p
    failed_bus = arr.gen_bus[gen_idx]
    mask = in_service.copy()
    mask[gen_idx] = False
    headroom = np.where(mask, np.maximum(avail - per_unit, 0.0), 0.0)
    weights = headroom if headroom.sum() > 1e-9 else np.where(mask, avail, 0.0)
    total = weights.sum()
    if total <= 0.0:
        return p  # nothing can pick the loss up; re-dispatch will shed
    p[failed_bus] -= lost
    np.add.at(p, arr.gen_bus, lost * weights / total)
    return p


def _deenergized_load(case: CaseData, partition, caps: np.ndarray,
                      gen_state: np.ndarray, loads: np.ndarray) -> float:
    """Load in islands that retain no in-service generation capacity."""
    arr = case.arr
    avail = caps * gen_state
    bus_cap = np.zeros(case.n_bus)
    np.add.at(bus_cap, arr.gen_bus, avail)
    shed = 0.0
    for comp in partition:
        idx = np.asarray(comp, dtype=int) - 1
        if bus_cap[idx].sum() <= 0.0:
            shed += float(loads[idx].sum())
    return shed


def expand_state(ctx: SearchContext, scenario: Scenario, caps: np.ndarray,
                 node: _Node, depth: int, prob: float, events: tuple,
                 elements: tuple, shed_max: float, epsilon: float,
                 depth_limit: int, timers: _Timers,
                 out: list) -> str:
    """Enumerate surviving children of a settled state, appending every
    visited path to `out`; returns this node's terminal reason."""
    if depth >= depth_limit:
        return "depth-limit"
    case = ctx.case
    loads = scenario.load

    t0 = time.perf_counter()
    gen_live = node.gen_state[ctx.conv_gen_idx] == 1
    gen_probs = case.arr.gen_fail_prob[ctx.conv_gen_idx]
    gen_keep = gen_live & (prob * gen_probs >= epsilon)
    line_live = node.line_state == 1
    line_probs = line_failure_probabilities(case, node.flows)
    line_keep = line_live & (prob * line_probs >= epsilon)
    n_possible = int(np.count_nonzero(gen_live)) + int(np.count_nonzero(line_live))
    candidates = [
        ("g", int(g), float(case.arr.gen_fail_prob[g]))
        for g in ctx.conv_gen_idx[gen_keep]
    ] + [
        ("l", int(k), float(line_probs[k])) for k in np.flatnonzero(line_keep)
    ]
    timers.sampling += time.perf_counter() - t0

    if n_possible == 0:
        return "converged"
    if not candidates:
        return "below-threshold"

    for kind, idx, p_event in candidates:
        child_prob = prob * p_event
        if kind == "g":
            label = ctx.gen_labels[idx]
            child_gen_state = node.gen_state.copy()
            child_gen_state[idx] = 0
            child_line_state = node.line_state
            injections_pre = _redistribute_gen_loss(case, caps, node, loads, idx)
            fail_event = CascadeEvent("gen-failure", (label,), p_event)
        else:
            label = ctx.line_labels[idx]
            child_gen_state = node.gen_state
            child_line_state = node.line_state.copy()
            child_line_state[idx] = 0
            injections_pre = node.injections
            fail_event = CascadeEvent("line-failure", (label,), p_event)

        try:
            child, trips = _settle(
                ctx, caps, loads, child_line_state, child_gen_state,
                injections_pre, node, timers,
            )
        except IslandingError as err:
            island_shed = _deenergized_load(
                case, err.partition, caps, child_gen_state, loads
            )
            level = min(node.shed_level + island_shed, float(loads.sum()))
            out.append(CascadePath(
                scenario_index=scenario.index,
                events=events + (fail_event,),
                probability=child_prob,
                shed_mw=max(shed_max, level),
                terminal="islanded",
                elements=elements + (label,),
            ))
            continue

        child_events = [fail_event]
        child_elements = list(elements) + [label]
        for batch in trips:
            batch_labels = tuple(ctx.line_labels[lid - 1] for lid in sorted(batch))
            child_events.append(CascadeEvent("relay-trip", batch_labels, 1.0))
            child_elements.extend(batch_labels)
        child_events.append(
            CascadeEvent("redispatch", (), 1.0, shed_mw=child.shed_level)
        )
        child_events = events + tuple(child_events)
        child_elements = tuple(child_elements)
        child_shed_max = max(shed_max, child.shed_level)

        reason = expand_state(
            ctx, scenario, caps, child, depth + 1, child_prob, child_events,
            child_elements, child_shed_max, epsilon, depth_limit, timers, out,
        )
        out.append(CascadePath(
            scenario_index=scenario.index,
            events=child_events,
            probability=child_prob,
            shed_mw=child_shed_max,
            terminal=reason,
            elements=child_elements,
        ))
    return "converged"


def search_scenario(ctx: SearchContext, scenario: Scenario,
                    epsilon: float = None, m: int = None,
                    depth_limit: int = None,
                    timers: _Timers | None = None) -> list[CascadePath]:
    """Paths with the most shedding for one scenario (at most m of them).

    Ties break toward higher probability, then lexicographic element labels.
    """
    cfg = ctx.config
    epsilon = cfg.epsilon if epsilon is None else epsilon
    m = cfg.m if m is None else m
    depth_limit = cfg.depth_limit if depth_limit is None else depth_limit
    timers = timers if timers is not None else _Timers()

    caps = ctx.effective_caps(scenario)
    root_line_state = np.ones(ctx.case.n_line, dtype=np.int8)
    root_gen_state = np.ones(ctx.case.n_gen, dtype=np.int8)

    # root: intact topology, settled scenario dispatch (no relay step needed,
    # the dispatch respects the long-term limits by construction)
    case = ctx.case
    phi = np.concatenate([caps * root_gen_state, scenario.load])
    t0 = time.perf_counter()
    if ctx.lsd is not None:
        ent = ctx.lsd.entry(root_line_state)
        root_gsdf, root_sys = ent.gsdf, ent.sys
    else:
        root_sys = build_susceptance(case, root_line_state)
        root_gsdf = gsdf_from_system(case, root_sys)
    timers.dcpf += time.perf_counter() - t0
    t0 = time.perf_counter()
    if ctx.lsd is not None:
        sol = ctx.lsd.solve(root_line_state, phi)
    else:
        blocks = build_lp_blocks(case, root_gsdf, cfg.gen_nonnegative)
        sol = solve_baseline(blocks, phi)
    timers.dcopf += time.perf_counter() - t0
    if sol.status != "optimal":
        injections = np.zeros(case.n_bus)
        shed_vector = scenario.load.copy()
        shed_level = float(scenario.load.sum())
    else:
        injections, shed_vector = sol.injections, sol.shedding
        shed_level = sol.total_shed if sol.total_shed > FLOW_SNAP_MW else 0.0
    root = _Node(
        line_state=root_line_state,
        gen_state=root_gen_state,
        injections=injections,
        shed_vector=shed_vector,
        flows=root_gsdf.values @ injections,
        shed_level=shed_level,
        gsdf=None if ctx.lsd is not None else root_gsdf,
        sys=None if ctx.lsd is not None else root_sys,
    )

    paths: list[CascadePath] = []
    expand_state(ctx, scenario, caps, root, 0, 1.0, (), (), root.shed_level,
                 epsilon, depth_limit, timers, paths)
    paths.sort(key=CascadePath.sort_key)
    return paths[:m]


@dataclass
class StudyReport:
    paths: list
    hourly: list            # (hour, total_load_mw, max_shed_mw) per scenario
    graph_nodes: dict       # element label -> occurrence count
    graph_edges: dict       # (from,to) -> [count, max shed]
    timing: dict            # sampling / dcpf / dcopf / total seconds
    lsd_stats: dict
    errors: list
    workload: dict          # identifying signature for like-for-like comparison


def run_study(case: CaseData, scenarios: list[Scenario],
              config: SearchConfig) -> StudyReport:
    """Search every scenario and aggregate paths, series, graph and timing."""
    ctx = SearchContext(case, config)
    wall0 = time.perf_counter()
    results: dict[int, list[CascadePath]] = {}
    scenario_timers: dict[int, _Timers] = {}
    errors = []

    def work(i_scen):
        i, scen = i_scen
        t = _Timers()
        try:
            found = search_scenario(ctx, scen, timers=t)
        except Exception as exc:  # record, keep the study going
            return i, None, t, f"scenario {scen.index}: {exc!r}"
        return i, found, t, None

    items = list(enumerate(scenarios))
    if config.workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(work, items))
    else:
        outcomes = [work(it) for it in items]

    for i, found, t, err in outcomes:
        scenario_timers[i] = t
        if err is not None:
            errors.append(err)
        else:
            results[i] = found

    total = time.perf_counter() - wall0
    agg = _Timers()
    for t in scenario_timers.values():
        agg.merge(t)

    paths = []
    hourly = []
    for i, scen in enumerate(scenarios):
        found = results.get(i, [])
        paths.extend(found)
        max_shed = found[0].shed_mw if found else 0.0
        hourly.append((scen.index, float(scen.load.sum()), max_shed))

    nodes: dict[str, int] = {}
    edges: dict[tuple, list] = {}
    for p in paths:
        for el in p.elements:
            nodes[el] = nodes.get(el, 0) + 1
        for a, b in zip(p.elements, p.elements[1:]):
            rec = edges.setdefault((a, b), [0, 0.0])
            rec[0] += 1
            rec[1] = max(rec[1], p.shed_mw)

    lsd_stats = ctx.lsd.stats_dict() if ctx.lsd is not None else {}
    dcpf_time = agg.dcpf
    dcopf_time = agg.dcopf
    if ctx.lsd is not None:
        # entry construction happened inside dcpf-timed sections; reattribute
        # the LP-block assembly share to the dispatch phase
        dcpf_time -= ctx.lsd.timing["blocks"]
        dcopf_time += ctx.lsd.timing["blocks"]
    timing = {
        "sampling": agg.sampling,
        "dcpf": dcpf_time,
        "dcopf": dcopf_time,
        "total": total,
    }
    workload = {
        "case": case.name,
        "n_bus": case.n_bus,
        "n_line": case.n_line,
        "n_gen": case.n_gen,
        "scenarios": len(scenarios),
        "epsilon": config.epsilon,
        "m": config.m,
        "depth_limit": config.depth_limit,
    }
    return StudyReport(
        paths=paths,
        hourly=hourly,
        graph_nodes=nodes,
        graph_edges=edges,
        timing=timing,
        lsd_stats=lsd_stats,
        errors=errors,
        workload=workload,
    )
