"""Network data model: buses, lines, generators, and case file I/O.

Line reactances are per-unit on a 100 MVA base; all power quantities are MW
end-to-end (injection-to-flow sensitivities are dimensionless, so MW in gives
MW out).  Bus and element ids are dense 1..N externally and 0-based in the
derived numpy arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

DEFAULT_GEN_FAIL_PROB = 1e-3     # per step, when a case omits unit statistics
DEFAULT_RELAY_THRESHOLD = 1.2    # multiplier on the long-term line limit
DEFAULT_SHED_COST_FACTOR = 100.0  # shed cost = factor * max generation cost


class CaseError(Exception):
    """Base error for case file problems."""


class CaseParseError(CaseError):
    """Malformed case file."""


class CaseValidationError(CaseError):
    """Structurally valid file that violates a case invariant."""


@dataclass(frozen=True)
class Bus:
    id: int
    is_reference: bool = False
    base_load: float = 0.0


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    reactance: float
    flow_limit_base: float
    relay_threshold: float = DEFAULT_RELAY_THRESHOLD
    base_fail_prob: float = 0.0

    @property
    def susceptance(self) -> float:
        return 1.0 / self.reactance


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_max: float
    cost: float
    fail_prob: float = DEFAULT_GEN_FAIL_PROB
    kind: str = "conventional"  # "conventional" | "wind"

    @property
    def is_wind(self) -> bool:
        return self.kind == "wind"


@dataclass(frozen=True)
class CaseData:
    """Immutable network description; safe for concurrent read."""

    name: str
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    shed_cost: np.ndarray = field(repr=False, default=None)
    peak_load: float = 0.0

    def __post_init__(self):
        _validate(self)
        n = len(self.buses)
        if self.shed_cost is None:
            cap = DEFAULT_SHED_COST_FACTOR * max(
                (g.cost for g in self.generators), default=1.0
            )
            object.__setattr__(self, "shed_cost", np.full(n, cap))
        else:
            sc = np.asarray(self.shed_cost, dtype=float)
            if sc.ndim == 0:
                sc = np.full(n, float(sc))
            if sc.shape != (n,):
                raise CaseValidationError("shed_cost must be scalar or per-bus")
            object.__setattr__(self, "shed_cost", sc)
        if self.peak_load <= 0.0:
            object.__setattr__(self, "peak_load", float(sum(b.base_load for b in self.buses)))
        self.shed_cost.setflags(write=False)
        # derived arrays, 0-based indexing
        object.__setattr__(self, "_arrays", _DerivedArrays(self))

    # -- sizes ------------------------------------------------------------
    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_line(self) -> int:
        return len(self.lines)

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    @property
    def reference_bus(self) -> int:
        return next(b.id for b in self.buses if b.is_reference)

    @property
    def arr(self) -> "_DerivedArrays":
        return self._arrays

    def wind_generators(self) -> tuple[Generator, ...]:
        return tuple(g for g in self.generators if g.is_wind)


class _DerivedArrays:
    """Read-only numpy views over a case, built once at load time."""

    def __init__(self, case: CaseData):
        n, k, ng = case.n_bus, case.n_line, case.n_gen
        self.line_from = np.array([ln.from_bus - 1 for ln in case.lines], dtype=np.int64)
        self.line_to = np.array([ln.to_bus - 1 for ln in case.lines], dtype=np.int64)
        self.susceptance = np.array([ln.susceptance for ln in case.lines])
        self.flow_limit = np.array([ln.flow_limit_base for ln in case.lines])
        self.relay_threshold = np.array([ln.relay_threshold for ln in case.lines])
        self.line_fail_prob = np.array([ln.base_fail_prob for ln in case.lines])
        self.base_load = np.array([b.base_load for b in case.buses])
        self.gen_bus = np.array([g.bus - 1 for g in case.generators], dtype=np.int64)
        self.gen_pmax = np.array([g.p_max for g in case.generators])
        self.gen_cost = np.array([g.cost for g in case.generators])
        self.gen_fail_prob = np.array(
            [0.0 if g.is_wind else g.fail_prob for g in case.generators]
        )
        self.gen_is_wind = np.array([g.is_wind for g in case.generators], dtype=bool)
        self.ref = case.reference_bus - 1
        # generator-to-bus connection matrix (N x n_gen)
        conn = np.zeros((n, ng))
        for j, b in enumerate(self.gen_bus):
            conn[b, j] = 1.0
        self.connection = conn
        # per-bus generation cost: installed-capacity-weighted mean of the
        # units at the bus.  Deliberately independent of unit states and wind
        # availability so the dispatch cost vector is constant across a run.
        bus_cost = np.zeros(n)
        cap = conn @ self.gen_pmax
        weighted = conn @ (self.gen_pmax * self.gen_cost)
        nz = cap > 0
        bus_cost[nz] = weighted[nz] / cap[nz]
        self.bus_cost = bus_cost
        self.shed_cost = np.asarray(case.shed_cost)
        for a in vars(self).values():
            if isinstance(a, np.ndarray):
                a.setflags(write=False)


def _validate(case: CaseData) -> None:
    n = len(case.buses)
    if n == 0:
        raise CaseValidationError("case has no buses")
    ids = [b.id for b in case.buses]
    if sorted(ids) != list(range(1, n + 1)):
        raise CaseValidationError("bus ids must be dense 1..N")
    refs = [b.id for b in case.buses if b.is_reference]
    if len(refs) != 1:
        raise CaseValidationError(f"exactly one reference bus required, found {len(refs)}")
    if any(b.base_load < 0 for b in case.buses):
        raise CaseValidationError("bus loads must be nonnegative")

    line_ids = [ln.id for ln in case.lines]
    if sorted(line_ids) != list(range(1, len(line_ids) + 1)):
        raise CaseValidationError("line ids must be dense 1..K")
    for ln in case.lines:
        if ln.from_bus == ln.to_bus:
            raise CaseValidationError(f"line {ln.id} connects a bus to itself")
        if not (1 <= ln.from_bus <= n and 1 <= ln.to_bus <= n):
            raise CaseValidationError(f"line {ln.id} references an unknown bus")
        if ln.reactance <= 0:
            raise CaseValidationError(f"line {ln.id} has nonpositive reactance")
        if ln.flow_limit_base <= 0:
            raise CaseValidationError(f"line {ln.id} has nonpositive flow limit")
        if ln.relay_threshold <= 1.0:
            raise CaseValidationError(f"line {ln.id} relay threshold must exceed 1")
        if not 0.0 <= ln.base_fail_prob <= 1.0:
            raise CaseValidationError(f"line {ln.id} failure probability outside [0,1]")

    gen_ids = [g.id for g in case.generators]
    if sorted(gen_ids) != list(range(1, len(gen_ids) + 1)):
        raise CaseValidationError("generator ids must be dense 1..G")
    for g in case.generators:
        if not (1 <= g.bus <= n):
            raise CaseValidationError(f"generator {g.id} references an unknown bus")
        if g.p_max < 0:
            raise CaseValidationError(f"generator {g.id} has negative capacity")
        if not 0.0 <= g.fail_prob <= 1.0:
            raise CaseValidationError(f"generator {g.id} failure probability outside [0,1]")
        if g.kind not in ("conventional", "wind"):
            raise CaseValidationError(f"generator {g.id} has unknown kind {g.kind!r}")

    if len(case.lines) and not _connected(n, case.lines):
        raise CaseValidationError("network graph is disconnected with all lines in service")
    if n > 1 and not case.lines:
        raise CaseValidationError("network graph is disconnected with all lines in service")


def _connected(n: int, lines) -> bool:
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for ln in lines:
        a, b = find(ln.from_bus - 1), find(ln.to_bus - 1)
        if a != b:
            parent[a] = b
    root = find(0)
    return all(find(i) == root for i in range(n))


def incidence_column(case: CaseData, line_id: int) -> np.ndarray:
    """Node-branch incidence column: +1 at the line's from bus, -1 at its to bus."""
    if not 1 <= line_id <= case.n_line:
        raise KeyError(f"unknown line id {line_id}")
    col = np.zeros(case.n_bus)
    ln = case.lines[line_id - 1]
    col[ln.from_bus - 1] = 1.0
    col[ln.to_bus - 1] = -1.0
    return col


def incidence_matrix(case: CaseData) -> np.ndarray:
    """Full N x K node-branch incidence matrix."""
    mat = np.zeros((case.n_bus, case.n_line))
    mat[case.arr.line_from, np.arange(case.n_line)] = 1.0
    mat[case.arr.line_to, np.arange(case.n_line)] = -1.0
    return mat


# ---------------------------------------------------------------------------
# case file I/O (JSON schema documented in README)
# ---------------------------------------------------------------------------

def case_to_dict(case: CaseData) -> dict:
    return {
        "name": case.name,
        "peak_load_mw": case.peak_load,
        "shed_cost": case.shed_cost.tolist(),
        "buses": [
            {"id": b.id, "reference": b.is_reference, "load_mw": b.base_load}
            for b in case.buses
        ],
        "lines": [
            {
                "id": ln.id,
                "from": ln.from_bus,
                "to": ln.to_bus,
                "reactance": ln.reactance,
                "limit_mw": ln.flow_limit_base,
                "relay_threshold": ln.relay_threshold,
                "fail_prob": ln.base_fail_prob,
            }
            for ln in case.lines
        ],
        "generators": [
            {
                "id": g.id,
                "bus": g.bus,
                "p_max_mw": g.p_max,
                "cost": g.cost,
                "fail_prob": g.fail_prob,
                "kind": g.kind,
            }
            for g in case.generators
        ],
    }


def case_from_dict(data: dict) -> CaseData:
    try:
        buses = tuple(
            Bus(
                id=int(b["id"]),
                is_reference=bool(b.get("reference", False)),
                base_load=float(b.get("load_mw", 0.0)),
            )
            for b in data["buses"]
        )
        lines = tuple(
            Line(
                id=int(ln["id"]),
                from_bus=int(ln["from"]),
                to_bus=int(ln["to"]),
                reactance=float(ln["reactance"]),
                flow_limit_base=float(ln["limit_mw"]),
                relay_threshold=float(ln.get("relay_threshold", DEFAULT_RELAY_THRESHOLD)),
                base_fail_prob=float(ln.get("fail_prob", 0.0)),
            )
            for ln in data["lines"]
        )
        gens = tuple(
            Generator(
                id=int(g["id"]),
                bus=int(g["bus"]),
                p_max=float(g["p_max_mw"]),
                cost=float(g.get("cost", 0.0)),
                fail_prob=float(g.get("fail_prob", DEFAULT_GEN_FAIL_PROB)),
                kind=str(g.get("kind", "conventional")),
            )
            for g in data["generators"]
        )
        shed = data.get("shed_cost")
        peak = float(data.get("peak_load_mw", 0.0))
        name = str(data.get("name", "unnamed"))
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseParseError(f"malformed case file: {exc}") from exc
    return CaseData(
        name=name,
        buses=buses,
        lines=lines,
        generators=gens,
        shed_cost=np.asarray(shed, dtype=float) if shed is not None else None,
        peak_load=peak,
    )


def load_case(path) -> CaseData:
    """Parse and validate a JSON case file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise CaseParseError(f"cannot read case file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CaseParseError(f"case file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise CaseParseError(f"case file {path} must contain a JSON object")
    return case_from_dict(data)


def save_case(case: CaseData, path) -> None:
    with open(path, "w") as fh:
        json.dump(case_to_dict(case), fh, indent=1)
        fh.write("\n")
