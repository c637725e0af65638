"""Injection-to-flow sensitivity matrices and their rank-k topology updates.

The K x N sensitivity matrix maps bus injections (MW) to line flows (MW)
under the linearized network model.  It is built from a dense factorization
of the reduced bus susceptance matrix; removing lines is handled either by a
fresh factorization or by a small-rank update that reuses the cached reduced
inverse, so the work per topology change is an l x l inverse plus matrix
multiplies instead of a full (N-1)-dimensional solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .casedata import CaseData

# relative pivot tolerance below which a removal set is declared islanding
SINGULARITY_RTOL = 1e-9


class IslandingError(Exception):
    """Raised when a line state leaves the in-service graph disconnected.

    `partition` lists the bus components (1-based ids) of the disconnected
    subgraph so callers can account for de-energized load.
    """

    def __init__(self, message: str, partition=None, line_state=None):
        super().__init__(message)
        self.partition = partition
        self.line_state = line_state


@dataclass(frozen=True)
class GsdfMatrix:
    """Sensitivity matrix for one line state; immutable value object."""

    values: np.ndarray        # K x N, zero column at the reference bus
    line_state: np.ndarray    # K binary, 1 = in service
    reference_bus: int        # 1-based id

    def __post_init__(self):
        self.values.setflags(write=False)
        self.line_state.setflags(write=False)


@dataclass(frozen=True)
class SusceptanceSystem:
    """Bus/branch susceptance matrices with the cached reduced inverse."""

    bus_matrix: np.ndarray      # N x N
    branch_matrix: np.ndarray   # K x N, zero rows for out-of-service lines
    reduced_inverse: np.ndarray  # (N-1) x (N-1)
    line_state: np.ndarray
    reference_bus: int

    def __post_init__(self):
        for a in (self.bus_matrix, self.branch_matrix, self.reduced_inverse,
                  self.line_state):
            a.setflags(write=False)


def normalize_line_state(case: CaseData, line_state) -> np.ndarray:
    if line_state is None:
        return np.ones(case.n_line, dtype=np.int8)
    arr = np.asarray(line_state).astype(np.int8)
    if arr.shape != (case.n_line,):
        raise ValueError(f"line state must have length {case.n_line}")
    return arr


def island_partition(case: CaseData, line_state) -> list[list[int]]:
    """Connected components (1-based bus ids) of the in-service graph."""
    state = normalize_line_state(case, line_state)
    parent = list(range(case.n_bus))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for k in range(case.n_line):
        if state[k]:
            a, b = find(case.arr.line_from[k]), find(case.arr.line_to[k])
            if a != b:
                parent[a] = b
    groups: dict[int, list[int]] = {}
    for i in range(case.n_bus):
        groups.setdefault(find(i), []).append(i + 1)
    return sorted(groups.values())


def _check_connected(case: CaseData, state: np.ndarray) -> None:
    parts = island_partition(case, state)
    if len(parts) > 1:
        raise IslandingError(
            f"in-service graph splits into {len(parts)} islands",
            partition=parts,
            line_state=state.copy(),
        )


def build_susceptance(case: CaseData, line_state=None) -> SusceptanceSystem:
    """Assemble the susceptance system and factorize the reduced bus matrix."""
    state = normalize_line_state(case, line_state)
    _check_connected(case, state)
    n, k = case.n_bus, case.n_line
    b = case.arr.susceptance * state
    bus = np.zeros((n, n))
    branch = np.zeros((k, n))
    fr, to = case.arr.line_from, case.arr.line_to
    for i in range(k):
        if not state[i]:
            continue
        bi = b[i]
        bus[fr[i], fr[i]] += bi
        bus[to[i], to[i]] += bi
        bus[fr[i], to[i]] -= bi
        bus[to[i], fr[i]] -= bi
        branch[i, fr[i]] = bi
        branch[i, to[i]] = -bi
    keep = np.arange(n) != case.arr.ref
    reduced = bus[np.ix_(keep, keep)]
    if n > 1:
        reduced_inv = np.linalg.inv(reduced)
    else:
        reduced_inv = np.zeros((0, 0))
    return SusceptanceSystem(
        bus_matrix=bus,
        branch_matrix=branch,
        reduced_inverse=reduced_inv,
        line_state=state,
        reference_bus=case.arr.ref + 1,
    )


def gsdf_from_system(case: CaseData, sys: SusceptanceSystem) -> GsdfMatrix:
    n = case.n_bus
    keep = np.arange(n) != case.arr.ref
    values = np.zeros((case.n_line, n))
    if n > 1:
        values[:, keep] = sys.branch_matrix[:, keep] @ sys.reduced_inverse
    return GsdfMatrix(
        values=values,
        line_state=sys.line_state.copy(),
        reference_bus=sys.reference_bus,
    )


def build_gsdf(case: CaseData, line_state=None) -> GsdfMatrix:
    """Sensitivity matrix from a fresh dense factorization of the line state."""
    return gsdf_from_system(case, build_susceptance(case, line_state))


def woodbury_update(
    case: CaseData,
    sys: SusceptanceSystem,
    gsdf: GsdfMatrix,
    removed_lines,
) -> tuple[GsdfMatrix, SusceptanceSystem]:
    """Remove lines via a small-rank update of the cached reduced inverse.

    Returns the updated (gsdf, susceptance system) pair.  Raises
    IslandingError when the l x l capacitance matrix is singular within
    tolerance, which is exactly the case where the removal disconnects the
    in-service graph.
    """
    removed = sorted(set(int(r) for r in removed_lines))
    if not removed:
        return gsdf, sys
    state = sys.line_state.copy()
    for lid in removed:
        if not 1 <= lid <= case.n_line:
            raise KeyError(f"unknown line id {lid}")
        if not state[lid - 1]:
            raise ValueError(f"line {lid} is already out of service")
        state[lid - 1] = 0

    n = case.n_bus
    ref = case.arr.ref
    keep = np.arange(n) != ref
    idx = np.array([lid - 1 for lid in removed])
    b = case.arr.susceptance[idx]
    # reduced incidence columns of the removed lines
    m_full = np.zeros((n, len(idx)))
    m_full[case.arr.line_from[idx], np.arange(len(idx))] = 1.0
    m_full[case.arr.line_to[idx], np.arange(len(idx))] = -1.0
    m_red = m_full[keep, :]

    u = sys.reduced_inverse @ m_red                      # (N-1) x l
    cap = -np.diag(1.0 / b) + m_red.T @ u                # l x l capacitance
    sv = np.linalg.svd(cap, compute_uv=False)
    if sv[-1] <= SINGULARITY_RTOL * max(sv[0], 1.0):
        raise IslandingError(
            f"removing lines {removed} islands the network "
            f"(capacitance matrix singular, sv ratio {sv[-1] / max(sv[0], 1e-300):.2e})",
            partition=island_partition(case, state),
            line_state=state,
        )
    c = np.linalg.inv(cap)

    reduced_inv_new = sys.reduced_inverse - u @ c @ u.T

    # branch matrix with the removed rows zeroed
    branch_new = sys.branch_matrix.copy()
    branch_new[idx, :] = 0.0
    psi0 = gsdf.values.copy()
    psi0[idx, :] = 0.0
    psi_red = psi0[:, keep]
    psi_new = np.zeros_like(psi0)
    psi_new[:, keep] = psi_red - (psi_red @ m_red) @ c @ u.T

    bus_new = sys.bus_matrix - (m_full * b) @ m_full.T

    sys_new = SusceptanceSystem(
        bus_matrix=bus_new,
        branch_matrix=branch_new,
        reduced_inverse=reduced_inv_new,
        line_state=state,
        reference_bus=sys.reference_bus,
    )
    gsdf_new = GsdfMatrix(
        values=psi_new,
        line_state=state.copy(),
        reference_bus=gsdf.reference_bus,
    )
    return gsdf_new, sys_new


def dump_matrix(gsdf: GsdfMatrix) -> str:
    """Plain-text dump of the sensitivity matrix, for fixtures and debugging."""
    lines = [f"# gsdf ref_bus={gsdf.reference_bus} "
             f"in_service={int(gsdf.line_state.sum())}/{gsdf.line_state.size}"]
    for i, row in enumerate(gsdf.values):
        lines.append(f"L{i + 1:<4d} " + " ".join(f"{v: .10f}" for v in row))
    return "\n".join(lines) + "\n"
