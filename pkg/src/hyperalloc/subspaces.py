"""Per-subspace suitability measures and their product combination.

A task/node pairing is scored inside three independent subspaces:

* compatibility: binary, 1 when the node may take the task at all;
* communication: reciprocal of the worst per-target communication total,
  with zero communication mapping to +inf (perfect stability);
* capability: product of the running-maximum allocation probabilities of
  the task's virtual start and finish vertices on that node.

The combined suitability is the product over selected subspaces, with
two conventions: any zero annihilates the product (+inf times zero is
zero, incompatibility dominates) and +inf times a positive factor stays
+inf.

Capability runs a discrete dynamic over a row-stochastic matrix ``pi``
(rows: lifted vertices of the task's flow lattice; columns: nodes).  Row
initialisation multiplies two attenuation factors and normalises:

* ``a1``: one minus the node's share of the total execution time of the
  algorithm (a zero execution time contributes no share, so its factor
  is one);
* ``a2``: one minus the node's share of the total round-trip time to the
  hosts of the algorithm's flow predecessors (zero round-trip total
  again gives factor one).

Updates add a zero-sum drift ``omega`` proportional to the node's
execution rate for the algorithm divided by the round-trip total to the
current most-likely hosts of the flow predecessors, then clamp to [0, 1]
and renormalise.  ``capital`` keeps the running entrywise maximum of
``pi`` across iterations; incapable pairings are pinned to exactly zero
throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import HyperallocError
from .graphs import (
    AlgorithmId,
    SemiLattice,
    adjacency_powers,
    flow_critical_cost,
    flow_predecessors,
    max_flow_length,
)
from .network import com_t_max, ict, round_trip_matrix


class SubspaceError(HyperallocError):
    """Invalid subspace input or state."""


class UnknownPair(SubspaceError):
    """Compatibility queried for an undeclared task or node."""


class DegenerateRow(SubspaceError):
    """A probability row has no positive mass to normalise."""


class DuplicateSubspace(SubspaceError):
    """The same subspace appears twice in a combination."""


class Subspace(str, Enum):
    CMPT = "cmpt"
    COMM = "comm"
    CPLT = "cplt"


@dataclass(frozen=True)
class SubspaceScore:
    subspace: Subspace
    value: float

    def __post_init__(self):
        v = self.value
        if self.subspace is Subspace.CMPT and v not in (0.0, 1.0):
            raise SubspaceError(f"compatibility score must be 0 or 1, got {v}")
        if self.subspace is Subspace.COMM and (v < 0 or math.isnan(v)):
            raise SubspaceError(f"communication score must be >= 0, got {v}")
        if self.subspace is Subspace.CPLT and not (0.0 <= v <= 1.0):
            raise SubspaceError(f"capability score must lie in [0, 1], got {v}")


class CompatibilityTable:
    """Total boolean relation on declared tasks x declared nodes."""

    def __init__(self, tasks, nodes, incompatible=()):
        self.tasks = frozenset(tasks)
        self.nodes = frozenset(nodes)
        self.incompatible = frozenset(incompatible)
        for task, node in self.incompatible:
            if task not in self.tasks or node not in self.nodes:
                raise UnknownPair(f"incompatibility on undeclared pair ({task}, {node})")

    def compatible(self, task, node) -> bool:
        if task not in self.tasks or node not in self.nodes:
            raise UnknownPair(f"undeclared pair ({task}, {node})")
        return (task, node) not in self.incompatible


def cmpt_score(table: CompatibilityTable, task, node) -> SubspaceScore:
    return SubspaceScore(Subspace.CMPT, 1.0 if table.compatible(task, node) else 0.0)


def communication_score(net, profile, task, node, mode="expected", rng=None) -> SubspaceScore:
    """Reciprocal of the worst-case communication total for (task, node)."""
    return SubspaceScore(Subspace.COMM, ict(com_t_max(net, profile, task, node, mode, rng)))


class CapabilityState:
    """Probability dynamics for one task's algorithms over the nodes.

    Rows follow the lifted vertex order of the task's flow lattice
    (virtual starts, real algorithms ascending, virtual finishes);
    columns follow node index order.  ``normalizers`` records the row
    normalisation constant applied at initialisation.
    """

    def __init__(self, sl, nodes, pi, capital, capable, exec_times, pr, normalizers, pred_rows, ct, step):
        self.sl = sl
        self.nodes = nodes
        self.col_index = {label: i for i, label in enumerate(nodes)}
        self.algorithms = sl.order
        self.row_index = dict(sl.position)
        self.pi = pi
        self.capital = capital
        self.capable = capable
        self.exec_times = exec_times
        self.pr = pr
        self.normalizers = normalizers
        self.pred_rows = pred_rows
        self.ct = ct
        self.step = step
        self.iterations = 0
        self.converged = None
        if len(sl.components) == 1:
            self.top_row = sl.position[sl.components[0].top]
            self.bottom_row = sl.position[sl.components[0].bottom]
        else:
            self.top_row = None
            self.bottom_row = None


def _as_factor(value, n_nodes, what):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n_nodes, float(arr))
    if arr.shape != (n_nodes,):
        raise ValueError(f"{what} override must be a scalar or one value per node")
    if (arr < 0).any():
        raise ValueError(f"{what} override must be non-negative")
    return arr


def pi_init(
    sl: SemiLattice,
    nodes,
    exec_times,
    incapable=(),
    net=None,
    assignment=None,
    a1_override=None,
    a2_override=None,
    step: float = 0.1,
) -> CapabilityState:
    """Initial allocation-probability matrix for one task.

    ``exec_times`` maps node label -> execution-time row (one value per
    real algorithm, index order); virtual vertices execute in zero time.
    ``incapable`` lists (node label, algorithm index) pairs whose entries
    are pinned to zero.  ``assignment`` optionally fixes the host node of
    real algorithms for the predecessor round-trip totals; unassigned
    predecessors fall back to the most likely node of their own already
    initialised row (rows are filled in topological order, so predecessor
    rows always exist).  ``a1_override``/``a2_override`` map a vertex to
    a replacement factor (scalar or per-node vector) and exist so callers
    can reproduce externally supplied factors exactly.

    Without a network model all round-trip totals are zero and the
    second factor degenerates to one.
    """
    if not 0 < step <= 1:
        raise ValueError(f"step must lie in (0, 1], got {step}")
    nodes = tuple(nodes)
    n_nodes = len(nodes)
    if n_nodes == 0:
        raise ValueError("at least one node is required")
    rows = sl.order
    n_rows = len(rows)
    n_real = sl.base.vertex_count

    et = np.zeros((n_rows, n_nodes))
    for c, label in enumerate(nodes):
        if label not in exec_times:
            raise ValueError(f"missing execution-time row for node {label}")
        row = np.asarray(exec_times[label], dtype=float)
        if row.shape != (n_real,):
            raise ValueError(
                f"execution-time row for {label} must have {n_real} entries, got {row.shape}"
            )
        if (row < 0).any():
            raise ValueError(f"execution times must be non-negative ({label})")
        for v in rows:
            if not v.is_virtual:
                et[sl.position[v], c] = row[v.index - 1]

    capable = np.ones((n_rows, n_nodes), dtype=bool)
    for label, index in incapable:
        if label not in nodes:
            raise ValueError(f"incapable entry references unknown node {label}")
        vid = AlgorithmId(index)
        if vid not in sl.position:
            raise ValueError(f"incapable entry references unknown algorithm index {index}")
        capable[sl.position[vid], nodes.index(label)] = False
    for r in range(n_rows):
        if not capable[r].any():
            raise DegenerateRow(f"algorithm {rows[r]} has no capable node")

    if net is not None:
        net_order = tuple(ref.label for ref in net.ordered)
        if nodes != net_order:
            raise ValueError("node order must match the network index order")
        ct = round_trip_matrix(net)
    else:
        ct = np.zeros((n_nodes, n_nodes))

    host_col = {}
    if assignment:
        for vid, label in assignment.items():
            if vid not in sl.position:
                raise ValueError(f"assignment references unknown vertex {vid}")
            if label not in nodes:
                raise ValueError(f"assignment references unknown node {label}")
            host_col[sl.position[vid]] = nodes.index(label)

    pred_rows = []
    for v in rows:
        preds = flow_predecessors(sl, v)
        pred_rows.append(tuple(sorted(sl.position[p] for p in preds)))

    a1_override = a1_override or {}
    a2_override = a2_override or {}
    pi = np.zeros((n_rows, n_nodes))
    normalizers = np.zeros(n_rows)
    for v in sl.topo:
        r = sl.position[v]
        et_row = et[r]
        total = et_row.sum()
        if total > 0:
            a1 = np.where(et_row != 0, 1.0 - et_row / total, 1.0)
        else:
            a1 = np.ones(n_nodes)
        if v in a1_override:
            a1 = _as_factor(a1_override[v], n_nodes, "a1")

        kappa = np.zeros(n_nodes)
        for p in pred_rows[r]:
            col = host_col.get(p)
            if col is None:
                col = int(np.argmax(pi[p]))
            kappa += ct[:, col]
        total_kappa = kappa.sum()
        if total_kappa > 0:
            a2 = np.where(kappa != 0, 1.0 - kappa / total_kappa, 1.0)
        else:
            a2 = np.ones(n_nodes)
        if v in a2_override:
            a2 = _as_factor(a2_override[v], n_nodes, "a2")

        raw = a1 * a2 * capable[r]
        mass = raw.sum()
        if mass <= 0:
            raise DegenerateRow(f"row for {v} has no positive mass")
        pi[r] = raw / mass
        normalizers[r] = 1.0 / mass

    pr = np.divide(1.0, et, out=np.zeros_like(et), where=et > 0)
    return CapabilityState(
        sl,
        nodes,
        pi,
        pi.copy(),
        capable,
        et,
        pr,
        normalizers,
        tuple(pred_rows),
        ct,
        step,
    )


def omega_update(state: CapabilityState) -> np.ndarray:
    """Zero-sum drift matrix for one iteration of the dynamics.

    Raw pull of node i for a row is the execution rate (reciprocal
    execution time; zero time means no pull) divided by the round-trip
    total from i to the current most-likely hosts of the row's flow
    predecessors.  A zero denominator leaves the rate alone.  Raw pulls
    are normalised over capable entries and shifted to zero sum, scaled
    by the step size; rows with no pull (or a single capable node) do
    not drift.
    """
    pi = state.pi
    n_rows, n_nodes = pi.shape
    arg = np.argmax(pi, axis=1)
    omega = np.zeros_like(pi)
    for r in range(n_rows):
        mask = state.capable[r]
        raw = state.pr[r].copy()
        preds = state.pred_rows[r]
        if preds:
            denom = state.ct[:, arg[list(preds)]].sum(axis=1)
            positive = denom > 0
            raw = np.where(positive, np.divide(raw, np.where(positive, denom, 1.0)), raw)
        raw = raw * mask
        mass = raw.sum()
        if mass <= 0:
            continue
        u = raw / mass
        m = int(mask.sum())
        omega[r, mask] = state.step * (u[mask] - 1.0 / m)
    return omega


def pi_limit(state: CapabilityState, tol: float = 1e-6, max_iter: int = 10_000) -> CapabilityState:
    """Iterate the dynamics until the entrywise change drops below tol.

    Mutates and returns ``state``.  Hitting ``max_iter`` without
    converging only flags ``state.converged = False``; the state remains
    usable.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    converged = False
    for _ in range(max_iter):
        omega = omega_update(state)
        new = np.clip(state.pi + omega, 0.0, 1.0)
        new[~state.capable] = 0.0
        new /= new.sum(axis=1, keepdims=True)
        change = float(np.abs(new - state.pi).max())
        state.pi = new
        np.maximum(state.capital, new, out=state.capital)
        state.iterations += 1
        if change < tol:
            converged = True
            break
    state.converged = converged
    return state


def capital_pi(state: CapabilityState, vertex, node) -> float:
    """Running-maximum allocation probability of a vertex on a node."""
    if vertex not in state.row_index:
        raise SubspaceError(f"unknown vertex {vertex}")
    if node not in state.col_index:
        raise SubspaceError(f"unknown node {node}")
    return float(state.capital[state.row_index[vertex], state.col_index[node]])


def cplt_score(state: CapabilityState, node) -> SubspaceScore:
    """Capability of a node for the whole task.

    Product of the running-maximum probabilities of the virtual start
    and finish vertices on that node; the task counts as performable by
    the node only when both ends have been reachable with positive
    probability.
    """
    if state.top_row is None:
        raise SubspaceError("capability score requires a single-component task graph")
    if node not in state.col_index:
        raise SubspaceError(f"unknown node {node}")
    c = state.col_index[node]
    value = float(state.capital[state.top_row, c] * state.capital[state.bottom_row, c])
    return SubspaceScore(Subspace.CPLT, value)


def combine_scores(scores) -> float:
    """Product of per-subspace scores with annihilating zeros.

    Any zero factor forces a zero product even against +inf (an
    incompatible node stays unusable no matter how stable its
    communication); otherwise +inf propagates.  Each subspace may appear
    at most once.
    """
    seen = set()
    values = []
    for s in scores:
        if s.subspace in seen:
            raise DuplicateSubspace(f"subspace {s.subspace.value} given twice")
        seen.add(s.subspace)
        values.append(s.value)
    if any(v == 0 for v in values):
        return 0.0
    return math.prod(values, start=1.0)


def overall_comm_bound(state: CapabilityState, dt, sl: SemiLattice = None) -> float:
    """Worst-flow data transmission total for the most likely allocation.

    Every real vertex is pinned to its running-maximum node (lowest index
    on ties); each lattice edge between real vertices costs the
    round-trip entry ``dt[host(u), host(v)]`` and edges touching virtual
    vertices cost nothing.  The result is the exact maximum over
    execution flows, computed by longest-path dynamic programming, with
    the adjacency power stack bounding the walk lengths that can occur.
    """
    sl = sl or state.sl
    dt = np.asarray(dt, dtype=float)
    n_nodes = len(state.nodes)
    if dt.shape != (n_nodes, n_nodes):
        raise ValueError(f"dt must be {n_nodes}x{n_nodes}, got {dt.shape}")
    if sl.base.vertex_count == 0:
        return 0.0

    host = np.argmax(state.capital, axis=1)
    length = max(max_flow_length(sl), 1)
    powers = adjacency_powers(sl, length)
    walk_lengths = [p + 1 for p, mat in enumerate(powers) if mat.any()]
    longest = max(walk_lengths, default=0)
    if longest != max_flow_length(sl):
        raise SubspaceError("adjacency power walk bound disagrees with the lattice")

    def edge_cost(u, v):
        if u.is_virtual or v.is_virtual:
            return 0.0
        return float(dt[host[sl.position[u]], host[sl.position[v]]])

    return flow_critical_cost(sl, edge_cost=edge_cost)
