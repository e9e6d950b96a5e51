"""Coordinate descent on the relaxation dual, in two equivalent modes.

The dual objective is the sum over the support of each table's maximum.
Sweeping the extended clusters in insertion order, one block update per
cluster, never increases it.  The two modes are:

* ``beliefs`` -- tables are updated directly.  For a cluster ``c`` with
  proper sub-clusters ``S``, let ``F = b_c + sum_s b_s`` (sub-tables
  broadcast into the scope of ``c``).  Then each new sub-table is
  ``max over c\\s of F, divided by |S|``, and the new cluster table is
  ``F minus the sum of the new sub-tables``.  No messages or original
  potentials are needed after initialisation (``b_t = theta_t`` on original
  clusters, zero elsewhere).
* ``messages`` -- one table per (cluster, proper sub-cluster) edge, updated
  by the equivalent closed form; beliefs are reconstructed from potentials
  and messages to evaluate the dual.  Kept for cross-checking and for
  storage comparisons; both modes produce identical dual traces up to
  floating-point noise.

Self sub-clusters (a cluster listed among its own sub-clusters) carry a
vacuous constraint; they are skipped everywhere and their message is pinned
to zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .factor_graph import Cluster, FactorGraph, energy, table_cells, table_shape
from .relaxations import RelaxationSpec


class CoverageError(ValueError):
    """The relaxation does not give a table to something that needs one."""


@dataclass
class SolverParams:
    """Stopping rules for the solver and the pursuit loop around it."""

    inner_tol: float = 1e-8
    outer_tol: float = 1e-6
    max_sweeps: int = 1000
    pursuit_sweeps: int = 20
    clusters_per_round: int = 20
    time_limit: float = 3600.0

    def __post_init__(self):
        for name in ("inner_tol", "outer_tol", "max_sweeps", "pursuit_sweeps",
                     "clusters_per_round", "time_limit"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class TraceRecord:
    sweep: int
    seconds: float
    dual: float
    primal: float
    pursuit_round: int = 0
    algorithm: str = ""


@dataclass
class DualTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    @property
    def duals(self) -> list[float]:
        return [r.dual for r in self.records]

    @property
    def primals(self) -> list[float]:
        return [r.primal for r in self.records]

    def __len__(self) -> int:
        return len(self.records)


class BeliefState:
    """One table per support cluster, indexed like potential tables."""

    def __init__(self, tables: dict[Cluster, np.ndarray]):
        self.tables = tables

    def __getitem__(self, t: Cluster) -> np.ndarray:
        return self.tables[t]

    def __setitem__(self, t: Cluster, v: np.ndarray) -> None:
        self.tables[t] = v

    def __contains__(self, t: Cluster) -> bool:
        return t in self.tables

    def copy(self) -> "BeliefState":
        return BeliefState({t: v.copy() for t, v in self.tables.items()})


class MessageState:
    """One table per (cluster, proper sub-cluster) edge, over the sub scope."""

    def __init__(self, tables: dict[tuple[Cluster, Cluster], np.ndarray]):
        self.tables = tables

    def __getitem__(self, edge: tuple[Cluster, Cluster]) -> np.ndarray:
        return self.tables[edge]

    def __setitem__(self, edge: tuple[Cluster, Cluster], v: np.ndarray) -> None:
        self.tables[edge] = v

    def copy(self) -> "MessageState":
        return MessageState({e: v.copy() for e, v in self.tables.items()})


def _embed_index(sub: Cluster, sup: Cluster) -> tuple:
    """Indexing tuple that reshapes a sub-scope table for broadcasting into
    the super scope (both scopes sorted, sub contained in sup)."""
    sub_set = set(sub)
    return tuple(slice(None) if v in sub_set else None for v in sup)


def _max_axes(sub: Cluster, sup: Cluster) -> tuple[int, ...]:
    sub_set = set(sub)
    return tuple(i for i, v in enumerate(sup) if v not in sub_set)


def init_beliefs(graph: FactorGraph, spec: RelaxationSpec) -> BeliefState:
    """Tables equal the log-potentials on original clusters, zero elsewhere."""
    support = spec.support
    tables: dict[Cluster, np.ndarray] = {}
    shape_of = lambda t: table_shape(t, graph.cardinalities)
    for t in support:
        tables[t] = np.zeros(shape_of(t))
    missing = [c for c in graph.clusters if c not in tables]
    if missing:
        raise CoverageError(
            f"original clusters {missing} have no table under this relaxation"
        )
    for p in graph.potentials:
        tables[p.scope] = p.values.copy()
    return BeliefState(tables)


def init_messages(spec: RelaxationSpec, cardinalities: Sequence[int]) -> MessageState:
    tables = {}
    for c in spec.extended_clusters:
        for s in spec.proper_subs_of(c):
            tables[(c, s)] = np.zeros(table_shape(s, cardinalities))
    return MessageState(tables)


def dual_objective(beliefs: BeliefState) -> float:
    """Sum over the support of each table's maximum entry."""
    return float(sum(v.max() for v in beliefs.tables.values()))


def dual_decrease(beliefs: BeliefState, c: Cluster, sub_clusters: Sequence[Cluster]) -> float:
    """Objective drop a block update of ``c`` would achieve right now:
    separate maxima minus the joint maximum."""
    subs = [s for s in sub_clusters if s != c]
    if not subs:
        return 0.0
    bc = beliefs[c]
    joint = bc.copy()
    separate = float(bc.max())
    for s in subs:
        bs = beliefs[s]
        joint += bs[_embed_index(s, c)]
        separate += float(bs.max())
    return separate - float(joint.max())


def update_cluster_beliefs(
    beliefs: BeliefState, c: Cluster, sub_clusters: Sequence[Cluster]
) -> float:
    """One block update in belief mode; returns the realised dual drop.

    All new sub-tables are computed from the same pre-update joint table, so
    the block is updated simultaneously, not sequentially.
    """
    subs = [s for s in sub_clusters if s != c]
    if not subs:
        return 0.0
    bc = beliefs[c]
    before = float(bc.max())
    joint = bc.copy()
    for s in subs:
        bs = beliefs[s]
        if bs.ndim != len(s):
            raise ValueError(f"table for {s} has {bs.ndim} axes, expected {len(s)}")
        joint += bs[_embed_index(s, c)]
        before += float(bs.max())
    inv = 1.0 / len(subs)
    after = 0.0
    new_subs = []
    for s in subs:
        ns = joint.max(axis=_max_axes(s, c)) * inv
        new_subs.append(ns)
        after += float(ns.max())
    for s, ns in zip(subs, new_subs):
        joint -= ns[_embed_index(s, c)]
        beliefs[s] = ns
    beliefs[c] = joint
    after += float(joint.max())
    return before - after


def decode(beliefs: BeliefState, graph: FactorGraph) -> tuple[int, ...]:
    """Integer assignment from belief maximisers.

    Variables with a singleton table use its argmax; anything else takes its
    state from the argmax of the smallest table containing it.  Ties resolve
    to the lowest flat index, hence the lexicographically smallest
    configuration.
    """
    support = sorted(beliefs.tables, key=lambda t: (len(t), t))
    owner: dict[int, Cluster] = {}
    for t in support:
        for v in t:
            owner.setdefault(v, t)
    states = []
    for i in range(graph.num_vars):
        t = owner.get(i)
        if t is None:
            raise CoverageError(f"variable {i} appears in no support cluster")
        table = beliefs[t]
        conf = np.unravel_index(int(np.argmax(table)), table.shape)
        states.append(int(conf[t.index(i)]))
    return tuple(states)


# ---------------------------------------------------------------------------
# Full runs
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    trace: DualTrace
    beliefs: BeliefState
    assignment: tuple[int, ...]
    messages: MessageState | None = None
    converged: bool = False
    truncated: bool = False
    min_update_decrease: float = 0.0

    @property
    def dual(self) -> float:
        return self.trace.records[-1].dual if self.trace.records else float("nan")

    @property
    def primal(self) -> float:
        return self.trace.records[-1].primal if self.trace.records else float("nan")

    @property
    def gap(self) -> float:
        return abs(self.dual - self.primal)


class _BeliefPlan:
    """Precomputed indexing for one cluster's block update."""

    __slots__ = ("cluster", "subs", "embeds", "axes", "inv")

    def __init__(self, cluster: Cluster, subs: list[Cluster]):
        self.cluster = cluster
        self.subs = subs
        self.embeds = [_embed_index(s, cluster) for s in subs]
        self.axes = [_max_axes(s, cluster) for s in subs]
        self.inv = 1.0 / len(subs)


def _build_plans(spec: RelaxationSpec) -> list[_BeliefPlan]:
    plans = []
    for c in spec.extended_clusters:
        subs = list(spec.proper_subs_of(c))
        if subs:
            plans.append(_BeliefPlan(c, subs))
    return plans


def _apply_plan(beliefs: BeliefState, plan: _BeliefPlan) -> float:
    tables = beliefs.tables
    joint = tables[plan.cluster].copy()
    before = float(tables[plan.cluster].max())
    for s, idx in zip(plan.subs, plan.embeds):
        bs = tables[s]
        joint += bs[idx]
        before += float(bs.max())
    after = 0.0
    new_subs = []
    for axes in plan.axes:
        ns = joint.max(axis=axes) * plan.inv
        new_subs.append(ns)
        after += float(ns.max())
    for ns, idx in zip(new_subs, plan.embeds):
        joint -= ns[idx]
    for s, ns in zip(plan.subs, new_subs):
        tables[s] = ns
    tables[plan.cluster] = joint
    after += float(joint.max())
    return before - after


def run(
    graph: FactorGraph,
    spec: RelaxationSpec,
    params: SolverParams | None = None,
    mode: str = "beliefs",
    *,
    label: str = "",
    beliefs: BeliefState | None = None,
    messages: MessageState | None = None,
    max_sweeps: int | None = None,
    pursuit_round: int = 0,
    start_time: float | None = None,
    sweep_offset: int = 0,
) -> RunResult:
    """Sweep the extended clusters until the dual stalls or a cap is hit.

    The keyword arguments allow warm starts (cluster pursuit re-enters with
    the previous state) and keep trace bookkeeping cumulative across rounds.
    Returns the trace, final state and decoded assignment.
    """
    if params is None:
        params = SolverParams()
    if mode not in ("beliefs", "messages"):
        raise ValueError(f"unknown mode {mode!r}")
    cap = params.max_sweeps if max_sweeps is None else max_sweeps
    t0 = time.perf_counter() if start_time is None else start_time
    trace = DualTrace()

    if mode == "messages":
        return _run_messages(
            graph, spec, params, cap, label, messages, trace, t0,
            pursuit_round, sweep_offset,
        )

    min_drop = float("inf")
    truncated = False
    converged = False
    state = beliefs if beliefs is not None else init_beliefs(graph, spec)
    plans = _build_plans(spec)
    g_prev = dual_objective(state)
    for sweep in range(1, cap + 1):
        for plan in plans:
            drop = _apply_plan(state, plan)
            if drop < min_drop:
                min_drop = drop
        g = dual_objective(state)
        x = decode(state, graph)
        trace.append(TraceRecord(
            sweep=sweep_offset + sweep,
            seconds=time.perf_counter() - t0,
            dual=g,
            primal=energy(graph, x),
            pursuit_round=pursuit_round,
            algorithm=label,
        ))
        if abs(g - g_prev) < params.inner_tol:
            converged = True
            break
        g_prev = g
        if time.perf_counter() - t0 > params.time_limit:
            truncated = True
            break
    assignment = decode(state, graph)
    return RunResult(
        trace=trace,
        beliefs=state,
        assignment=assignment,
        converged=converged,
        truncated=truncated,
        min_update_decrease=0.0 if min_drop == float("inf") else min_drop,
    )


# ---------------------------------------------------------------------------
# Message mode
# ---------------------------------------------------------------------------


def _theta_table(graph: FactorGraph, t: Cluster) -> np.ndarray | None:
    for p in graph.potentials:
        if p.scope == t:
            return p.values
    return None


class _MessageContext:
    """Static structure shared by all message-mode updates: who sends to
    whom, and the potential table of each support cluster (zero if absent)."""

    def __init__(self, graph: FactorGraph, spec: RelaxationSpec):
        self.spec = spec
        self.cards = graph.cardinalities
        self.support = spec.support
        self.theta: dict[Cluster, np.ndarray] = {}
        for t in self.support:
            th = _theta_table(graph, t)
            self.theta[t] = th if th is not None else np.zeros(table_shape(t, self.cards))
        self.senders: dict[Cluster, list[Cluster]] = {t: [] for t in self.support}
        for c in spec.extended_clusters:
            for s in spec.proper_subs_of(c):
                self.senders[s].append(c)
        self.outgoing: dict[Cluster, list[Cluster]] = {
            c: list(spec.proper_subs_of(c)) for c in spec.extended_clusters
        }

    def incoming_sum(self, msgs: MessageState, t: Cluster) -> np.ndarray:
        total = np.zeros(table_shape(t, self.cards))
        for c in self.senders[t]:
            total += msgs[(c, t)]
        return total

    def outgoing_sum(self, msgs: MessageState, t: Cluster) -> np.ndarray:
        """Outgoing messages of ``t`` embedded and summed over ``t``'s scope."""
        total = np.zeros(table_shape(t, self.cards))
        for s in self.outgoing.get(t, ()):
            total += msgs[(t, s)][_embed_index(s, t)]
        return total

    def belief(self, msgs: MessageState, t: Cluster) -> np.ndarray:
        return self.theta[t] + self.incoming_sum(msgs, t) - self.outgoing_sum(msgs, t)

    def beliefs(self, msgs: MessageState) -> BeliefState:
        return BeliefState({t: self.belief(msgs, t) for t in self.support})


def update_cluster_messages(
    messages: MessageState, graph: FactorGraph, spec: RelaxationSpec, c: Cluster
) -> None:
    """One block update of all messages out of ``c`` (closed form)."""
    ctx = _MessageContext(graph, spec)
    _update_messages(messages, ctx, c)


def _update_messages(msgs: MessageState, ctx: _MessageContext, c: Cluster) -> None:
    subs = ctx.outgoing.get(c, ())
    if not subs:
        return
    bracket = ctx.theta[c] + ctx.incoming_sum(msgs, c)
    pieces = {}
    for s in subs:
        piece = (
            ctx.theta[s]
            - ctx.outgoing_sum(msgs, s)
            + ctx.incoming_sum(msgs, s)
            - msgs[(c, s)]
        )
        pieces[s] = piece
        bracket = bracket + piece[_embed_index(s, c)]
    inv = 1.0 / len(subs)
    for s in subs:
        new = bracket.max(axis=_max_axes(s, c)) * inv - pieces[s]
        msgs[(c, s)] = new


def _run_messages(
    graph: FactorGraph,
    spec: RelaxationSpec,
    params: SolverParams,
    cap: int,
    label: str,
    messages: MessageState | None,
    trace: DualTrace,
    t0: float,
    pursuit_round: int,
    sweep_offset: int,
) -> RunResult:
    ctx = _MessageContext(graph, spec)
    msgs = messages if messages is not None else init_messages(spec, graph.cardinalities)
    for c in graph.clusters:
        if c not in ctx.theta:
            raise CoverageError(
                f"original cluster {c} has no table under this relaxation"
            )
    g_prev = dual_objective(ctx.beliefs(msgs))
    converged = False
    truncated = False
    state = ctx.beliefs(msgs)
    for sweep in range(1, cap + 1):
        for c in spec.extended_clusters:
            _update_messages(msgs, ctx, c)
        state = ctx.beliefs(msgs)
        g = dual_objective(state)
        x = decode(state, graph)
        trace.append(TraceRecord(
            sweep=sweep_offset + sweep,
            seconds=time.perf_counter() - t0,
            dual=g,
            primal=energy(graph, x),
            pursuit_round=pursuit_round,
            algorithm=label,
        ))
        if abs(g - g_prev) < params.inner_tol:
            converged = True
            break
        g_prev = g
        if time.perf_counter() - t0 > params.time_limit:
            truncated = True
            break
    assignment = decode(state, graph)
    return RunResult(
        trace=trace,
        beliefs=state,
        assignment=assignment,
        messages=msgs,
        converged=converged,
        truncated=truncated,
    )


# ---------------------------------------------------------------------------
# Storage accounting and per-sweep work
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MemoryReport:
    """Table-entry counts: beliefs versus potentials-plus-messages."""

    beliefs: int
    potentials: int
    messages: int

    @property
    def message_side(self) -> int:
        return self.potentials + self.messages


def memory_report(
    graph: FactorGraph,
    spec: RelaxationSpec,
    support: Sequence[Cluster] | None = None,
) -> MemoryReport:
    """Count stored scalars for both update styles.

    ``beliefs`` is one table per support cluster; ``potentials`` one table
    per original cluster; ``messages`` one sub-scope table per (extended
    cluster, proper sub-cluster) pair.  ``support`` may be overridden to
    account for belief sets chosen independently of the sub-cluster map.
    """
    cards = graph.cardinalities
    sup = spec.support if support is None else tuple(support)
    beliefs = sum(table_cells(t, cards) for t in sup)
    potentials = sum(table_cells(c, cards) for c in graph.clusters)
    messages = sum(
        table_cells(s, cards)
        for c in spec.extended_clusters
        for s in spec.proper_subs_of(c)
    )
    return MemoryReport(beliefs, potentials, messages)


def sweep_scalar_updates(spec: RelaxationSpec, cardinalities: Sequence[int]) -> int:
    """Belief-table scalars written by one full sweep in belief mode: every
    updating cluster rewrites its own table and each proper sub-table."""
    total = 0
    for c in spec.extended_clusters:
        subs = spec.proper_subs_of(c)
        if not subs:
            continue
        total += table_cells(c, cardinalities)
        total += sum(table_cells(s, cardinalities) for s in subs)
    return total
