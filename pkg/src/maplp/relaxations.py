"""Builders for local-marginalisation relaxations of a factor graph.

A relaxation is described by an extended cluster set ``C'`` and, for each
extended cluster ``c``, an ordered set of sub-clusters ``S(c)`` with
``s <= c``.  Each pair ``(c, s)`` stands for the marginalisation constraint
"the table over ``c``, summed down to ``s``, equals the table over ``s``".
The support is every cluster that owns a table: ``C'`` together with all
sub-clusters.  Every builder keeps the original clusters covered, i.e.
``C`` is contained in the support, so the relaxation bounds the original
objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping

from .factor_graph import Cluster, FactorGraph


class RelaxationError(ValueError):
    """A relaxation specification violates its invariants."""


def _canonical(clusters: Iterable[Cluster]) -> tuple[Cluster, ...]:
    return tuple(sorted(set(clusters), key=lambda c: (len(c), c)))


@dataclass(frozen=True)
class RelaxationSpec:
    """Extended clusters with their sub-cluster sets.

    ``extended_clusters`` fixes the sweep order of the solver; sub-cluster
    tuples are stored in canonical (size, lexicographic) order.  ``support``
    is derived, never stored.
    """

    extended_clusters: tuple[Cluster, ...]
    sub_clusters: Mapping[Cluster, tuple[Cluster, ...]] = field(default_factory=dict)

    def __post_init__(self):
        subs = {}
        seen = set()
        for c in self.extended_clusters:
            if c in seen:
                raise RelaxationError(f"duplicate extended cluster {c}")
            seen.add(c)
            cs = set(c)
            ss = _canonical(self.sub_clusters.get(c, ()))
            for s in ss:
                if not set(s) <= cs:
                    raise RelaxationError(f"sub-cluster {s} is not contained in {c}")
            subs[c] = ss
        object.__setattr__(self, "sub_clusters", subs)

    def subs_of(self, c: Cluster) -> tuple[Cluster, ...]:
        return self.sub_clusters.get(c, ())

    def proper_subs_of(self, c: Cluster) -> tuple[Cluster, ...]:
        """Sub-clusters of ``c`` excluding the vacuous self entry."""
        return tuple(s for s in self.subs_of(c) if s != c)

    @property
    def support(self) -> tuple[Cluster, ...]:
        seen = set(self.extended_clusters)
        for ss in self.sub_clusters.values():
            seen.update(ss)
        return _canonical(seen)

    def with_clusters(self, additions: Mapping[Cluster, Iterable[Cluster]]) -> "RelaxationSpec":
        """New spec with extra extended clusters (existing ones gain subs)."""
        ext = list(self.extended_clusters)
        subs = {c: set(ss) for c, ss in self.sub_clusters.items()}
        for c, ss in additions.items():
            if c not in subs:
                ext.append(c)
                subs[c] = set()
            subs[c].update(ss)
        return RelaxationSpec(tuple(ext), {c: tuple(ss) for c, ss in subs.items()})


def covers(spec: RelaxationSpec, graph: FactorGraph) -> bool:
    """True when every original cluster owns a table under this relaxation."""
    return set(graph.clusters) <= set(spec.support)


# ---------------------------------------------------------------------------
# The six builders
# ---------------------------------------------------------------------------


def _pairwise_intersections(clusters: Iterable[Cluster]) -> set[Cluster]:
    cs = list(clusters)
    out: set[Cluster] = set()
    for a, b in combinations(cs, 2):
        shared = tuple(sorted(set(a) & set(b)))
        if shared:
            out.add(shared)
    out.update(cs)  # c = c & c
    return out


def gmplp_spec(graph: FactorGraph) -> RelaxationSpec:
    """Intersection-set relaxation: each cluster sends to every contained
    pairwise intersection, itself included (the self entry is carried but is
    vacuous for the solver)."""
    cset = graph.clusters
    inter = _pairwise_intersections(cset)
    subs = {}
    for c in cset:
        cs = set(c)
        subs[c] = tuple(s for s in _canonical(inter) if set(s) <= cs)
    return RelaxationSpec(cset, subs)


def dd_spec(graph: FactorGraph) -> RelaxationSpec:
    """Cluster-to-singleton relaxation; singletons receive only."""
    singles = tuple((i,) for i in range(graph.num_vars))
    multis = tuple(c for c in graph.clusters if len(c) > 1)
    subs: dict[Cluster, tuple[Cluster, ...]] = {c: () for c in singles}
    for c in multis:
        subs[c] = tuple((i,) for i in c)
    return RelaxationSpec(singles + multis, subs)


def cycle_spec(graph: FactorGraph) -> RelaxationSpec:
    """Like :func:`dd_spec`, but clusters of size exactly 3 send to their
    three pairs instead of their singletons."""
    singles = tuple((i,) for i in range(graph.num_vars))
    multis = tuple(c for c in graph.clusters if len(c) > 1)
    subs: dict[Cluster, tuple[Cluster, ...]] = {c: () for c in singles}
    for c in multis:
        if len(c) == 3:
            subs[c] = tuple(combinations(c, 2))
        else:
            subs[c] = tuple((i,) for i in c)
    return RelaxationSpec(singles + multis, subs)


def _subsets_of(cluster: Cluster) -> list[Cluster]:
    out = []
    for r in range(1, len(cluster) + 1):
        out.extend(combinations(cluster, r))
    return out


def _subset_family(graph: FactorGraph, max_order: int, caller: str) -> set[Cluster]:
    family: set[Cluster] = set()
    for c in graph.clusters:
        if len(c) > max_order:
            raise RelaxationError(
                f"{caller}: cluster {c} has order {len(c)} > cap {max_order}"
            )
        family.update(_subsets_of(c))
    return family


def powerset_spec(graph: FactorGraph, max_order: int = 6) -> RelaxationSpec:
    """All nonempty subsets of the original clusters, each sending to its
    one-smaller subsets (covers)."""
    family = _subset_family(graph, max_order, "powerset_spec")
    ext = _canonical(family)
    subs = {
        c: tuple(s for s in combinations(c, len(c) - 1) if s in family)
        for c in ext
    }
    return RelaxationSpec(ext, subs)


def all_subsets_spec(graph: FactorGraph, max_order: int = 6) -> RelaxationSpec:
    """The unreduced baseline: all nonempty subsets of the original clusters,
    each sending to every strict subset.  Reference relaxation for the
    reduction oracles; quadratically larger than :func:`powerset_spec`."""
    family = _subset_family(graph, max_order, "all_subsets_spec")
    ext = _canonical(family)
    subs = {
        c: tuple(s for s in _subsets_of(c) if len(s) < len(c))
        for c in ext
    }
    return RelaxationSpec(ext, subs)


def intersection_closure(clusters: Iterable[Cluster]) -> set[Cluster]:
    """Smallest family containing ``clusters`` closed under pairwise
    intersection (empty intersections dropped).  Worklist fixpoint; the
    lattice of subsets is finite so this terminates."""
    closed: set[Cluster] = set(clusters)
    work = list(closed)
    while work:
        a = work.pop()
        sa = set(a)
        for b in list(closed):
            shared = tuple(sorted(sa & set(b)))
            if shared and shared not in closed:
                closed.add(shared)
                work.append(shared)
    return closed


def pi_system_spec(graph: FactorGraph) -> RelaxationSpec:
    """Intersection-closed family; each member sends to its maximal strict
    subsets within the family (no member strictly between)."""
    closed = intersection_closure(graph.clusters)
    ext = _canonical(closed)
    subs = {}
    for c in ext:
        cs = set(c)
        inside = [s for s in ext if s != c and set(s) < cs]
        maximal = [
            s
            for s in inside
            if not any(t != s and set(s) < set(t) for t in inside)
        ]
        subs[c] = tuple(maximal)
    return RelaxationSpec(ext, subs)


def max_intersection_spec(graph: FactorGraph) -> RelaxationSpec:
    """Only maximal clusters send; receivers are the original clusters plus
    pairwise intersections of maximal clusters (strict subsets only)."""
    cset = graph.clusters
    maximal = tuple(
        c for c in cset if not any(c != d and set(c) < set(d) for d in cset)
    )
    receivers = set(cset) | _pairwise_intersections(maximal)
    subs = {}
    for c in maximal:
        cs = set(c)
        subs[c] = tuple(s for s in _canonical(receivers) if set(s) < cs)
    return RelaxationSpec(maximal, subs)
