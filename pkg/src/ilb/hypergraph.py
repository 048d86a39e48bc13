"""Fact bases as hypergraphs, relational path finding and core-form extraction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .logic import Atom, Conjunction, FactBase, PredicateSymbol, Var, canonicalize, render_body, variabilize


@dataclass(frozen=True)
class Hypergraph:
    """Constants are vertices, non-target facts are hyperedges.

    Edges keep fact-base construction order; ``incidence`` maps a constant to
    the ids of the edges whose arguments contain it.
    """

    edges: Tuple[Atom, ...]
    incidence: Dict[str, Tuple[int, ...]]
    edge_id: Dict[Atom, int]

    @property
    def vertices(self) -> Set[str]:
        return set(self.incidence)

    def vertices_of(self, eid: int) -> FrozenSet[str]:
        return frozenset(self.edges[eid].args)

    def incident(self, v: str) -> Tuple[int, ...]:
        return self.incidence.get(v, ())


def build_hypergraph(db: FactBase, exclude: Optional[PredicateSymbol] = None) -> Hypergraph:
    edges = tuple(f for f in db if exclude is None or f.signature != exclude)
    incidence: Dict[str, List[int]] = {}
    for eid, e in enumerate(edges):
        for c in dict.fromkeys(e.args):
            incidence.setdefault(c, []).append(eid)
    return Hypergraph(
        edges=edges,
        incidence={c: tuple(ids) for c, ids in incidence.items()},
        edge_id={e: i for i, e in enumerate(edges)},
    )


@dataclass(frozen=True)
class GroundPath:
    """Connected, duplicate-free set of ground edges linking ``terminals``."""

    edges: Tuple[Atom, ...]
    terminals: Tuple[str, ...] = ()

    @property
    def vertices(self) -> Set[str]:
        return {c for e in self.edges for c in e.args}

    def is_connected(self) -> bool:
        return is_connected(self.edges)

    def __str__(self) -> str:
        return "{" + ", ".join(str(e) for e in self.edges) + "}"


def is_connected(edges: Sequence[Atom]) -> bool:
    """Whether the edges form one component when linked by shared constants."""
    if not edges:
        return True
    reached = {0}
    verts = set(edges[0].args)
    grew = True
    while grew:
        grew = False
        for i, e in enumerate(edges):
            if i not in reached and verts.intersection(e.args):
                reached.add(i)
                verts.update(e.args)
                grew = True
    return len(reached) == len(edges)


def find_paths(g: Hypergraph, e: Atom, max_len: int) -> List[GroundPath]:
    """All connected edge sets of size <= ``max_len`` covering every argument of ``e``.

    Depth-first growth from the first argument of ``e``; each edge set is
    reported once, its edges in construction order.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    terminals = tuple(dict.fromkeys(e.args))
    if not terminals or any(t not in g.incidence for t in terminals):
        return []
    need = set(terminals)
    seen: Set[FrozenSet[int]] = set()
    out: List[GroundPath] = []

    def grow(ids: FrozenSet[int], verts: FrozenSet[str]) -> None:
        if need <= verts:
            out.append(GroundPath(tuple(g.edges[i] for i in sorted(ids)), terminals))
        if len(ids) == max_len:
            return
        frontier = sorted({j for v in verts for j in g.incident(v)} - ids)
        for j in frontier:
            nxt = ids | {j}
            if nxt in seen:
                continue
            seen.add(nxt)
            grow(nxt, verts | g.vertices_of(j))

    for j in g.incident(terminals[0]):
        start = frozenset((j,))
        if start not in seen:
            seen.add(start)
            grow(start, g.vertices_of(j))
    return out


@dataclass(frozen=True)
class CoreForm:
    """Range-restricted rule template ``head :- body`` grown from one path.

    Variables are canonically named V0, V1, ... with the head's first. The
    body carries one distinctness group over all its variables: distinct
    constants on the source path became distinct variables.
    """

    head: Atom
    body: Conjunction
    key: str

    @property
    def variables(self) -> List[Var]:
        return Conjunction((self.head,) + self.body.atoms).variables()

    def range_restricted(self) -> bool:
        body_vars = set(self.body.variables())
        return all(v in body_vars for v in self.head.variables())

    def __str__(self) -> str:
        return self.key


def make_core_form(head: Atom, body_atoms: Sequence[Atom], object_identity: bool = True) -> CoreForm:
    """Canonical core form for a variabilized head and body."""
    body = Conjunction(tuple(body_atoms))
    vs = body.variables()
    if object_identity and len(vs) > 1:
        body = Conjunction(body.atoms, (tuple(vs),))
    _, h, b = canonicalize(body, head=head, prefix="V")
    return CoreForm(h, b, f"{h} :- {render_body(b)}")


def extract_core_forms(paths: Iterable[GroundPath], e: Atom) -> List[CoreForm]:
    """Variabilize ``path + example`` jointly and deduplicate up to renaming."""
    found: Dict[str, CoreForm] = {}
    for p in paths:
        conj, _ = variabilize((e,) + tuple(p.edges))
        cf = make_core_form(conj.atoms[0], conj.atoms[1:])
        if not cf.range_restricted():
            raise ValueError(f"path {p} does not cover the arguments of {e}")
        found.setdefault(cf.key, cf)
    return [found[k] for k in sorted(found)]
