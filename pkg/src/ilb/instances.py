"""Turn a relational fact base into labeled, feature-annotated instances.

For each core form every grounding in the fact base becomes an instance whose
label comes from the closed-world reading of the example sets. Instances are
described by two feature families grown from the grounded path:

* branch features: edge sets that touch the path in exactly one vertex,
  with path constants replaced by the core form's variables;
* path features: edge sets that touch the path in exactly two vertices,
  with all other constants turned into fresh variables.

Both are counted: the value of a feature is the number of distinct edge sets
that produce it.
"""

from __future__ import annotations

import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .config import Config
from .hypergraph import CoreForm, GroundPath, Hypergraph, build_hypergraph, extract_core_forms, find_paths
from .logic import (
    Atom,
    Conjunction,
    FactBase,
    PredicateSymbol,
    Substitution,
    Var,
    apply_atom,
    canonicalize,
    match,
    parse_literals,
    render_body,
)

log = logging.getLogger(__name__)

BRANCH = "b"
PATH = "p"


@dataclass(frozen=True)
class ExampleSet:
    target: PredicateSymbol
    positives: Tuple[Atom, ...]
    negatives: Tuple[Atom, ...] = ()
    _pos: FrozenSet[Atom] = field(default=frozenset(), repr=False, compare=False)
    _neg: FrozenSet[Atom] = field(default=frozenset(), repr=False, compare=False)

    def __post_init__(self):
        pos = tuple(dict.fromkeys(self.positives))
        neg = tuple(dict.fromkeys(self.negatives))
        object.__setattr__(self, "positives", pos)
        object.__setattr__(self, "negatives", neg)
        object.__setattr__(self, "_pos", frozenset(pos))
        object.__setattr__(self, "_neg", frozenset(neg))
        for a in pos + neg:
            if a.signature != self.target:
                raise ValueError(f"example {a} is not an atom of {self.target}")
            if not a.is_ground():
                raise ValueError(f"example {a} is not ground")
        both = self._pos & self._neg
        if both:
            raise ValueError(f"examples both positive and negative: {sorted(map(str, both))[:3]}")

    @classmethod
    def from_atoms(cls, positives: Iterable[Atom], negatives: Iterable[Atom] = (),
                   target: Optional[PredicateSymbol] = None) -> "ExampleSet":
        positives, negatives = list(positives), list(negatives)
        if target is None:
            sigs = {a.signature for a in positives + negatives}
            if len(sigs) != 1:
                raise ValueError(f"cannot infer a single target predicate from {sorted(map(str, sigs))}")
            target = sigs.pop()
        return cls(target, tuple(positives), tuple(negatives))

    def is_positive(self, a: Atom) -> bool:
        return a in self._pos

    def is_negative(self, a: Atom) -> bool:
        return a in self._neg


@dataclass(frozen=True)
class Feature:
    """A branch or path feature relative to one core form.

    ``distinct`` groups may name core-form variables absent from ``body``.
    """

    kind: str
    body: Conjunction
    distinct: Tuple[Tuple[Var, ...], ...]
    key: str

    @property
    def anchor(self) -> Tuple[Var, ...]:
        """Core-form variables the feature touches."""
        return tuple(v for v in self.body.variables() if not v.name.startswith("F"))

    @property
    def fresh(self) -> Tuple[Var, ...]:
        return tuple(v for v in self.body.variables() if v.name.startswith("F"))

    def __str__(self) -> str:
        return self.key


def feature_from_key(key: str) -> Feature:
    kind, _, text = key.partition(":")
    if kind not in (BRANCH, PATH):
        raise ValueError(f"bad feature key {key!r}")
    atoms, groups = parse_literals(text)
    return Feature(kind, Conjunction(atoms), groups, key)


@dataclass
class Instance:
    core_form: CoreForm
    grounding: Tuple[Tuple[Var, str], ...]
    head: Atom
    label: int
    features: Dict[str, int]

    @property
    def theta(self) -> Substitution:
        return dict(self.grounding)

    @property
    def path(self) -> GroundPath:
        theta = self.theta
        return GroundPath(tuple(apply_atom(theta, a) for a in self.core_form.body.atoms), self.head.args)


def deduce(cf: CoreForm, theta: Substitution) -> Atom:
    head = apply_atom(theta, cf.head)
    unbound = head.variables()
    if unbound:
        raise ValueError(f"head variables {[v.name for v in unbound]} unbound in {cf}")
    return head


def label(head: Atom, ex: ExampleSet) -> int:
    """+1 for listed positives, -1 otherwise (closed world)."""
    return 1 if ex.is_positive(head) else -1


# ---------------------------------------------------------------------------
# Feature enumeration
# ---------------------------------------------------------------------------


class FeatureExtractor:
    """Enumerates and variabilizes the features of groundings in one hypergraph.

    Variabilized forms are cached by their pre-normalized shape, so repeated
    shapes are canonicalized once.
    """

    def __init__(self, g: Hypergraph, max_len: int):
        self.g = g
        self.max_len = max_len
        self.registry: Dict[str, Feature] = {}
        self._cache: Dict[tuple, str] = {}

    def _grow(self, seeds: Iterable[int], pverts: Set[str], pedges: Set[int],
              max_overlap: int, accept) -> List[FrozenSet[int]]:
        g, out, seen = self.g, [], set()

        def rec(ids: FrozenSet[int], outer: FrozenSet[str], overlap: FrozenSet[str]):
            if accept(overlap):
                out.append(ids)
            if len(ids) == self.max_len:
                return
            cands = sorted({j for x in outer for j in g.incident(x)} - ids - pedges)
            for j in cands:
                ev = g.vertices_of(j)
                ov = overlap | (ev & pverts)
                if len(ov) > max_overlap:
                    continue
                nxt = ids | {j}
                if nxt in seen:
                    continue
                seen.add(nxt)
                rec(nxt, outer | (ev - pverts), ov)

        for j in seeds:
            if j in pedges:
                continue
            ev = g.vertices_of(j)
            ov = frozenset(ev & pverts)
            start = frozenset((j,))
            if len(ov) > max_overlap or start in seen:
                continue
            seen.add(start)
            rec(start, frozenset(ev - pverts), ov)
        return out

    def branch_groundings(self, path_edges: Sequence[Atom], v: str) -> List[FrozenSet[int]]:
        """Edge sets grown from ``v`` through off-path vertices, touching the path only at ``v``."""
        pedges = {self.g.edge_id[e] for e in path_edges if e in self.g.edge_id}
        pverts = {c for e in path_edges for c in e.args}
        want = frozenset((v,))
        return self._grow(self.g.incident(v), pverts, pedges, 1, lambda ov: ov == want)

    def path_groundings(self, path_edges: Sequence[Atom]) -> List[FrozenSet[int]]:
        """Edge sets connected through off-path vertices that touch the path in exactly two vertices."""
        pedges = {self.g.edge_id[e] for e in path_edges if e in self.g.edge_id}
        pverts = {c for e in path_edges for c in e.args}
        seeds = sorted({j for v in pverts for j in self.g.incident(v)})
        return self._grow(seeds, pverts, pedges, 2, lambda ov: len(ov) == 2)

    def _variabilize(self, kind: str, ids: FrozenSet[int], inverse: Dict[str, Var],
                     cf: CoreForm) -> str:
        fresh: Dict[str, Var] = {}
        atoms = []
        for j in sorted(ids):
            e = self.g.edges[j]
            args = []
            for c in e.args:
                v = inverse.get(c)
                if v is None and kind == PATH:
                    v = fresh.get(c)
                    if v is None:
                        v = fresh[c] = Var(f"_f{len(fresh)}")
                args.append(c if v is None else v)
            atoms.append(Atom(e.pred, tuple(args)))
        shape = (cf.key, kind, tuple(atoms))
        key = self._cache.get(shape)
        if key is None:
            key = self._cache[shape] = self._canonical(kind, atoms, inverse, _slots(cf))
        return key

    def _canonical(self, kind, atoms, inverse, slots) -> str:
        core = set(inverse.values())
        _, _, body = canonicalize(Conjunction(tuple(atoms)), fixed=core, prefix="F")
        groups = []
        if kind == PATH:
            fslots: Dict[Var, Set[Tuple[str, int]]] = {}
            for a in body.atoms:
                for pos, t in enumerate(a.args):
                    if isinstance(t, Var) and t not in core:
                        fslots.setdefault(t, set()).add((a.pred, pos))
            for f in body.variables():
                if f in core:
                    continue
                alias = sorted((v for v, s in slots.items() if s & fslots[f]), key=_vkey)
                if alias:
                    groups.append(tuple(alias) + (f,))
        key = f"{kind}:{render_body(Conjunction(body.atoms))}"
        key += "".join(f",unique([{','.join(v.name for v in g)}])" for g in groups)
        if key not in self.registry:
            self.registry[key] = Feature(kind, body, tuple(groups), key)
        return key

    def features(self, cf: CoreForm, theta: Substitution) -> Dict[str, int]:
        """Feature counts of one grounding, keyed by feature key (sorted)."""
        return dict(sorted(self._features(cf, theta, (BRANCH, PATH)).items()))

    def _features(self, cf: CoreForm, theta: Substitution, kinds) -> Counter:
        path_edges = [apply_atom(theta, a) for a in cf.body.atoms]
        inverse = {theta[v]: v for v in cf.body.variables()}
        counts: Counter = Counter()
        if BRANCH in kinds:
            for v in sorted(cf.body.variables(), key=_vkey):
                for ids in self.branch_groundings(path_edges, theta[v]):
                    counts[self._variabilize(BRANCH, ids, inverse, cf)] += 1
        if PATH in kinds:
            for ids in self.path_groundings(path_edges):
                counts[self._variabilize(PATH, ids, inverse, cf)] += 1
        return counts


def _vkey(v: Var):
    name = v.name.lstrip("VF")
    return (v.name[:1], int(name)) if name.isdigit() else (v.name, -1)


_SLOT_CACHE: Dict[str, Dict[Var, Set[Tuple[str, int]]]] = {}


def _slots(cf: CoreForm) -> Dict[Var, Set[Tuple[str, int]]]:
    s = _SLOT_CACHE.get(cf.key)
    if s is None:
        s = {}
        for a in cf.body.atoms:
            for pos, t in enumerate(a.args):
                if isinstance(t, Var):
                    s.setdefault(t, set()).add((a.pred, pos))
        _SLOT_CACHE[cf.key] = s
    return s


def branch_features(p: GroundPath, cf: CoreForm, theta: Substitution, g: Hypergraph,
                    max_len: int) -> Dict[Feature, int]:
    fx = FeatureExtractor(g, max_len)
    counts = fx._features(cf, theta, (BRANCH,))
    return {fx.registry[k]: n for k, n in sorted(counts.items())}


def path_features(p: GroundPath, cf: CoreForm, theta: Substitution, g: Hypergraph,
                  max_len: int) -> Dict[Feature, int]:
    fx = FeatureExtractor(g, max_len)
    counts = fx._features(cf, theta, (PATH,))
    return {fx.registry[k]: n for k, n in sorted(counts.items())}


# ---------------------------------------------------------------------------
# Instance generation
# ---------------------------------------------------------------------------


@dataclass
class TrainingTable:
    core_forms: List[CoreForm]
    instances: Dict[str, List[Instance]]
    features: Dict[str, Feature]
    universe: Dict[str, List[str]]
    target: PredicateSymbol

    def __iter__(self):
        for cf in self.core_forms:
            yield from self.instances[cf.key]

    def __len__(self) -> int:
        return sum(len(v) for v in self.instances.values())


def find_core_forms(g: Hypergraph, ex: ExampleSet, max_len: int) -> List[CoreForm]:
    found: Dict[str, CoreForm] = {}
    for e in ex.positives:
        for cf in extract_core_forms(find_paths(g, e, max_len), e):
            found.setdefault(cf.key, cf)
    return [found[k] for k in sorted(found)]


def ground_core_form(cf: CoreForm, db: FactBase, theta0: Optional[Substitution] = None) -> List[Substitution]:
    return list(match(cf.body, db, theta0))


def make_instance(cf: CoreForm, theta: Substitution, ex: Optional[ExampleSet],
                  fx: FeatureExtractor) -> Instance:
    head = deduce(cf, theta)
    y = label(head, ex) if ex is not None else -1
    grounding = tuple((v, theta[v]) for v in cf.variables)
    return Instance(cf, grounding, head, y, fx.features(cf, theta))


def sample_indices(labels: Sequence[int], budget: int, rng: random.Random) -> List[int]:
    """Keep every positive plus a uniform sample of at most ``budget`` negatives."""
    pos = [i for i, y in enumerate(labels) if y > 0]
    neg = [i for i, y in enumerate(labels) if y <= 0]
    keep = pos + rng.sample(neg, min(len(neg), budget))
    return sorted(keep)


def truncate_features(instances: Sequence[Instance], max_features: int) -> List[str]:
    """Most frequent feature keys (by number of instances), ties by key."""
    df: Counter = Counter()
    for x in instances:
        df.update(x.features.keys())
    ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))
    return sorted(k for k, _ in ranked[:max_features])


def generate_instances(db: FactBase, ex: ExampleSet, cfg: Config = Config(),
                       seed: Optional[int] = None) -> TrainingTable:
    seed = cfg.seed if seed is None else seed
    g = build_hypergraph(db, exclude=ex.target)
    core_forms = find_core_forms(g, ex, cfg.max_core_form_len)
    fx = FeatureExtractor(g, cfg.max_feature_len)
    instances: Dict[str, List[Instance]] = {}
    universe: Dict[str, List[str]] = {}
    for cf in core_forms:
        thetas = ground_core_form(cf, db)
        heads = [deduce(cf, th) for th in thetas]
        labels = [label(h, ex) for h in heads]
        rng = random.Random(f"{seed}|{cf.key}")
        keep = sample_indices(labels, cfg.instances_per_core_form, rng)
        rows = [make_instance(cf, thetas[i], ex, fx) for i in keep]
        if not any(x.label > 0 for x in rows):
            log.warning("core form %s yields no positive instance", cf.key)
        instances[cf.key] = rows
        universe[cf.key] = truncate_features(rows, cfg.max_features)
    used = {k for ks in universe.values() for k in ks}
    features = {k: fx.registry[k] for k in sorted(used)}
    return TrainingTable(core_forms, instances, features, universe, ex.target)


def render_grounding(grounding: Sequence[Tuple[Var, str]]) -> str:
    return ",".join(f"{v.name}={c}" for v, c in grounding)


def dump_table(table: TrainingTable) -> str:
    """Tab-separated debug dump, one instance per line."""
    lines = []
    for x in table:
        feats = "\t".join(f"{k}={n}" for k, n in x.features.items())
        row = f"{x.core_form.key}\t{render_grounding(x.grounding)}\t{x.label:+d}"
        lines.append(f"{row}\t{feats}" if feats else row)
    return "".join(line + "\n" for line in lines)
