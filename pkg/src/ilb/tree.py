"""Problog rule trees: induction, rule extraction, scoring and noisy-or."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import Config
from .hypergraph import CoreForm
from .instances import Feature, Instance, feature_from_key
from .logic import Atom, Clause, Conjunction, Var, apply_atom

_GAIN_EPS = 1e-12


def noisy_or(ps: Sequence[float]) -> float:
    """Probability that at least one of several independent rules fires."""
    for p in ps:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
    # sorted so the result does not depend on argument order
    return 1.0 - math.prod(sorted(1.0 - p for p in ps))


@dataclass
class Leaf:
    w_pos: float
    w_neg: float
    prob: float


@dataclass
class Split:
    feature: str
    k: int
    true: "Node"
    false: "Node"


Node = Union[Leaf, Split]


@dataclass
class RuleTree:
    """Decision tree below a core form.

    The core form's body is the implicit root test with only a true child;
    every split asks whether ``count(feature) >= k``.
    """

    core_form: CoreForm
    root: Node
    features: Dict[str, Feature] = field(default_factory=dict)

    def leaves(self) -> List[Leaf]:
        return [leaf for leaf, _ in self.leaf_conditions()]

    def leaf_conditions(self) -> List[Tuple[Leaf, List[Tuple[str, int, bool]]]]:
        """Every leaf with its full route: ``(feature, k, outcome)`` per split."""
        out = []

        def walk(node: Node, conds):
            if isinstance(node, Leaf):
                out.append((node, conds))
            else:
                walk(node.true, conds + [(node.feature, node.k, True)])
                walk(node.false, conds + [(node.feature, node.k, False)])

        walk(self.root, [])
        return out

    def depth(self) -> int:
        def d(node):
            return 0 if isinstance(node, Leaf) else 1 + max(d(node.true), d(node.false))
        return d(self.root)

    def route(self, counts: Dict[str, int]) -> Leaf:
        node = self.root
        while isinstance(node, Split):
            node = node.true if counts.get(node.feature, 0) >= node.k else node.false
        return node


@dataclass
class WeightedInstanceSet:
    instances: List[Instance]
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.weights) != len(self.instances):
            raise ValueError("one weight per instance required")
        if np.any(self.weights < 0) or not self.weights.sum() > 0:
            raise ValueError("weights must be nonnegative with a positive sum")


def entropy(w_pos: np.ndarray, w_neg: np.ndarray) -> np.ndarray:
    total = w_pos + w_neg
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, w_pos / total, 0.0)
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(p < 1, (1 - p) * np.log2(1 - p), 0.0))
    return np.where(total > 0, h, 0.0)


def split_gain(w_pos: float, w_neg: float, t_pos, t_neg):
    """Information gain of sending ``(t_pos, t_neg)`` to the true side."""
    total = w_pos + w_neg
    f_pos, f_neg = w_pos - t_pos, w_neg - t_neg
    t_w, f_w = t_pos + t_neg, f_pos + f_neg
    parent = entropy(np.asarray(w_pos), np.asarray(w_neg))
    return parent - (t_w / total) * entropy(t_pos, t_neg) - (f_w / total) * entropy(f_pos, f_neg)


def best_split(X: np.ndarray, y: np.ndarray, w: np.ndarray, columns: Sequence[int]):
    """Best ``(gain, column, k)`` over splits ``X[:, column] >= k``.

    Candidate thresholds are the nonzero counts observed in the column. Ties
    go to the smaller ``k``, then the earlier column. Returns ``None`` when no
    split has positive gain.
    """
    if X.shape[0] == 0 or not len(columns):
        return None
    cols = np.asarray(columns)
    Xc = X[:, cols]
    wp, wn = w * (y > 0), w * (y <= 0)
    W_pos, W_neg = wp.sum(), wn.sum()
    best = None
    kmax = int(Xc.max()) if Xc.size else 0
    for k in range(1, kmax + 1):
        present = (Xc == k).any(axis=0)
        if not present.any():
            continue
        mask = Xc >= k
        t_pos, t_neg = wp @ mask, wn @ mask
        gains = np.where(present, split_gain(W_pos, W_neg, t_pos, t_neg), -np.inf)
        top = gains.max()
        if not top > _GAIN_EPS:
            continue
        j = int(np.flatnonzero(gains >= top - _GAIN_EPS)[0])
        if best is None or top > best[0] + _GAIN_EPS:
            best = (float(top), int(cols[j]), k)
    return best


def leaf_probability(w_pos: float, w_neg: float) -> float:
    return (w_pos + 1.0) / (w_pos + w_neg + 2.0)


def learn_tree(cf: CoreForm, data: WeightedInstanceSet, cfg: Config = Config(),
               universe: Optional[Sequence[str]] = None,
               registry: Optional[Dict[str, Feature]] = None) -> RuleTree:
    """Greedy entropy-gain induction over count-threshold splits.

    Weights are rescaled to sum to the number of instances before the
    Laplace-smoothed leaf proportion is taken, so only their ratios matter.
    """
    if not data.instances:
        raise ValueError(f"no instances for core form {cf.key}")
    if universe is None:
        universe = sorted({k for x in data.instances for k in x.features})
    registry = registry or {}
    keys = list(universe)
    feats = [registry.get(k) or feature_from_key(k) for k in keys]
    allowed = [j for j, f in enumerate(feats) if len(f.body) <= cfg.node_literal_cap]
    col = {k: j for j, k in enumerate(keys)}
    n = len(data.instances)
    X = np.zeros((n, len(keys)), dtype=np.int32)
    for i, x in enumerate(data.instances):
        for k, c in x.features.items():
            j = col.get(k)
            if j is not None:
                X[i, j] = c
    y = np.array([x.label for x in data.instances])
    w = data.weights * (n / data.weights.sum())
    min_weight = cfg.min_leaf_weight_frac * w.sum()
    used: Dict[str, Feature] = {}

    def grow(rows: np.ndarray, depth: int) -> Node:
        wr, yr = w[rows], y[rows]
        w_pos, w_neg = float(wr[yr > 0].sum()), float(wr[yr <= 0].sum())
        leaf = Leaf(w_pos, w_neg, leaf_probability(w_pos, w_neg))
        if depth >= cfg.max_depth or w_pos + w_neg < min_weight or w_pos == 0 or w_neg == 0:
            return leaf
        Xr = X[rows]
        live = [j for j in allowed if Xr[:, j].any()]
        found = best_split(Xr, yr, wr, live)
        if found is None:
            return leaf
        _, j, k = found
        used[keys[j]] = feats[j]
        go = Xr[:, j] >= k
        return Split(keys[j], k, grow(rows[go], depth + 1), grow(rows[~go], depth + 1))

    root = grow(np.arange(n), 0)
    return RuleTree(cf, root, dict(sorted(used.items())))


def score_instance(t: RuleTree, x: Instance) -> float:
    return t.route(x.features).prob


def score_counts(t: RuleTree, counts: Dict[str, int]) -> float:
    return t.route(counts).prob


# ---------------------------------------------------------------------------
# Rule extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblogRule:
    probability: float
    head: Atom
    body: Conjunction

    def range_restricted(self) -> bool:
        body_vars = set(self.body.variables())
        return all(v in body_vars for v in self.head.variables())

    def as_clause(self) -> Clause:
        return Clause(self.head, self.body, self.probability)

    def __str__(self) -> str:
        return str(self.as_clause())


def _next_index(cf: CoreForm) -> int:
    return 1 + max((int(v.name[1:]) for v in cf.variables if v.name[1:].isdigit()), default=-1)


def extract_rules(t: RuleTree) -> List[ProblogRule]:
    """One rule per leaf; negated (false-branch) tests are left out of the body.

    A true test ``count(F) >= k`` contributes ``k`` renamed copies of ``F``,
    whose fresh variables must take pairwise distinct values.
    """
    cf = t.core_form
    rules = []
    for leaf, conds in t.leaf_conditions():
        need: Dict[str, int] = {}
        for key, k, outcome in conds:
            if outcome:
                need[key] = max(need.get(key, 0), k)
        atoms = list(cf.body.atoms)
        groups = list(cf.body.distinct)
        nxt = _next_index(cf)
        for key in sorted(need):
            f = t.features.get(key) or feature_from_key(key)
            fresh = f.fresh
            copies = need[key] if fresh else 1
            per_var: Dict[Var, List[Var]] = {v: [] for v in fresh}
            for _ in range(copies):
                ren = {}
                for v in fresh:
                    ren[v] = Var(f"V{nxt}")
                    nxt += 1
                    per_var[v].append(ren[v])
                atoms.extend(apply_atom(ren, a) for a in f.body.atoms)
            for v in fresh:
                alias = []
                for g in f.distinct:
                    if v in g:
                        alias.extend(u for u in g if u != v and u not in alias)
                members = alias + per_var[v]
                if len(members) > 1:
                    groups.append(tuple(members))
        rules.append(ProblogRule(leaf.prob, cf.head, Conjunction(tuple(atoms), tuple(groups))))
    return rules
