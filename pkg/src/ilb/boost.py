"""Confidence-rated boosting of Problog rule trees.

Each round fits one tree per core form on the current example distribution.
An example's round score is the noisy-or of the leaf probabilities of all its
instances; the clipped logit of that score is the round's real-valued
prediction. The final model adds the round predictions with their weights and
maps the sum through a sigmoid.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .config import Config
from .hypergraph import CoreForm, build_hypergraph, make_core_form
from .instances import ExampleSet, FeatureExtractor, Instance, TrainingTable, deduce, feature_from_key
from .logic import Atom, FactBase, PredicateSymbol, Substitution, Var, match, parse_clause
from .tree import Leaf, Node, RuleTree, Split, WeightedInstanceSet, extract_rules, learn_tree, noisy_or, score_instance

log = logging.getLogger(__name__)

ALPHA_MAX = 2.0
MODEL_FORMAT = "ilb-model/1"


def logit_clip(p: float, c: float) -> float:
    if p <= 0.0:
        return -c
    if p >= 1.0:
        return c
    return min(c, max(-c, math.log(p) - math.log1p(-p)))


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def round_score(trees: Dict[str, RuleTree], e: Atom, instances_of_e: Sequence[Instance]) -> float:
    """Noisy-or of the leaf probabilities of ``e``'s instances; 0 if none."""
    ps = []
    for x in instances_of_e:
        if x.head != e:
            raise ValueError(f"instance deduces {x.head}, not {e}")
        t = trees.get(x.core_form.key)
        if t is not None:
            ps.append(score_instance(t, x))
    return noisy_or(ps)


@dataclass
class BoostRound:
    trees: Dict[str, RuleTree]
    alpha: float
    z: float


@dataclass
class BoostedModel:
    target: PredicateSymbol
    core_forms: List[CoreForm]
    rounds: List[BoostRound]
    config: Config
    trace: List[dict] = field(default_factory=list)

    @property
    def floor_margin(self) -> float:
        c = self.config.margin_clip
        return sum(r.alpha * logit_clip(0.0, c) for r in self.rounds)

    @property
    def floor_probability(self) -> float:
        return sigmoid(self.floor_margin)

    def margin(self, scored: Sequence[Tuple[str, Dict[str, int]]]) -> float:
        """Additive confidence of one head from its ``(core form key, feature counts)`` pairs."""
        c = self.config.margin_clip
        total = 0.0
        for r in self.rounds:
            ps = [r.trees[k].route(counts).prob for k, counts in scored if k in r.trees]
            total += r.alpha * logit_clip(noisy_or(ps), c)
        return total


def _example_universe(table: TrainingTable, ex: ExampleSet) -> List[Atom]:
    heads = dict.fromkeys(x.head for x in table)
    heads.update(dict.fromkeys(ex.positives))
    return sorted(heads, key=str)


def _line_search(w: np.ndarray, ym: np.ndarray) -> Tuple[float, float]:
    """Weight minimizing sum(w * exp(-alpha * y * m)) on [0, ALPHA_MAX]."""
    def loss(a):
        return float(np.dot(w, np.exp(-a * ym)))

    res = minimize_scalar(loss, bounds=(0.0, ALPHA_MAX), method="bounded", options={"xatol": 1e-10})
    alpha, z = float(res.x), loss(float(res.x))
    for a in (0.0, ALPHA_MAX):
        za = loss(a)
        if za < z:
            alpha, z = a, za
    return alpha, z


def project_weights(w: np.ndarray, owners: np.ndarray) -> np.ndarray:
    """Instance weights: every instance carries its example's full weight."""
    return w[owners]


def reweight(w: np.ndarray, alpha: float, ym: np.ndarray) -> Tuple[np.ndarray, float]:
    """Exponential update ``w * exp(-alpha * y * m)``, renormalized; returns ``(w', Z)``."""
    u = w * np.exp(-alpha * ym)
    z = float(u.sum())
    return u / z, z


def train(table: TrainingTable, ex: ExampleSet, cfg: Config = Config(), seed: Optional[int] = None) -> BoostedModel:
    if cfg.rounds < 1:
        raise ValueError("rounds must be >= 1")
    if len(table) == 0:
        raise ValueError("training table is empty")
    cfg = cfg if seed is None else cfg.replace(seed=seed)
    examples = _example_universe(table, ex)
    index = {e: i for i, e in enumerate(examples)}
    y = np.array([1.0 if ex.is_positive(e) else -1.0 for e in examples])
    owner = {cf.key: np.array([index[x.head] for x in table.instances[cf.key]], dtype=int)
             for cf in table.core_forms}
    by_example: List[List[Instance]] = [[] for _ in examples]
    for x in table:
        by_example[index[x.head]].append(x)

    n = len(examples)
    w = np.full(n, 1.0 / n)
    rounds: List[BoostRound] = []
    trace = []
    z_product = 1.0
    for t in range(cfg.rounds):
        trees = {}
        for cf in table.core_forms:
            rows = table.instances[cf.key]
            if not rows:
                continue
            iw = project_weights(w, owner[cf.key])
            if not iw.sum() > 0:
                iw = np.full(len(rows), 1.0)
            trees[cf.key] = learn_tree(cf, WeightedInstanceSet(rows, iw), cfg,
                                       universe=table.universe[cf.key], registry=table.features)
        scores = [round_score(trees, e, by_example[i]) for i, e in enumerate(examples)]
        m = np.array([logit_clip(s, cfg.margin_clip) for s in scores])
        if t == 0 and not any(m[i] > -cfg.margin_clip for i in range(n) if y[i] > 0):
            raise ValueError("no core form covers any positive example")
        ym = y * m
        alpha, _ = _line_search(w, ym)
        w, z = reweight(w, alpha, ym)
        z_product *= z
        rounds.append(BoostRound(trees, alpha, z))
        trace.append({"round": t + 1, "alpha": alpha, "z": z, "z_product": z_product,
                      "weight_sum": float(w.sum())})
        log.info("round %d: alpha=%.4f Z=%.6f prod=%.6f", t + 1, alpha, z, z_product)
    return BoostedModel(table.target, list(table.core_forms), rounds, cfg, trace)


def training_margins(model: BoostedModel, table: TrainingTable, ex: ExampleSet) -> Dict[Atom, float]:
    """F(e) over the training example universe, from the sampled table."""
    scored: Dict[Atom, List[Tuple[str, Dict[str, int]]]] = {e: [] for e in _example_universe(table, ex)}
    for x in table:
        scored[x.head].append((x.core_form.key, x.features))
    return {e: model.margin(s) for e, s in scored.items()}


def _bind_head(cf: CoreForm, q: Atom) -> Optional[Substitution]:
    theta: Substitution = {}
    for t, c in zip(cf.head.args, q.args):
        if isinstance(t, Var):
            if theta.setdefault(t, c) != c:
                return None
        elif t != c:
            return None
    return theta


def predict_margins(model: BoostedModel, db: FactBase, queries: Optional[Iterable[Atom]] = None) -> Dict[Atom, float]:
    """Additive confidence F(head) for queried heads, or every deducible head."""
    g = build_hypergraph(db, exclude=model.target)
    fx = FeatureExtractor(g, model.config.max_feature_len)
    scored: Dict[Atom, List[Tuple[str, Dict[str, int]]]] = {}
    if queries is not None:
        queries = list(dict.fromkeys(queries))
        for q in queries:
            if q.signature != model.target:
                raise ValueError(f"query {q} does not match target {model.target}")
            if not q.is_ground():
                raise ValueError(f"query {q} is not ground")
            scored[q] = []
    for cf in model.core_forms:
        if queries is None:
            seeds = [None]
        else:
            seeds = [th for th in (_bind_head(cf, q) for q in queries) if th is not None]
        for theta0 in seeds:
            for theta in match(cf.body, db, theta0):
                head = deduce(cf, theta)
                scored.setdefault(head, []).append((cf.key, fx.features(cf, theta)))
    return {h: model.margin(s) for h, s in scored.items()}


def predict(model: BoostedModel, db: FactBase, queries: Optional[Iterable[Atom]] = None) -> Dict[Atom, float]:
    return {h: sigmoid(f) for h, f in predict_margins(model, db, queries).items()}


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _node_to_dict(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": {"w_pos": node.w_pos, "w_neg": node.w_neg, "p": node.prob}}
    return {"feature": node.feature, "k": node.k,
            "true": _node_to_dict(node.true), "false": _node_to_dict(node.false)}


def _node_from_dict(d: dict) -> Node:
    if "leaf" in d:
        leaf = d["leaf"]
        return Leaf(leaf["w_pos"], leaf["w_neg"], leaf["p"])
    return Split(d["feature"], int(d["k"]), _node_from_dict(d["true"]), _node_from_dict(d["false"]))


def model_to_json(model: BoostedModel) -> str:
    doc = {
        "format": MODEL_FORMAT,
        "target": str(model.target),
        "config": model.config.to_dict(),
        "core_forms": [cf.key for cf in model.core_forms],
        "rounds": [
            {"alpha": r.alpha, "z": r.z,
             "trees": {k: _node_to_dict(t.root) for k, t in r.trees.items()}}
            for r in model.rounds
        ],
        "trace": model.trace,
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _core_form_from_key(key: str) -> CoreForm:
    clause = parse_clause(key + ".")
    return make_core_form(clause.head, clause.body.atoms)


def model_from_json(text: str) -> BoostedModel:
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"not an ILB model file (format {doc.get('format')!r})")
    name, _, arity = doc["target"].rpartition("/")
    target = PredicateSymbol(name, int(arity))
    cfg = Config(**doc["config"])
    core_forms = []
    for key in doc["core_forms"]:
        cf = _core_form_from_key(key)
        if cf.key != key:
            raise ValueError(f"core form {key!r} is not in canonical form")
        core_forms.append(cf)
    by_key = {cf.key: cf for cf in core_forms}
    rounds = []
    for r in doc["rounds"]:
        trees = {}
        for k, node in r["trees"].items():
            root = _node_from_dict(node)
            t = RuleTree(by_key[k], root)
            t.features = {f: feature_from_key(f) for f, _, _ in _splits(root)}
            trees[k] = t
        rounds.append(BoostRound(trees, float(r["alpha"]), float(r["z"])))
    return BoostedModel(target, core_forms, rounds, cfg, doc.get("trace", []))


def _splits(node: Node):
    if isinstance(node, Split):
        yield node.feature, node.k, node
        yield from _splits(node.true)
        yield from _splits(node.false)


def render_program(model: BoostedModel) -> str:
    """All extracted rules, tagged with their round."""
    lines = [f"% target {model.target}"]
    for t, r in enumerate(model.rounds, 1):
        lines.append(f"% round {t} alpha={r.alpha:.6f}")
        for cf in model.core_forms:
            tree = r.trees.get(cf.key)
            if tree is None:
                continue
            lines.extend(str(rule) for rule in extract_rules(tree))
    return "\n".join(lines) + "\n"
