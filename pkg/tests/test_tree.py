import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ilb.config import Config
from ilb.hypergraph import make_core_form
from ilb.instances import ExampleSet, Instance, generate_instances
from ilb.logic import Atom, Var, match, parse_atoms, parse_body, parse_clause, parse_facts
from ilb.synth import SynthConfig, generate_synthetic
from ilb.tree import (Leaf, RuleTree, Split, WeightedInstanceSet, best_split, extract_rules, leaf_probability,
                      learn_tree, noisy_or, score_counts, score_instance, split_gain)

from oracles import brute_best_gain, brute_gain

V0, V1, V2 = Var("V0"), Var("V1"), Var("V2")
SAMEWORD = "p:hasword(V0,F0),hasword(V1,F0),unique([V2,F0])"
CF = make_core_form(Atom("sametitle", (V0, V1)), parse_body("hasword(V0,V2),hasword(V1,V2)").atoms)

probs = st.floats(0.0, 1.0, allow_nan=False)


def make_rows(layout):
    """``layout``: list of (feature counts, label) pairs, one instance each."""
    rows = []
    for i, (counts, y) in enumerate(layout):
        grounding = ((V0, f"a{i}"), (V1, f"b{i}"), (V2, "w"))
        rows.append(Instance(CF, grounding, Atom("sametitle", (f"a{i}", f"b{i}")), y, dict(counts)))
    return rows


def word_count_rows():
    layout = [({SAMEWORD: 1}, -1)] * 20
    layout += [({SAMEWORD: 2}, 1)] * 5 + [({SAMEWORD: 2}, -1)] * 29
    layout += [({SAMEWORD: 3}, 1)] * 7 + [({SAMEWORD: 3}, -1)] * 2
    return make_rows(layout)


class TestNoisyOr:
    def test_worked_value(self):
        assert abs(noisy_or([0.2, 0.3]) - 0.44) <= 1e-12

    def test_empty(self):
        assert noisy_or([]) == 0.0

    def test_domain(self):
        with pytest.raises(ValueError):
            noisy_or([0.5, 1.2])

    @given(st.lists(probs, max_size=8), st.randoms())
    def test_order_invariant(self, ps, r):
        shuffled = list(ps)
        r.shuffle(shuffled)
        assert noisy_or(ps) == noisy_or(shuffled)

    @given(st.lists(probs, max_size=6), probs, probs)
    def test_monotone(self, ps, a, b):
        lo, hi = sorted((a, b))
        assert noisy_or(ps + [lo]) <= noisy_or(ps + [hi])

    @given(probs)
    def test_singleton(self, p):
        assert noisy_or([p]) == pytest.approx(p, abs=1e-15)

    @given(st.lists(probs, max_size=6))
    def test_absorbing_one(self, ps):
        assert noisy_or(ps + [1.0]) == 1.0


class TestSplitGain:
    def test_pure_split_gains_full_entropy(self):
        assert float(split_gain(2.0, 2.0, np.array(2.0), np.array(0.0))) == pytest.approx(1.0)

    def test_against_brute_force(self):
        rng = np.random.default_rng(17)
        for _ in range(1000):
            n, m = int(rng.integers(2, 201)), int(rng.integers(1, 5))
            X = rng.integers(0, 4, size=(n, m))
            y = np.where(rng.random(n) < rng.random(), 1, -1)
            w = rng.random(n) + 1e-3
            found = best_split(X, y, w, list(range(m)))
            ref = brute_best_gain(X, y, w)
            if found is None:
                assert ref <= 1e-9
                continue
            gain, j, k = found
            assert abs(gain - ref) <= 1e-9
            assert abs(brute_gain(list(X[:, j]), list(y), list(w), k) - gain) <= 1e-9

    def test_ties_prefer_small_k_then_first_column(self):
        X = np.array([[1, 1], [1, 1], [0, 0], [0, 0]])
        y = np.array([1, 1, -1, -1])
        assert best_split(X, y, np.ones(4), [0, 1])[1:] == (0, 1)


class TestLearnTree:
    def test_all_positive(self):
        rows = make_rows([({SAMEWORD: 1}, 1)] * 6)
        t = learn_tree(CF, WeightedInstanceSet(rows, np.ones(6)))
        assert isinstance(t.root, Leaf)
        assert t.root.prob == pytest.approx(7 / 8)

    def test_empty(self):
        with pytest.raises(ValueError):
            learn_tree(CF, WeightedInstanceSet([], np.ones(0)))

    def test_word_count_structure(self):
        t = learn_tree(CF, WeightedInstanceSet(word_count_rows(), np.ones(63)))
        leaves = t.leaves()
        assert len(leaves) == 3
        p1, p2, p3 = (t.route({SAMEWORD: c}).prob for c in (1, 2, 3))
        assert p1 < p2 < p3
        assert t.route({SAMEWORD: 4}).prob == p3
        # raw proportions 0, 5/34 and 7/9 rise with the shared-word count, like 0.000 / 0.147 / 0.778
        raw = sorted(l.w_pos / (l.w_pos + l.w_neg) for l in leaves)
        assert raw == pytest.approx([0.0, 5 / 34, 7 / 9])

    def test_scale_invariance(self):
        rows = word_count_rows()
        a = learn_tree(CF, WeightedInstanceSet(rows, np.ones(len(rows))))
        b = learn_tree(CF, WeightedInstanceSet(rows, np.full(len(rows), 2.0)))
        assert a.root == b.root

    def test_limits(self):
        rng = random.Random(3)
        feats = [f"b:hasword(V0,w{i})" for i in range(6)] + \
            ["b:hasword(V0,w9),hasword(c,w9)", "b:hasword(c,w8),hasword(d,w8),hasword(V1,w8)"]
        layout = [({f: rng.randint(0, 3) for f in feats if rng.random() < 0.5}, rng.choice((1, -1)))
                for _ in range(150)]
        rows = make_rows(layout)
        cfg = Config(max_depth=3, node_literal_cap=2, min_leaf_weight_frac=0.0)
        t = learn_tree(CF, WeightedInstanceSet(rows, [rng.random() + 0.1 for _ in rows]), cfg)
        assert t.depth() <= 3
        assert all(0.0 < l.prob < 1.0 for l in t.leaves())
        for _, conds in t.leaf_conditions():
            assert "b:hasword(c,w8),hasword(d,w8),hasword(V1,w8)" not in [f for f, _, _ in conds]

    def test_each_instance_reaches_one_leaf(self):
        rows = word_count_rows()
        t = learn_tree(CF, WeightedInstanceSet(rows, np.ones(len(rows))))
        for x in rows:
            hits = [leaf for leaf, conds in t.leaf_conditions()
                    if all((x.features.get(f, 0) >= k) == out for f, k, out in conds)]
            assert len(hits) == 1
            assert hits[0] is t.route(x.features)

    def test_identical_counts_identical_scores(self):
        rows = word_count_rows()
        t = learn_tree(CF, WeightedInstanceSet(rows, np.ones(len(rows))))
        assert score_instance(t, rows[20]) == score_instance(t, rows[21]) == score_counts(t, rows[20].features)


class TestExtractRules:
    def test_two_word_leaf(self):
        t = learn_tree(CF, WeightedInstanceSet(word_count_rows(), np.ones(63)))
        middle = t.route({SAMEWORD: 2})
        rules = extract_rules(t)
        assert len(rules) == 3
        (rule,) = [r for r in rules if r.probability == middle.prob]
        text = str(rule)
        assert text.startswith(f"{middle.prob:.4f}::sametitle(V0,V1) :- hasword(V0,V2),hasword(V1,V2),")
        assert text.count("hasword(") == 6  # core form plus two copies, third conjunct dropped
        assert "unique([V2,V3,V4])" in text
        assert rule.range_restricted()
        assert parse_clause(text).body == rule.body

    def test_single_leaf(self):
        t = RuleTree(CF, Leaf(3.0, 1.0, leaf_probability(3.0, 1.0)))
        (rule,) = extract_rules(t)
        assert rule.body == CF.body
        assert rule.probability == pytest.approx(4 / 6)

    def test_three_leaves(self):
        root = Split(SAMEWORD, 2, Split(SAMEWORD, 3, Leaf(1, 0, 2 / 3), Leaf(0, 1, 1 / 3)), Leaf(0, 0, 0.5))
        assert len(extract_rules(RuleTree(CF, root))) == 3

    def test_rules_hold_on_their_instances(self):
        facts, pos = generate_synthetic(SynthConfig(n_entities=15), seed=3)
        db = parse_facts(facts)
        ex = ExampleSet.from_atoms(parse_atoms(pos))
        table = generate_instances(db, ex, Config(instances_per_core_form=200))
        for cf in table.core_forms:
            rows = table.instances[cf.key]
            t = learn_tree(cf, WeightedInstanceSet(rows, np.ones(len(rows))), Config(),
                           table.universe[cf.key], table.features)
            rules = extract_rules(t)
            conds = t.leaf_conditions()
            for x in rows:
                sat = [i for i, (_, c) in enumerate(conds)
                       if all((x.features.get(f, 0) >= k) == out for f, k, out in c)]
                assert len(sat) == 1
                rule = rules[sat[0]]
                assert rule.probability == score_instance(t, x)
                assert rule.range_restricted()
                core = {v: x.theta[v] for v in cf.variables}
                assert next(match(rule.body, db, core), None) is not None, (str(rule), x.grounding)
