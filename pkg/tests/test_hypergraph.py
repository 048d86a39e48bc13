import random

import pytest

from ilb.hypergraph import GroundPath, build_hypergraph, extract_core_forms, find_paths, make_core_form
from ilb.logic import Atom, FactBase, parse_atoms, parse_facts

from oracles import AUTHORS_FACTS, brute_paths, random_factbase


@pytest.fixture
def authors():
    return build_hypergraph(parse_facts(AUTHORS_FACTS))


class TestBuild:
    def test_authors_edges(self, authors):
        assert len(authors.edges) == 7
        assert {e.pred for e in authors.edges} == {"hasword"}
        assert {"d_d_lewis", "david_d_lewis", "haussler_d"} <= authors.vertices

    def test_empty(self):
        g = build_hypergraph(FactBase())
        assert g.edges == () and g.vertices == set()

    def test_single_fact(self):
        g = build_hypergraph(parse_facts("p(a,b)."))
        assert g.vertices == {"a", "b"}
        assert g.incident("a") == g.incident("b") == (0,)

    def test_target_excluded(self):
        db = parse_facts("p(a,b).\nt(a,b).\n")
        g = build_hypergraph(db, exclude=next(f for f in db if f.pred == "t").signature)
        assert [str(e) for e in g.edges] == ["p(a,b)"]

    def test_flattening_reproduces_facts(self):
        rng = random.Random(5)
        for _ in range(50):
            db = random_factbase(rng)
            g = build_hypergraph(db)
            assert list(g.edges) == list(db)
            for v in g.vertices:
                assert set(g.incident(v)) == {i for i, e in enumerate(g.edges) if v in e.args}


class TestFindPaths:
    def test_authors(self, authors):
        e = parse_atoms("sameauthor(d_d_lewis,david_d_lewis).")[0]
        got = {frozenset(map(str, p.edges)) for p in find_paths(authors, e, 2)}
        assert got == {
            frozenset({"hasword(d_d_lewis,lewis)", "hasword(david_d_lewis,lewis)"}),
            frozenset({"hasword(d_d_lewis,d)", "hasword(david_d_lewis,d)"}),
        }

    def test_isolated(self, authors):
        assert find_paths(authors, Atom("sameauthor", ("nobody", "d_d_lewis")), 3) == []

    def test_unary_example(self):
        g = build_hypergraph(parse_facts("r(a,b)."))
        paths = find_paths(g, Atom("q", ("a",)), 1)
        assert [p.edges for p in paths] == [(Atom("r", ("a", "b")),)]

    def test_bad_length(self, authors):
        with pytest.raises(ValueError):
            find_paths(authors, Atom("q", ("a",)), 0)

    def test_against_brute_force(self):
        rng = random.Random(2024)
        for _ in range(200):
            db = random_factbase(rng, n_consts=6, max_facts=20)
            g = build_hypergraph(db)
            consts = sorted(db.constants()) or ["c0"]
            e = Atom("t", (rng.choice(consts), rng.choice(consts)))
            max_len = rng.randint(1, 3)
            paths = find_paths(g, e, max_len)
            got = [frozenset(p.edges) for p in paths]
            assert len(got) == len(set(got))
            assert set(got) == brute_paths(list(g.edges), e, max_len)
            for p in paths:
                assert p.is_connected()
                assert set(e.args) <= p.vertices
                assert list(p.edges) == sorted(p.edges, key=g.edge_id.__getitem__)


class TestCoreForms:
    def test_authors_single_core_form(self, authors):
        e = parse_atoms("sameauthor(d_d_lewis,david_d_lewis).")[0]
        cfs = extract_core_forms(find_paths(authors, e, 2), e)
        assert [cf.key for cf in cfs] == [
            "sameauthor(V0,V1) :- hasword(V0,V2),hasword(V1,V2),unique([V0,V1,V2])"]
        assert cfs[0].range_restricted()

    def test_two_shapes(self):
        # a and b share a word, and a cites b: two structurally different paths
        db = parse_facts("w(a,x).\nw(b,x).\ncites(a,b).\n")
        e = Atom("t", ("a", "b"))
        cfs = extract_core_forms(find_paths(build_hypergraph(db), e, 2), e)
        bodies = sorted(str(cf.body) for cf in cfs)
        assert len(cfs) == 4
        assert "cites(V0,V1),unique([V0,V1])" in bodies
        assert "w(V0,V2),w(V1,V2),unique([V0,V1,V2])" in bodies

    def test_alpha_variants_merge(self):
        db = parse_facts("w(a,x).\nw(b,x).\nw(a,y).\nw(b,y).\n")
        e = Atom("t", ("a", "b"))
        paths = find_paths(build_hypergraph(db), e, 2)
        assert len(paths) == 2
        assert len(extract_core_forms(paths, e)) == 1

    def test_range_restricted_on_random_graphs(self):
        rng = random.Random(11)
        for _ in range(100):
            db = random_factbase(rng, n_consts=5, max_facts=15)
            consts = sorted(db.constants()) or ["c0"]
            e = Atom("t", (rng.choice(consts), rng.choice(consts)))
            for cf in extract_core_forms(find_paths(build_hypergraph(db), e, 2), e):
                assert cf.range_restricted()
                assert len(cf.body.atoms) <= 2

    def test_object_identity_optional(self):
        head, body = parse_atoms("t(a,b).")[0], parse_atoms("w(a,x).\nw(b,x).")
        from ilb.logic import variabilize
        conj, _ = variabilize([head] + body)
        plain = make_core_form(conj.atoms[0], conj.atoms[1:], object_identity=False)
        assert "unique" not in plain.key


def test_ground_path_string():
    p = GroundPath(tuple(parse_atoms("p(a,b).\nq(b).")), ("a", "b"))
    assert str(p) == "{p(a,b), q(b)}"
