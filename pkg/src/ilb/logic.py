"""First-order vocabulary, fact files, substitutions and conjunctive matching.

Constants are plain interned strings, variables are :class:`Var` instances.
Function symbols are not supported: every argument is a constant or a variable.
"""

from __future__ import annotations

import itertools
import math
import re
import sys
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union


class ParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ArityError(ValueError):
    pass


@dataclass(frozen=True, slots=True, order=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name

    def __repr__(self) -> str:
        return f"Var({self.name!r})"


Term = Union[str, Var]
Substitution = Dict[Var, Term]


class PredicateSymbol(NamedTuple):
    name: str
    arity: int

    def __str__(self) -> str:
        return f"{self.name}/{self.arity}"


@dataclass(frozen=True, slots=True)
class Atom:
    pred: str
    args: Tuple[Term, ...] = ()

    @property
    def signature(self) -> PredicateSymbol:
        return PredicateSymbol(self.pred, len(self.args))

    def is_ground(self) -> bool:
        return not any(isinstance(t, Var) for t in self.args)

    def variables(self) -> List[Var]:
        return [t for t in self.args if isinstance(t, Var)]

    def __str__(self) -> str:
        if not self.args:
            return self.pred
        return f"{self.pred}({','.join(str(t) for t in self.args)})"


def const(token: str) -> str:
    """Intern a constant token so equal tokens share one object."""
    return sys.intern(token)


def atom(pred: str, *args: Term) -> Atom:
    """Convenience constructor: uppercase-initial strings become variables."""
    terms = []
    for a in args:
        if isinstance(a, str) and (a[:1].isupper() or a[:1] == "_"):
            terms.append(Var(a))
        elif isinstance(a, str):
            terms.append(const(a))
        else:
            terms.append(a)
    return Atom(sys.intern(pred), tuple(terms))


@dataclass(frozen=True)
class Conjunction:
    """Ordered atoms plus groups of variables that must be pairwise distinct."""

    atoms: Tuple[Atom, ...] = ()
    distinct: Tuple[Tuple[Var, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "distinct", tuple(tuple(g) for g in self.distinct))
        if self.distinct:
            known = set(self.variables())
            for g in self.distinct:
                missing = [v for v in g if v not in known]
                if missing:
                    raise ValueError(f"distinctness group references unknown variables {missing}")

    def variables(self) -> List[Var]:
        """Variables in first-occurrence order."""
        seen: Dict[Var, None] = {}
        for a in self.atoms:
            for t in a.args:
                if isinstance(t, Var):
                    seen.setdefault(t, None)
        return list(seen)

    def __len__(self) -> int:
        return len(self.atoms)

    def __str__(self) -> str:
        return render_body(self)


def render_body(c: Conjunction) -> str:
    parts = [str(a) for a in c.atoms]
    parts += [f"unique([{','.join(v.name for v in g)}])" for g in c.distinct]
    return ",".join(parts) if parts else "true"


# ---------------------------------------------------------------------------
# Fact base
# ---------------------------------------------------------------------------


class FactBase:
    """Set of ground atoms indexed by predicate, argument position and constant.

    Built once from an iterable of atoms and not modified afterwards.
    """

    def __init__(self, facts: Iterable[Atom] = ()):
        self._facts: Dict[Atom, None] = {}
        self._arity: Dict[str, int] = {}
        self._by_pred: Dict[PredicateSymbol, List[Atom]] = {}
        self._index: Dict[PredicateSymbol, List[Dict[str, List[Atom]]]] = {}
        for f in facts:
            self._add(f)

    def _add(self, f: Atom) -> None:
        if not f.is_ground():
            raise ValueError(f"fact {f} is not ground")
        if f in self._facts:
            return
        arity = self._arity.setdefault(f.pred, len(f.args))
        if arity != len(f.args):
            raise ArityError(f"predicate {f.pred} used with arity {arity} and {len(f.args)}")
        sig = f.signature
        self._facts[f] = None
        self._by_pred.setdefault(sig, []).append(f)
        slots = self._index.setdefault(sig, [{} for _ in range(len(f.args))])
        for pos, c in enumerate(f.args):
            slots[pos].setdefault(c, []).append(f)

    def __contains__(self, f: Atom) -> bool:
        return f in self._facts

    def __iter__(self) -> Iterator[Atom]:
        return iter(self._facts)

    def __len__(self) -> int:
        return len(self._facts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FactBase):
            return NotImplemented
        return self._facts.keys() == other._facts.keys()

    @property
    def facts(self) -> Tuple[Atom, ...]:
        return tuple(self._facts)

    @property
    def predicates(self) -> List[PredicateSymbol]:
        return list(self._by_pred)

    def by_predicate(self, sig: PredicateSymbol) -> List[Atom]:
        return self._by_pred.get(sig, [])

    def lookup(self, sig: PredicateSymbol, pos: int, c: str) -> List[Atom]:
        slots = self._index.get(sig)
        if slots is None:
            return []
        return slots[pos].get(c, [])

    def constants(self) -> List[str]:
        seen: Dict[str, None] = {}
        for f in self._facts:
            for c in f.args:
                seen.setdefault(c, None)
        return list(seen)

    def union(self, other: "FactBase") -> "FactBase":
        return FactBase(itertools.chain(self, other))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)"
    r"|(?P<const>[a-z][A-Za-z0-9_]*)"
    r"|(?P<var>[A-Z_][A-Za-z0-9_]*)"
    r"|(?P<punct>::|:-|[(),.\[\]]))"
)


class _Tokens:
    def __init__(self, text: str, line: Optional[int]):
        self.line = line
        self.toks: List[Tuple[str, str]] = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ParseError(f"unexpected character {text[pos:].strip()[:1]!r}", line)
            pos = m.end()
            kind = m.lastgroup
            self.toks.append((kind, m.group(kind)))
        self.i = 0

    def peek(self) -> Tuple[str, str]:
        return self.toks[self.i] if self.i < len(self.toks) else ("eof", "")

    def take(self, kind: str, value: Optional[str] = None) -> str:
        k, v = self.peek()
        if k != kind or (value is not None and v != value):
            want = value or kind
            raise ParseError(f"expected {want!r}, got {v or 'end of line'!r}", self.line)
        self.i += 1
        return v

    def at(self, kind: str, value: Optional[str] = None) -> bool:
        k, v = self.peek()
        return k == kind and (value is None or v == value)


def _parse_atom(tk: _Tokens, ground: bool) -> Atom:
    pred = tk.take("const")
    args: List[Term] = []
    if tk.at("punct", "("):
        tk.take("punct", "(")
        while True:
            if tk.at("const"):
                args.append(const(tk.take("const")))
            elif tk.at("var"):
                if ground:
                    raise ParseError(f"variable {tk.peek()[1]} in ground atom", tk.line)
                args.append(Var(tk.take("var")))
            else:
                raise ParseError(f"expected a constant or variable, got {tk.peek()[1] or 'end of line'!r}", tk.line)
            if tk.at("punct", "("):
                raise ParseError("nested terms are not supported", tk.line)
            if tk.at("punct", ","):
                tk.take("punct", ",")
                continue
            tk.take("punct", ")")
            break
    return Atom(sys.intern(pred), tuple(args))


def _strip_comment(line: str) -> str:
    i = line.find("%")
    return line if i < 0 else line[:i]


def parse_atoms(text: str) -> List[Atom]:
    """Parse ground atoms, one per line, keeping file order and duplicates."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        tk = _Tokens(line, lineno)
        out.append(_parse_atom(tk, ground=True))
        tk.take("punct", ".")
        if not tk.at("eof"):
            raise ParseError(f"trailing input {tk.peek()[1]!r}", lineno)
    return out


def parse_facts(text: str) -> FactBase:
    atoms = parse_atoms(text)
    arity: Dict[str, Tuple[int, int]] = {}
    for lineno, a in zip(_atom_lines(text), atoms):
        prev = arity.setdefault(a.pred, (len(a.args), lineno))
        if prev[0] != len(a.args):
            raise ArityError(
                f"line {lineno}: predicate {a.pred} has arity {len(a.args)}, "
                f"but arity {prev[0]} on line {prev[1]}"
            )
    return FactBase(atoms)


def _atom_lines(text: str) -> Iterator[int]:
    for lineno, raw in enumerate(text.splitlines(), 1):
        if _strip_comment(raw).strip():
            yield lineno


def render_facts(db: Iterable[Atom]) -> str:
    return "".join(f"{a}.\n" for a in db)


@dataclass(frozen=True)
class Clause:
    """A parsed ``p::head :- body.`` statement (probability may be absent)."""

    head: Atom
    body: Conjunction
    probability: Optional[float] = None

    def range_restricted(self) -> bool:
        body_vars = set(self.body.variables())
        return all(v in body_vars for v in self.head.variables())

    def __str__(self) -> str:
        prefix = "" if self.probability is None else f"{self.probability:.4f}::"
        if not self.body.atoms and not self.body.distinct:
            return f"{prefix}{self.head}."
        return f"{prefix}{self.head} :- {render_body(self.body)}."


def parse_body(text: str, line: Optional[int] = None) -> Conjunction:
    return Conjunction(*parse_literals(text, line))


def parse_literals(text: str, line: Optional[int] = None):
    """Split a body into its atoms and its ``unique([...])`` groups, unchecked."""
    tk = _Tokens(text, line)
    atoms, groups = _parse_literals(tk)
    if not tk.at("eof"):
        raise ParseError(f"trailing input {tk.peek()[1]!r}", line)
    return atoms, groups


def _parse_body(tk: _Tokens) -> Conjunction:
    return Conjunction(*_parse_literals(tk))


def _parse_literals(tk: _Tokens):
    atoms: List[Atom] = []
    groups: List[Tuple[Var, ...]] = []
    while True:
        if tk.at("const", "unique"):
            tk.take("const")
            tk.take("punct", "(")
            tk.take("punct", "[")
            group = [Var(tk.take("var"))]
            while tk.at("punct", ","):
                tk.take("punct", ",")
                group.append(Var(tk.take("var")))
            tk.take("punct", "]")
            tk.take("punct", ")")
            groups.append(tuple(group))
        elif tk.at("const", "true"):
            tk.take("const")
        else:
            atoms.append(_parse_atom(tk, ground=False))
        if tk.at("punct", ","):
            tk.take("punct", ",")
            continue
        break
    return tuple(atoms), tuple(groups)


def parse_clause(text: str, line: Optional[int] = None) -> Clause:
    tk = _Tokens(text, line)
    prob = None
    if tk.at("num"):
        prob = float(tk.take("num"))
        if not 0.0 <= prob <= 1.0:
            raise ParseError(f"probability {prob} outside [0,1]", line)
        tk.take("punct", "::")
    head = _parse_atom(tk, ground=False)
    body = Conjunction()
    if tk.at("punct", ":-"):
        tk.take("punct", ":-")
        body = _parse_body(tk)
    tk.take("punct", ".")
    if not tk.at("eof"):
        raise ParseError(f"trailing input {tk.peek()[1]!r}", line)
    return Clause(head, body, prob)


def parse_program(text: str) -> List[Clause]:
    """Parse a rule file: one ``[p::]head [:- body].`` clause per line."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if line:
            out.append(parse_clause(line, lineno))
    return out


# ---------------------------------------------------------------------------
# Substitutions
# ---------------------------------------------------------------------------


def apply_atom(theta: Substitution, a: Atom) -> Atom:
    if not theta:
        return a
    return Atom(a.pred, tuple(theta.get(t, t) if isinstance(t, Var) else t for t in a.args))


def apply(theta: Substitution, c: Conjunction) -> Conjunction:
    """Apply ``theta`` to every atom of ``c``.

    Distinctness groups only hold variables, so members bound to constants
    are dropped; pass the constraint to :func:`match` as a pre-binding instead.
    """
    atoms = tuple(apply_atom(theta, a) for a in c.atoms)
    groups = []
    for g in c.distinct:
        vs = tuple(t for t in (theta.get(v, v) for v in g) if isinstance(t, Var))
        if len(vs) > 1:
            groups.append(vs)
    return Conjunction(atoms, tuple(groups))


def compose(theta1: Substitution, theta2: Substitution) -> Substitution:
    """Substitution equivalent to applying ``theta1`` first, then ``theta2``."""
    out = {v: (theta2.get(t, t) if isinstance(t, Var) else t) for v, t in theta1.items()}
    for v, t in theta2.items():
        out.setdefault(v, t)
    return out


def variabilize(atoms: Sequence[Atom], prefix: str = "V") -> Tuple[Conjunction, Substitution]:
    """Replace each distinct constant by a fresh variable, in first-occurrence order.

    Returns the variabilized conjunction and the substitution mapping the new
    variables back to the constants they replaced.
    """
    if not atoms:
        raise ValueError("variabilize needs at least one atom")
    names: Dict[str, Var] = {}
    out = []
    for a in atoms:
        args = []
        for t in a.args:
            if isinstance(t, Var):
                args.append(t)
                continue
            v = names.get(t)
            if v is None:
                v = names[t] = Var(f"{prefix}{len(names)}")
            args.append(v)
        out.append(Atom(a.pred, tuple(args)))
    return Conjunction(tuple(out)), {v: c for c, v in names.items()}


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------


def match(c: Conjunction, db: FactBase, theta: Optional[Substitution] = None) -> Iterator[Substitution]:
    """Enumerate every grounding of ``c`` whose atoms are all facts of ``db``.

    Variables may bind to equal constants unless a distinctness group forbids
    it. ``theta`` pre-binds variables. Each substitution is produced once, in an
    order fixed by the fact base's construction order.
    """
    binding: Substitution = dict(theta or {})
    groups = [g for g in c.distinct if len(g) > 1]
    if not _distinct_ok(binding, groups):
        return
    yield from _solve(list(c.atoms), binding, groups, db)


def _distinct_ok(binding: Substitution, groups) -> bool:
    for g in groups:
        seen = set()
        for v in g:
            t = binding.get(v)
            if t is None:
                continue
            if t in seen:
                return False
            seen.add(t)
    return True


def _candidates(a: Atom, binding: Substitution, db: FactBase) -> List[Atom]:
    sig = a.signature
    best: Optional[List[Atom]] = None
    for pos, t in enumerate(a.args):
        if isinstance(t, Var):
            t = binding.get(t)
            if t is None:
                continue
        bucket = db.lookup(sig, pos, t)
        if best is None or len(bucket) < len(best):
            best = bucket
            if not best:
                break
    return db.by_predicate(sig) if best is None else best


def _solve(atoms: List[Atom], binding: Substitution, groups, db: FactBase) -> Iterator[Substitution]:
    if not atoms:
        yield dict(binding)
        return
    # most constrained atom first; ties keep conjunction order
    choice, cands = 0, None
    for i, a in enumerate(atoms):
        cs = _candidates(a, binding, db)
        if cands is None or len(cs) < len(cands):
            choice, cands = i, cs
            if not cs:
                return
    a = atoms[choice]
    rest = atoms[:choice] + atoms[choice + 1:]
    for fact in cands:
        new: List[Var] = []
        ok = True
        for t, c in zip(a.args, fact.args):
            if isinstance(t, Var):
                b = binding.get(t)
                if b is None:
                    binding[t] = c
                    new.append(t)
                elif b != c:
                    ok = False
                    break
            elif t != c:
                ok = False
                break
        if ok and (not new or _distinct_ok(binding, groups)):
            yield from _solve(rest, binding, groups, db)
        for v in new:
            del binding[v]


# ---------------------------------------------------------------------------
# Canonical forms
# ---------------------------------------------------------------------------

_PERMUTATION_LIMIT = 5040


def _argkey(t: Term, fixed, color) -> tuple:
    if isinstance(t, Var):
        if t in fixed:
            return (1, t.name)
        return (2, color[t])
    return (0, t)


def _refine_colors(atoms: Sequence[Atom], groups, free: List[Var], fixed, n_head: int) -> Dict[Var, int]:
    occ: Dict[Var, List[Tuple[int, int]]] = {v: [] for v in free}
    for i, a in enumerate(atoms):
        for pos, t in enumerate(a.args):
            if t in occ:
                occ[t].append((i, pos))
    color = {v: 0 for v in free}
    n_classes = 1 if free else 0
    for _ in range(len(free) + 1):
        sig = {}
        for v in free:
            items = sorted(
                (i < n_head, atoms[i].pred, len(atoms[i].args), pos,
                 tuple(_argkey(t, fixed, color) for t in atoms[i].args))
                for i, pos in occ[v]
            )
            gsig = sorted(tuple(sorted(_argkey(u, fixed, color) for u in g)) for g in groups if v in g)
            sig[v] = (color[v], tuple(items), tuple(gsig))
        ranks = {s: r for r, s in enumerate(sorted(set(sig.values())))}
        new = {v: ranks[sig[v]] for v in free}
        stable = len(ranks) == n_classes
        color, n_classes = new, len(ranks)
        if stable:
            break
    return color


def _rename(order: Sequence[Atom], groups, fixed):
    names: Dict[Var, int] = {}
    out = []
    for a in order:
        args = []
        for t in a.args:
            if isinstance(t, Var) and t not in fixed:
                if t not in names:
                    names[t] = len(names)
                args.append((2, names[t]))
            elif isinstance(t, Var):
                args.append((1, t.name))
            else:
                args.append((0, t))
        out.append((a.pred, tuple(args)))
    gs = []
    for g in groups:
        members = []
        for v in g:
            if v in fixed:
                members.append((1, v.name))
            else:
                members.append((2, names[v]))
        gs.append(tuple(sorted(members)))
    return (tuple(out), tuple(sorted(gs))), names


def canonicalize(
    body: Conjunction,
    head: Optional[Atom] = None,
    fixed: Iterable[Var] = (),
    prefix: str = "V",
):
    """Rename variables and reorder atoms into a canonical representative.

    Variables listed in ``fixed`` are treated like constants. The head, if
    given, always stays first. Returns ``(key, head, body)`` where ``key`` is
    a hashable tuple equal for alpha-equivalent inputs.
    """
    fixed = frozenset(fixed)
    atoms = ([head] if head is not None else []) + list(body.atoms)
    n_head = 1 if head is not None else 0
    free: List[Var] = []
    for a in atoms:
        for t in a.args:
            if isinstance(t, Var) and t not in fixed and t not in free:
                free.append(t)
    groups = [g for g in body.distinct]
    color = _refine_colors(atoms, groups, free, fixed, n_head)

    def sort_key(a: Atom):
        return (a.pred, len(a.args), tuple(_argkey(t, fixed, color) for t in a.args))

    tail = sorted(atoms[n_head:], key=sort_key)
    ties: List[List[Atom]] = []
    for _, grp in itertools.groupby(tail, key=sort_key):
        ties.append(list(grp))
    n_orders = math.prod(math.factorial(len(t)) for t in ties)
    prefix_atoms = atoms[:n_head]
    if n_orders <= _PERMUTATION_LIMIT:
        orders = (
            prefix_atoms + [a for perm in combo for a in perm]
            for combo in itertools.product(*(itertools.permutations(t) for t in ties))
        )
    else:
        orders = iter([prefix_atoms + tail])
    best = None
    for order in orders:
        key, names = _rename(order, groups, fixed)
        if best is None or key < best[0]:
            best = (key, names, order)
    key, names, order = best
    ren = {v: Var(f"{prefix}{i}") for v, i in names.items()}
    new_head = apply_atom(ren, order[0]) if head is not None else None
    new_body_atoms = tuple(apply_atom(ren, a) for a in order[n_head:])
    new_groups = sorted(
        (tuple(sorted((ren.get(v, v) for v in g), key=_var_sort)) for g in groups),
    )
    return key, new_head, Conjunction(new_body_atoms, tuple(new_groups))


def _var_sort(v: Var):
    m = re.match(r"([A-Za-z_]*)(\d*)$", v.name)
    if m and m.group(2):
        return (m.group(1), int(m.group(2)))
    return (v.name, -1)


def canonical_form(c: Conjunction, head: Optional[Atom] = None):
    """Hashable key, equal iff ``c`` matches up to variable renaming and atom order."""
    return canonicalize(c, head)[0]
