"""Ground logic programs with negation and their stable-model semantics.

Atoms, clauses and programs are immutable values, totally ordered so that
every listing (trace exports, serialized programs, model dumps) is
byte-stable across runs.  All operations are pure functions; nothing here
holds shared mutable state, so programs may be evaluated concurrently.

Two evaluation routes are provided on purpose and are cross-checked by
the test suite:

* the definition-following route: ``gl_reduct`` + ``least_model`` give
  ``is_stable_model``, and ``stable_models_bruteforce`` enumerates every
  candidate interpretation;
* the fast route for acyclic programs: ``stable_model_acyclic`` evaluates
  atoms once, in reverse topological order of the atom dependency graph.
"""

from __future__ import annotations

import math
import re
from collections import defaultdict, deque
from dataclasses import dataclass
from functools import total_ordering
from typing import Iterable, Iterator

__all__ = [
    "Atom",
    "Literal",
    "Clause",
    "GroundProgram",
    "DependencyGraph",
    "Interpretation",
    "CyclicProgramError",
    "atom",
    "head_set",
    "gl_reduct",
    "least_model",
    "is_stable_model",
    "stable_models_bruteforce",
    "stable_model_acyclic",
    "dependency_graph",
    "is_acyclic",
    "height",
    "relevant_atoms",
    "format_atom",
    "parse_atom",
    "format_clause",
    "parse_clause",
    "program_to_text",
    "program_from_text",
]

Constant = "str | int"

BRUTEFORCE_CAP = 20


class CyclicProgramError(ValueError):
    """Raised when an operation that requires acyclicity meets a cycle."""


def _arg_key(value) -> tuple:
    # Integers sort before symbols; mixed argument tuples stay comparable.
    if isinstance(value, int):
        return (0, "", value)
    return (1, value, 0)


@total_ordering
@dataclass(frozen=True)
class Atom:
    """A fully ground atom: predicate symbol plus constant arguments."""

    predicate: str
    args: tuple = ()

    def sort_key(self) -> tuple:
        # Atoms are iterated in sorted order all over; memoize the key.
        key = self.__dict__.get("_key")
        if key is None:
            key = (self.predicate, len(self.args), tuple(_arg_key(a) for a in self.args))
            object.__setattr__(self, "_key", key)
        return key

    def __hash__(self) -> int:
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.predicate, self.args))
            object.__setattr__(self, "_hash", h)
        return h

    def __lt__(self, other: "Atom") -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return format_atom(self)


def atom(predicate: str, *args) -> Atom:
    """Convenience constructor: ``atom("sp", "A1", 2)``."""
    return Atom(predicate, tuple(args))


@dataclass(frozen=True)
class Literal:
    """An atom or its negation-as-failure."""

    atom: Atom
    positive: bool = True

    def sort_key(self) -> tuple:
        return (self.atom.sort_key(), not self.positive)

    def __str__(self) -> str:
        return format_atom(self.atom) if self.positive else f"not {format_atom(self.atom)}"


@dataclass(frozen=True)
class Clause:
    """``head <- body``; an empty body makes the clause a fact.

    Body literals are deduplicated and canonically ordered on
    construction, so structurally equal clauses compare equal.
    """

    head: Atom
    body: tuple = ()

    def __post_init__(self):
        normalized = tuple(sorted(set(self.body), key=Literal.sort_key))
        object.__setattr__(self, "body", normalized)

    def __hash__(self) -> int:
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.head, self.body))
            object.__setattr__(self, "_hash", h)
        return h

    @property
    def is_fact(self) -> bool:
        return not self.body

    def atoms(self) -> Iterator[Atom]:
        yield self.head
        for lit in self.body:
            yield lit.atom

    def sort_key(self) -> tuple:
        return (self.head.sort_key(), tuple(l.sort_key() for l in self.body))

    def __str__(self) -> str:
        return format_clause(self)


@dataclass(frozen=True)
class GroundProgram:
    """A finite set of ground clauses over an explicit atom universe.

    The universe may be larger than the set of atoms mentioned in clauses:
    declared input/environment atoms belong to it even when no clause
    touches them.
    """

    clauses: frozenset = frozenset()
    universe: frozenset = frozenset()

    def __post_init__(self):
        mentioned = {a for c in self.clauses for a in c.atoms()}
        if not mentioned <= self.universe:
            missing = ", ".join(str(a) for a in sorted(mentioned - self.universe)[:5])
            raise ValueError(f"clause atoms outside universe: {missing}")

    @classmethod
    def of(cls, clauses: Iterable[Clause], extra_atoms: Iterable[Atom] = ()) -> "GroundProgram":
        clauses = frozenset(clauses)
        universe = {a for c in clauses for a in c.atoms()}
        universe.update(extra_atoms)
        return cls(clauses, frozenset(universe))

    def union(self, other: "GroundProgram") -> "GroundProgram":
        return GroundProgram(self.clauses | other.clauses, self.universe | other.universe)

    def with_facts(self, atoms: Iterable[Atom]) -> "GroundProgram":
        atoms = frozenset(atoms)
        facts = {Clause(a) for a in atoms}
        return GroundProgram(self.clauses | facts, self.universe | atoms)


# An interpretation is just a set of true atoms.
Interpretation = frozenset


def head_set(p: GroundProgram) -> frozenset:
    """The set of clause heads of ``p`` (memoized on the program)."""
    heads = p.__dict__.get("_heads")
    if heads is None:
        heads = frozenset(c.head for c in p.clauses)
        object.__setattr__(p, "_heads", heads)
    return heads


def gl_reduct(p: GroundProgram, s: Interpretation) -> GroundProgram:
    """The reduct of ``p`` relative to ``s``.

    Clauses with a negative body literal whose atom lies in ``s`` are
    dropped; the surviving clauses keep only their positive literals, so
    the result is negation-free.  The universe is unchanged.
    """
    kept = set()
    for c in p.clauses:
        if any((not l.positive) and l.atom in s for l in c.body):
            continue
        kept.add(Clause(c.head, tuple(l for l in c.body if l.positive)))
    return GroundProgram(frozenset(kept), p.universe)


def least_model(p: GroundProgram) -> Interpretation:
    """Least model of a negation-free program (iterated consequences)."""
    clauses = []
    for c in p.clauses:
        if any(not l.positive for l in c.body):
            raise ValueError(f"least_model requires a negation-free program, got: {c}")
        clauses.append(c)

    remaining = {}
    watchers = defaultdict(list)
    queue = deque()
    for i, c in enumerate(clauses):
        remaining[i] = len(c.body)
        if not c.body:
            queue.append(i)
        for lit in c.body:
            watchers[lit.atom].append(i)

    true: set = set()
    while queue:
        i = queue.popleft()
        head = clauses[i].head
        if head in true:
            continue
        true.add(head)
        for j in watchers[head]:
            remaining[j] -= 1
            if remaining[j] == 0:
                queue.append(j)
    return frozenset(true)


def is_stable_model(p: GroundProgram, s: Interpretation) -> bool:
    """True iff ``s`` equals the least model of the reduct of ``p`` by ``s``."""
    return least_model(gl_reduct(p, s)) == frozenset(s)


def stable_models_bruteforce(p: GroundProgram, cap: int = BRUTEFORCE_CAP):
    """All stable models of ``p`` by exhaustive enumeration.

    Serves as the slow, independent oracle for the acyclic fast path.
    Only subsets of the head set need checking: an atom no clause derives
    can never be in a stable model.  Refuses universes above ``cap``.
    """
    n = len(p.universe)
    if n > cap:
        raise ValueError(f"universe has {n} atoms, above the brute-force cap {cap}")

    heads = sorted(head_set(p))
    pos = {a: i for i, a in enumerate(heads)}

    compiled = []
    for c in p.clauses:
        dead = False
        pos_mask = 0
        neg_mask = 0
        for lit in c.body:
            i = pos.get(lit.atom)
            if lit.positive:
                if i is None:  # positive body atom nobody derives: clause never fires
                    dead = True
                    break
                pos_mask |= 1 << i
            elif i is not None:  # negation of an underivable atom always holds
                neg_mask |= 1 << i
        if not dead:
            compiled.append((1 << pos[c.head], pos_mask, neg_mask))

    models = []
    for mask in range(1 << len(heads)):
        m = 0
        changed = True
        while changed:
            changed = False
            for head_bit, pos_mask, neg_mask in compiled:
                if not m & head_bit and not neg_mask & mask and m & pos_mask == pos_mask:
                    m |= head_bit
                    changed = True
        if m == mask:
            models.append(frozenset(a for a in heads if mask >> pos[a] & 1))
    models.sort(key=lambda s: tuple(sorted(a.sort_key() for a in s)))
    return models


# ---------------------------------------------------------------------------
# Atom dependency graph


@dataclass(frozen=True)
class DependencyGraph:
    """Directed graph over atoms; an edge (a, b) means a clause for ``a``
    mentions ``b`` (positively or negatively) in its body."""

    nodes: frozenset = frozenset()
    edges: frozenset = frozenset()

    def successors(self) -> dict:
        adj = {a: [] for a in self.nodes}
        for a, b in self.edges:
            adj[a].append(b)
        return adj


def dependency_graph(p: GroundProgram) -> DependencyGraph:
    edges = set()
    for c in p.clauses:
        for lit in c.body:
            edges.add((c.head, lit.atom))
    return DependencyGraph(p.universe, frozenset(edges))


def is_acyclic(g: DependencyGraph) -> bool:
    """No directed cycle; on a finite graph this is "no infinite path"."""
    indegree = {a: 0 for a in g.nodes}
    adj = g.successors()
    for a, b in g.edges:
        indegree[b] += 1
    queue = deque(a for a, d in indegree.items() if d == 0)
    seen = 0
    while queue:
        a = queue.popleft()
        seen += 1
        for b in adj[a]:
            indegree[b] -= 1
            if indegree[b] == 0:
                queue.append(b)
    return seen == len(g.nodes)


def height(g: DependencyGraph, a: Atom):
    """Length of a longest path starting at ``a``; ``math.inf`` when a
    cycle is reachable from ``a``."""
    if a not in g.nodes:
        raise ValueError(f"unknown atom: {a}")
    adj = g.successors()
    NEW, ACTIVE, DONE = 0, 1, 2
    state = defaultdict(int)
    value: dict = {}
    stack = [(a, iter(adj[a]))]
    state[a] = ACTIVE
    while stack:
        node, it = stack[-1]
        advanced = False
        for child in it:
            if state[child] == ACTIVE:
                value[child] = math.inf  # back edge: a cycle is reachable
                continue
            if state[child] == NEW:
                state[child] = ACTIVE
                stack.append((child, iter(adj[child])))
                advanced = True
                break
        if not advanced:
            stack.pop()
            best = -1
            for child in adj[node]:
                h = value.get(child, math.inf if state[child] == ACTIVE else -1)
                if h == math.inf:
                    best = math.inf
                    break
                best = max(best, h)
            value[node] = math.inf if best == math.inf else best + 1
            state[node] = DONE
    return value[a]


def relevant_atoms(g: DependencyGraph, a: Atom) -> frozenset:
    """Atoms reachable from ``a`` by a nonempty path.

    ``a`` itself is included only when it lies on a cycle through ``a``.
    """
    if a not in g.nodes:
        raise ValueError(f"unknown atom: {a}")
    adj = g.successors()
    reached: set = set()
    frontier = deque(adj[a])
    while frontier:
        b = frontier.popleft()
        if b in reached:
            continue
        reached.add(b)
        frontier.extend(adj[b])
    return frozenset(reached)


# ---------------------------------------------------------------------------
# Fast path for acyclic programs

_PLAN_ATTR = "_acyclic_plan"


def _evaluation_plan(p: GroundProgram):
    """Reverse-topological evaluation plan, cached on the program object.

    Raises CyclicProgramError when the atom dependency graph has a cycle
    (cycles necessarily run through headed atoms, so the check is
    restricted to those).
    """
    plan = p.__dict__.get(_PLAN_ATTR)
    if plan is not None:
        return plan

    atoms = sorted(p.universe)
    index = {a: i for i, a in enumerate(atoms)}
    by_head: dict = defaultdict(list)
    for c in p.clauses:
        pos = tuple(index[l.atom] for l in c.body if l.positive)
        neg = tuple(index[l.atom] for l in c.body if not l.positive)
        by_head[index[c.head]].append((pos, neg))

    headed = set(by_head)
    deps: dict = {h: set() for h in headed}
    dependents: dict = defaultdict(list)
    for h, cs in by_head.items():
        for pos, neg in cs:
            for b in pos + neg:
                if b in headed and b != h and b not in deps[h]:
                    deps[h].add(b)
                    dependents[b].append(h)
        for pos, neg in cs:  # self-loop check (e.g. a <- not a)
            if h in pos or h in neg:
                raise CyclicProgramError(f"cycle through {atoms[h]}")

    pending = {h: len(d) for h, d in deps.items()}
    order = deque(h for h, n in pending.items() if n == 0)
    sequence = []
    while order:
        h = order.popleft()
        sequence.append(h)
        for d in dependents[h]:
            pending[d] -= 1
            if pending[d] == 0:
                order.append(d)
    if len(sequence) != len(headed):
        cyclic = sorted(atoms[h] for h, n in pending.items() if n > 0)[:3]
        raise CyclicProgramError("cycle through " + ", ".join(map(str, cyclic)))

    plan = (
        tuple(atoms),
        index,
        tuple(sequence),
        {h: tuple(cs) for h, cs in by_head.items()},
        frozenset(atoms[h] for h in headed),
    )
    object.__setattr__(p, _PLAN_ATTR, plan)
    return plan


def stable_model_acyclic(p: GroundProgram, facts: Interpretation = frozenset()) -> Interpretation:
    """The unique stable model of an acyclic program, in one pass.

    ``facts`` are extra atoms taken as unconditionally true (sensed or
    received inputs); none of them may head a clause of ``p``.  The
    result is the stable model of ``p`` extended with those facts.
    """
    atoms, index, sequence, by_head, headed = _evaluation_plan(p)
    clash = facts & headed
    if clash:
        raise ValueError(f"fact atoms may not head clauses: {sorted(clash)[:3]}")

    truth = bytearray(len(atoms))
    for f in facts:
        i = index.get(f)
        if i is not None:
            truth[i] = 1
    for h in sequence:
        for pos, neg in by_head[h]:
            if all(truth[i] for i in pos) and not any(truth[i] for i in neg):
                truth[h] = 1
                break
    model = set(facts)
    model.update(a for a, t in zip(atoms, truth) if t)
    return frozenset(model)


# ---------------------------------------------------------------------------
# Text form: one clause per line, `head :- lit1, not lit2.`

_NAME = r"[A-Za-z_]\w*"
_ATOM_RE = re.compile(rf"({_NAME})\s*(?:\(\s*([^()]*?)\s*\))?$")
_INT_RE = re.compile(r"-?\d+$")


def split_top_level(text: str, sep: str = ",") -> list:
    """Split on ``sep`` occurrences outside parentheses."""
    parts = []
    depth = 0
    current = []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    parts.append("".join(current))
    return parts


def format_atom(a: Atom) -> str:
    if not a.args:
        return a.predicate
    return f"{a.predicate}({','.join(str(v) for v in a.args)})"


def parse_atom(text: str) -> Atom:
    m = _ATOM_RE.match(text.strip())
    if not m:
        raise ValueError(f"malformed atom: {text!r}")
    name, arglist = m.groups()
    if arglist is None:
        return Atom(name)
    args = []
    for raw in arglist.split(","):
        raw = raw.strip()
        if _INT_RE.match(raw):
            args.append(int(raw))
        elif re.fullmatch(_NAME, raw):
            args.append(raw)
        else:
            raise ValueError(f"malformed atom argument {raw!r} in {text!r}")
    return Atom(name, tuple(args))


def format_clause(c: Clause) -> str:
    if c.is_fact:
        return f"{format_atom(c.head)}."
    body = ", ".join(str(l) for l in c.body)
    return f"{format_atom(c.head)} :- {body}."


def parse_clause(text: str) -> Clause:
    text = text.strip()
    if not text.endswith("."):
        raise ValueError(f"clause must end with '.': {text!r}")
    text = text[:-1]
    if ":-" in text:
        head_text, body_text = text.split(":-", 1)
        body = []
        for item in split_top_level(body_text):
            item = item.strip()
            if item.startswith("not ") or item.startswith("not("):
                body.append(Literal(parse_atom(item[3:].strip()), positive=False))
            else:
                body.append(Literal(parse_atom(item)))
        return Clause(parse_atom(head_text), tuple(body))
    return Clause(parse_atom(text))


def program_to_text(p: GroundProgram) -> str:
    """Serialize; `#external` lines declare universe atoms no clause uses."""
    lines = [format_clause(c) for c in sorted(p.clauses, key=Clause.sort_key)]
    mentioned = {a for c in p.clauses for a in c.atoms()}
    for a in sorted(p.universe - mentioned):
        lines.append(f"#external {format_atom(a)}.")
    return "\n".join(lines) + ("\n" if lines else "")


def program_from_text(text: str) -> GroundProgram:
    clauses = []
    externals = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("#external"):
                body = line[len("#external"):].strip()
                if not body.endswith("."):
                    raise ValueError("missing '.' terminator")
                externals.append(parse_atom(body[:-1]))
            else:
                clauses.append(parse_clause(line))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return GroundProgram.of(clauses, externals)
