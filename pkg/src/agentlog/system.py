"""Multiagent system assembly, the superagent reference, and classification.

The superagent is the idealized single agent holding every rule base and
sensing everything; its stable model in a given environment is the
correctness reference against which runs are judged.  The I/O graph is
the superagent's atom dependency graph restricted to atoms relevant to
some input atom; its acyclicity and (empirical) finiteness are the
hypotheses of the stabilization guarantees.
"""

from __future__ import annotations

from dataclasses import dataclass

from .agents import AgentSpec, validate_agent
from .logic import (
    CyclicProgramError,
    DependencyGraph,
    GroundProgram,
    dependency_graph,
    head_set,
    is_acyclic,
    least_model,
    stable_model_acyclic,
    stable_models_bruteforce,
)

__all__ = [
    "MultiAgentSystem",
    "SuperAgent",
    "Classification",
    "ValidationError",
    "NoUniqueModelError",
    "build_system",
    "system_violations",
    "superagent",
    "superagent_model",
    "io_graph",
    "classify",
]


class ValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NoUniqueModelError(ValueError):
    """The combined program gives no unique-model guarantee."""


class MultiAgentSystem:
    """A validated collection of agents plus derived lookup tables."""

    def __init__(self, agents, dmax=None):
        self.agents = tuple(agents)
        self.dmax = dmax
        self.ids = tuple(a.id for a in self.agents)
        self._index = {a.id: i for i, a in enumerate(self.agents)}
        self.env_atoms = frozenset().union(*(a.hbe for a in self.agents)) if self.agents else frozenset()
        self._hb = {a.id: a.hb for a in self.agents}
        from .agents import dependency

        self._deps = {}
        for recv in self.agents:
            for sender in self.agents:
                if recv.id == sender.id:
                    continue
                d = dependency(recv, sender)
                if d:
                    self._deps[(recv.id, sender.id)] = d
        # Canonical fair order: by receiver id, then sender id.
        self.dependent_pairs = tuple(sorted(self._deps))

    def index(self, agent_id: str) -> int:
        return self._index[agent_id]

    def agent(self, agent_id: str) -> AgentSpec:
        return self.agents[self._index[agent_id]]

    def hb(self, agent_id: str) -> frozenset:
        return self._hb[agent_id]

    def dependency(self, receiver_id: str, sender_id: str) -> frozenset:
        return self._deps.get((receiver_id, sender_id), frozenset())

    def __eq__(self, other):
        return (
            isinstance(other, MultiAgentSystem)
            and self.agents == other.agents
            and self.dmax == other.dmax
        )

    def __hash__(self):
        return hash((self.agents, self.dmax))


def system_violations(specs) -> list:
    """Every agent-level and system-level invariant breach, exhaustively."""
    specs = tuple(specs)
    violations = []
    seen = set()
    for a in specs:
        if a.id in seen:
            violations.append(f"duplicate agent id: {a.id}")
        seen.add(a.id)
        violations.extend(validate_agent(a))

    definitions = {}
    for a in specs:
        by_head = {}
        for c in a.idb.clauses:
            by_head.setdefault(c.head, set()).add(c)
        for h, cs in by_head.items():
            if h in definitions and definitions[h][1] != cs:
                violations.append(
                    f"atom {h} has different definitions in {definitions[h][0]} and {a.id}"
                )
            else:
                definitions.setdefault(h, (a.id, cs))

    producible = frozenset().union(
        *(head_set(a.idb) | a.hbe for a in specs)
    ) if specs else frozenset()
    for a in specs:
        uncovered = a.hin - producible
        if uncovered:
            listed = ", ".join(str(x) for x in sorted(uncovered)[:4])
            violations.append(f"agent {a.id}: no producer for input atoms: {listed}")

    env = frozenset().union(*(a.hbe for a in specs)) if specs else frozenset()
    for a in specs:
        headed_env = env & head_set(a.idb)
        if headed_env:
            listed = ", ".join(str(x) for x in sorted(headed_env)[:4])
            violations.append(f"agent {a.id}: environment atoms appear as heads: {listed}")
    return violations


def build_system(specs, dmax=None) -> MultiAgentSystem:
    """Assemble and validate; raises ValidationError listing all breaches."""
    specs = tuple(specs)
    violations = system_violations(specs)
    if violations:
        raise ValidationError(violations)
    return MultiAgentSystem(specs, dmax=dmax)


@dataclass(frozen=True)
class SuperAgent:
    """Union rule base plus the union of the initial sensed facts."""

    idb_all: GroundProgram
    initial_edb: frozenset


def superagent(sys: MultiAgentSystem) -> SuperAgent:
    program = GroundProgram.of(frozenset())
    for a in sys.agents:
        program = program.union(a.idb)
    extras = sys.env_atoms | frozenset().union(*(a.hin for a in sys.agents)) if sys.agents else frozenset()
    program = GroundProgram(program.clauses, program.universe | extras)
    initial = frozenset().union(*(a.initial.edb for a in sys.agents)) if sys.agents else frozenset()
    return SuperAgent(program, initial)


def superagent_model(sa: SuperAgent, stabilized_edb: frozenset, cap: int = 20) -> frozenset:
    """The reference model: stable model of ``IDB_all + EDB``.

    Acyclic programs are evaluated directly.  A cyclic but negation-free
    program still has a unique stable model (its least model).  Otherwise
    brute force is attempted below ``cap`` atoms; several or zero models
    raise NoUniqueModelError.
    """
    try:
        return stable_model_acyclic(sa.idb_all, facts=stabilized_edb)
    except CyclicProgramError:
        pass
    combined = sa.idb_all.with_facts(stabilized_edb)
    if all(l.positive for c in combined.clauses for l in c.body):
        return least_model(combined)
    if len(combined.universe) <= cap:
        models = stable_models_bruteforce(combined, cap=cap)
        if len(models) == 1:
            return models[0]
        raise NoUniqueModelError(
            f"cyclic program has {len(models)} stable models in this environment"
        )
    raise NoUniqueModelError(
        "cyclic program with negation is too large for the brute-force fallback"
    )


def io_graph(sys: MultiAgentSystem) -> DependencyGraph:
    """Dependency graph of the union rule base, restricted to atoms
    relevant to some input atom.  Input atoms themselves stay in."""
    sa = superagent(sys)
    g = dependency_graph(sa.idb_all)
    inputs = frozenset().union(*(a.hin for a in sys.agents)) if sys.agents else frozenset()
    adj = g.successors()
    keep = set(inputs & g.nodes)
    frontier = list(keep)
    while frontier:
        a = frontier.pop()
        for b in adj.get(a, ()):
            if b not in keep:
                keep.add(b)
                frontier.append(b)
    edges = frozenset((a, b) for a, b in g.edges if a in keep and b in keep)
    return DependencyGraph(frozenset(keep), edges)


@dataclass(frozen=True)
class Classification:
    """IO-acyclicity and friends, as measured on this grounding.

    ``bounded`` is per-atom definition finiteness, vacuously true on a
    ground slice.  ``io_finite`` is empirical: when a regrounding probe is
    available, the I/O graph is grounded again at ``dmax + probe_delta``
    and growth counts as not IO-finite.
    """

    io_acyclic: bool
    bounded: bool
    io_finite: bool
    idb_acyclic: bool
    io_nodes: int
    dmax: object = None
    probed: bool = False
    probe_sizes: tuple = ()
    probe_delta: int = 0


def classify(sys: MultiAgentSystem, reground=None, probe_delta: int = 2) -> Classification:
    """Classify a system; ``reground(dmax)`` rebuilds it at another bound.

    Raises RuntimeError if the measurement ever contradicts the
    io-acyclic => idb-acyclic implication, which would be a bug.
    """
    g_io = io_graph(sys)
    io_acyclic = is_acyclic(g_io)
    idb_acyclic = is_acyclic(dependency_graph(superagent(sys).idb_all))
    if io_acyclic and not idb_acyclic:
        raise RuntimeError("internal error: IO-acyclic system with cyclic union IDB")

    probed = False
    probe_sizes = ()
    io_finite = True
    if reground is not None:
        if sys.dmax is None:
            raise ValueError("io-finiteness probe needs the system's dmax")
        bigger = reground(sys.dmax + probe_delta)
        probe_sizes = (len(g_io.nodes), len(io_graph(bigger).nodes))
        io_finite = probe_sizes[0] == probe_sizes[1]
        probed = True

    return Classification(
        io_acyclic=io_acyclic,
        bounded=True,
        io_finite=io_finite,
        idb_acyclic=idb_acyclic,
        io_nodes=len(g_io.nodes),
        dmax=sys.dmax,
        probed=probed,
        probe_sizes=probe_sizes,
        probe_delta=probe_delta if probed else 0,
    )
