"""Scenario definition format, built-in scenarios, and routing helpers.

A scenario file has three section kinds::

    % comment
    [domain]
    nodes: A1 A2 A3
    dmax: 6
    var node: X Y
    var int: D D2
    symmetric: link
    output: sp

    [agent A1]
    idb:
      sp(A1,A1,0).
      spt(A1,Y,X,D+1) :- link(A1,X), sp(X,Y,D), not spl(A1,Y,D+1).
    hbe: link(A1,A2)
    hin: sp(A2,Y,D) where Y != A1
    edb: link(A1,A2)
    in:

    [events]
    max_rounds: 8
    track: sp(A1,A5,D)
    send A2 -> A1.
    fail link(A1,A2).
    @round 1: fail link(A1,A2)

Keys start at column zero; indented lines continue the current key.
``hbe``/``hin``/``edb``/``in`` take ``;``-separated patterns (ground
atoms are patterns without variables).  Plain ``send``/``fail``/
``restore`` lines form the explicit replay script; ``@round N:``
directives schedule environment changes between fair rounds.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from importlib import resources

from .agents import AgentSpec, AgentState, EnvChange
from .grounding import (
    DomainSpec,
    GroundingError,
    Pattern,
    Var,
    expand_pattern,
    ground_program,
    parse_ground_atom,
    parse_pattern,
    parse_schematic_clause,
)
from .logic import split_top_level
from .runtime import CommEvent, EnvEvent
from .system import MultiAgentSystem, build_system

__all__ = [
    "ScenarioError",
    "AgentDef",
    "Scenario",
    "Topology",
    "parse_scenario",
    "serialize_scenario",
    "builtin_scenario",
    "builtin_names",
    "load_scenario",
    "routing_scenario_text",
    "routing_system",
    "chain_scenario",
    "chain_system",
    "output_projection",
    "bfs_oracle",
    "FIG1_TOPOLOGY",
    "family_of",
]


class ScenarioError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass(frozen=True)
class AgentDef:
    """One agent block, still schematic (pre-grounding)."""

    id: str
    idb: tuple = ()
    hbe: tuple = ()
    hin: tuple = ()
    edb0: tuple = ()
    in0: tuple = ()


@dataclass(frozen=True)
class Scenario:
    name: str = field(compare=False, default="<scenario>")
    domain: DomainSpec = field(default_factory=DomainSpec)
    agents: tuple = ()
    script: tuple = ()
    schedule: tuple = ()
    max_rounds: object = None
    track: tuple = ()
    output: object = None

    def build_system(self, dmax=None) -> MultiAgentSystem:
        dom = self.domain
        if dmax is not None:
            dom = DomainSpec(
                dom.node_constants, dmax, dom.node_vars, dom.int_vars, dom.symmetric
            )
        specs = []
        for ad in self.agents:
            hbe = frozenset().union(*(expand_pattern(p, dom) for p in ad.hbe)) if ad.hbe else frozenset()
            hin = frozenset().union(*(expand_pattern(p, dom) for p in ad.hin)) if ad.hin else frozenset()
            edb = frozenset().union(*(expand_pattern(p, dom) for p in ad.edb0)) if ad.edb0 else frozenset()
            indb = frozenset().union(*(expand_pattern(p, dom) for p in ad.in0)) if ad.in0 else frozenset()
            idb = ground_program(ad.idb, dom, extra_atoms=hbe | hin)
            specs.append(AgentSpec(ad.id, idb, hbe, hin, AgentState(edb, indb)))
        return build_system(specs, dmax=dom.distance_max)

    def families(self) -> tuple:
        return tuple(family_of(p) for p in self.track)

    def project(self, agent_id: str, model) -> frozenset:
        if self.output is None:
            raise ScenarioError(f"scenario {self.name} declares no output predicate")
        return output_projection(agent_id, model, self.output)


def family_of(p: Pattern) -> tuple:
    """Turn a one-integer-variable pattern into a probe family."""
    if p.constraints:
        raise ScenarioError(f"track pattern may not carry constraints: {p}")
    args = []
    open_slots = 0
    for t in p.atom.args:
        if isinstance(t, Var):
            args.append(None)
            open_slots += 1
        else:
            args.append(t)
    if open_slots != 1:
        raise ScenarioError(f"track pattern needs exactly one variable slot: {p}")
    return (p.atom.predicate, tuple(args))


# ---------------------------------------------------------------------------
# Parsing

_SECTION_RE = re.compile(r"\[\s*(domain|agent\s+(\w+)|events)\s*\]$")
_KEY_RE = re.compile(r"([a-z_][a-z_ ]*):(.*)$")
_SEND_RE = re.compile(r"send\s+(\w+)\s*->\s*(\w+)\s*\.?$")
_ENV_RE = re.compile(r"(fail|restore)\s+(.+?)\s*\.?$")
_AT_ROUND_RE = re.compile(r"@round\s+(\d+)\s*:\s*(.+)$")

_AGENT_KEYS = ("idb", "hbe", "hin", "edb", "in")
_DOMAIN_KEYS = ("nodes", "dmax", "var node", "var int", "symmetric", "output")


def _split_statements(text: str):
    for part in text.split("."):
        part = part.strip()
        if part:
            yield part + "."


def _split_items(text: str):
    for part in text.split(";"):
        part = part.strip()
        if part:
            yield part


def parse_scenario(text: str, name: str = "<scenario>", dmax=None) -> Scenario:
    """Parse scenario text; raises ScenarioError with the offending line."""
    sections = []  # (kind, agent_id, [(line_no, content)])
    current = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        m = _SECTION_RE.match(stripped)
        if m and not line[0].isspace():
            kind = "agent" if m.group(2) else m.group(1)
            current = (kind, m.group(2), [])
            sections.append(current)
            continue
        if current is None:
            raise ScenarioError(f"content before first section: {stripped!r}", line_no)
        current[2].append((line_no, line))

    if not any(kind == "domain" for kind, _, _ in sections):
        raise ScenarioError("missing [domain] section")
    if sections[0][0] != "domain":
        raise ScenarioError("[domain] must be the first section")
    if not any(kind == "agent" for kind, _, _ in sections):
        raise ScenarioError("no agents")

    dom = _parse_domain(sections[0][2], dmax)
    output = _domain_output(sections[0][2])

    agents = []
    script = []
    schedule = []
    max_rounds = None
    track = []
    agent_ids = []
    for kind, agent_id, lines in sections[1:]:
        if kind == "domain":
            raise ScenarioError("duplicate [domain] section", lines[0][0] if lines else None)
        if kind == "agent":
            agents.append(_parse_agent(agent_id, lines, dom))
            agent_ids.append(agent_id)
        else:
            max_rounds, extra_track = _parse_events(lines, dom, agent_ids, script, schedule)
            track.extend(extra_track)

    return Scenario(
        name=name,
        domain=dom,
        agents=tuple(agents),
        script=tuple(script),
        schedule=tuple(schedule),
        max_rounds=max_rounds,
        track=tuple(track),
        output=output,
    )


def _collect_keys(lines, allowed):
    """Fold `key: value` lines plus indented continuations into a dict."""
    values = {}
    key = None
    for line_no, line in lines:
        if line[0].isspace():
            if key is None:
                raise ScenarioError("continuation line without a key", line_no)
            values[key].append((line_no, line.strip()))
            continue
        m = _KEY_RE.match(line.strip())
        if not m or m.group(1).strip() not in allowed:
            raise ScenarioError(f"expected one of {allowed}, got {line.strip()!r}", line_no)
        key = m.group(1).strip()
        values.setdefault(key, [])
        rest = m.group(2).strip()
        if rest:
            values[key].append((line_no, rest))
    return values


def _parse_domain(lines, dmax_override):
    values = _collect_keys(lines, _DOMAIN_KEYS)

    def joined(key):
        return " ".join(v for _, v in values.get(key, []))

    nodes = tuple(t for t in re.split(r"[,\s]+", joined("nodes")) if t)
    raw_dmax = joined("dmax").strip()
    try:
        dmax = int(raw_dmax) if raw_dmax else 0
    except ValueError:
        raise ScenarioError(f"dmax must be an integer, got {raw_dmax!r}") from None
    if dmax_override is not None:
        dmax = dmax_override
    node_vars = frozenset(t for t in re.split(r"[,\s]+", joined("var node")) if t)
    int_vars = frozenset(t for t in re.split(r"[,\s]+", joined("var int")) if t)
    symmetric = frozenset(t for t in re.split(r"[,\s]+", joined("symmetric")) if t)
    try:
        return DomainSpec(nodes, dmax, node_vars, int_vars, symmetric)
    except GroundingError as exc:
        raise ScenarioError(str(exc)) from None


def _domain_output(lines):
    values = _collect_keys(lines, _DOMAIN_KEYS)
    out = " ".join(v for _, v in values.get("output", [])).strip()
    return out or None


def _parse_agent(agent_id, lines, dom):
    values = _collect_keys(lines, _AGENT_KEYS)

    def patterns(key):
        out = []
        for line_no, chunk in values.get(key, []):
            for item in _split_items(chunk):
                try:
                    out.append(parse_pattern(item, dom))
                except GroundingError as exc:
                    raise ScenarioError(str(exc), line_no) from None
        return tuple(out)

    clauses = []
    idb_text = " ".join(v for _, v in values.get("idb", []))
    first_line = values["idb"][0][0] if values.get("idb") else None
    for stmt in _split_statements(idb_text):
        try:
            clauses.append(parse_schematic_clause(stmt, dom))
        except GroundingError as exc:
            raise ScenarioError(f"agent {agent_id}: {exc}", first_line) from None

    return AgentDef(
        id=agent_id,
        idb=tuple(clauses),
        hbe=patterns("hbe"),
        hin=patterns("hin"),
        edb0=patterns("edb"),
        in0=patterns("in"),
    )


def _parse_env_atoms(text, dom, line_no):
    atoms = []
    for chunk in split_top_level(text):
        chunk = chunk.strip().rstrip(".")
        if not chunk:
            continue
        try:
            atoms.append(parse_ground_atom(chunk, dom))
        except GroundingError as exc:
            raise ScenarioError(str(exc), line_no) from None
    return frozenset(atoms)


def _parse_env_directive(text, dom, line_no) -> EnvChange:
    m = _ENV_RE.match(text.strip())
    if not m:
        raise ScenarioError(f"malformed environment directive: {text!r}", line_no)
    atoms = _parse_env_atoms(m.group(2), dom, line_no)
    if m.group(1) == "fail":
        return EnvChange(frozenset(), atoms)
    return EnvChange(atoms, frozenset())


def _parse_events(lines, dom, agent_ids, script, schedule):
    max_rounds = None
    track = []
    for line_no, line in lines:
        stripped = line.strip()
        m = _KEY_RE.match(stripped)
        if m and m.group(1).strip() in ("max_rounds", "track"):
            key, rest = m.group(1).strip(), m.group(2).strip()
            if key == "max_rounds":
                try:
                    max_rounds = int(rest)
                except ValueError:
                    raise ScenarioError(f"max_rounds must be an integer: {rest!r}", line_no) from None
            else:
                try:
                    track.append(parse_pattern(rest, dom))
                except GroundingError as exc:
                    raise ScenarioError(str(exc), line_no) from None
            continue
        m = _AT_ROUND_RE.match(stripped)
        if m:
            schedule.append((int(m.group(1)), _parse_env_directive(m.group(2), dom, line_no)))
            continue
        m = _SEND_RE.match(stripped)
        if m:
            sender, receiver = m.group(1), m.group(2)
            for who in (sender, receiver):
                if who not in agent_ids:
                    raise ScenarioError(f"unknown agent in send: {who}", line_no)
            script.append(CommEvent(sender, receiver))
            continue
        if stripped.startswith(("fail", "restore")):
            script.append(EnvEvent(_parse_env_directive(stripped, dom, line_no)))
            continue
        raise ScenarioError(f"malformed event line: {stripped!r}", line_no)
    return max_rounds, track


# ---------------------------------------------------------------------------
# Serialization (canonical form; parse(serialize(s)) == s)


def serialize_scenario(sc: Scenario) -> str:
    dom = sc.domain
    out = ["[domain]"]
    out.append("nodes: " + " ".join(dom.node_constants))
    out.append(f"dmax: {dom.distance_max}")
    if dom.node_vars:
        out.append("var node: " + " ".join(sorted(dom.node_vars)))
    if dom.int_vars:
        out.append("var int: " + " ".join(sorted(dom.int_vars)))
    if dom.symmetric:
        out.append("symmetric: " + " ".join(sorted(dom.symmetric)))
    if sc.output:
        out.append(f"output: {sc.output}")
    for ad in sc.agents:
        out.append("")
        out.append(f"[agent {ad.id}]")
        out.append("idb:")
        for c in ad.idb:
            out.append(f"  {c}")
        for key, pats in (("hbe", ad.hbe), ("hin", ad.hin), ("edb", ad.edb0), ("in", ad.in0)):
            out.append(f"{key}: " + "; ".join(str(p) for p in pats))
    if sc.script or sc.schedule or sc.max_rounds is not None or sc.track:
        out.append("")
        out.append("[events]")
        if sc.max_rounds is not None:
            out.append(f"max_rounds: {sc.max_rounds}")
        for p in sc.track:
            out.append(f"track: {p}")
        for ev in sc.script:
            if isinstance(ev, CommEvent):
                out.append(f"send {ev.sender} -> {ev.receiver}.")
            else:
                out.append(_env_line(ev.change) + ".")
        for round_no, change in sc.schedule:
            out.append(f"@round {round_no}: " + _env_line(change))
    return "\n".join(out) + "\n"


def _env_line(change: EnvChange) -> str:
    if change.became_false and not change.became_true:
        return "fail " + ", ".join(str(a) for a in sorted(change.became_false))
    if change.became_true and not change.became_false:
        return "restore " + ", ".join(str(a) for a in sorted(change.became_true))
    raise ScenarioError("mixed environment changes cannot be serialized on one line")


# ---------------------------------------------------------------------------
# Built-in scenarios


@dataclass(frozen=True)
class Topology:
    """Undirected network; edges are stored with endpoints in node order."""

    nodes: tuple
    edges: frozenset

    def __post_init__(self):
        order = {n: i for i, n in enumerate(self.nodes)}
        canon = set()
        for u, v in self.edges:
            if u == v:
                raise ScenarioError(f"self-loop on {u}")
            if u not in order or v not in order:
                raise ScenarioError(f"edge endpoint outside nodes: {(u, v)}")
            canon.add((u, v) if order[u] < order[v] else (v, u))
        object.__setattr__(self, "edges", frozenset(canon))

    def neighbors(self, node: str) -> tuple:
        order = {n: i for i, n in enumerate(self.nodes)}
        out = set()
        for u, v in self.edges:
            if u == node:
                out.add(v)
            elif v == node:
                out.add(u)
        return tuple(sorted(out, key=order.get))


FIG1_TOPOLOGY = Topology(
    nodes=("A1", "A2", "A3", "A4", "A5"),
    edges=frozenset(
        [("A1", "A2"), ("A1", "A4"), ("A2", "A3"), ("A2", "A5"), ("A3", "A5"), ("A4", "A5")]
    ),
)


def bfs_oracle(t: Topology, failed=()) -> dict:
    """All-pairs shortest hop counts on the surviving graph.

    ``failed`` lists edges (either orientation) to remove.  Unreachable
    pairs are absent from the result.
    """
    order = {n: i for i, n in enumerate(t.nodes)}
    down = {(u, v) if order[u] < order[v] else (v, u) for u, v in failed}
    adj = {n: [] for n in t.nodes}
    for u, v in t.edges - down:
        adj[u].append(v)
        adj[v].append(u)
    dist = {}
    for source in t.nodes:
        dist[(source, source)] = 0
        frontier = deque([source])
        while frontier:
            u = frontier.popleft()
            for v in adj[u]:
                if (source, v) not in dist:
                    dist[(source, v)] = dist[(source, u)] + 1
                    frontier.append(v)
    return dist


def routing_scenario_text(t: Topology, dmax: int = None) -> str:
    """Scenario text for the shortest-path agents on topology ``t``.

    Each node runs the same five clause schemas specialized to itself; it
    senses its incident links and hears neighbours' distance claims for
    every destination but itself.  The default bound, node count + 1,
    suffices for any convergent run; divergence studies pass a larger one
    so the count-to-infinity ramp is observable before the cap truncates
    it.
    """
    if dmax is None:
        dmax = len(t.nodes) + 1
    if dmax < 1:
        raise ScenarioError("routing needs dmax >= 1")
    lines = ["[domain]"]
    lines.append("nodes: " + " ".join(t.nodes))
    lines.append(f"dmax: {dmax}")
    lines.append("var node: X Y")
    lines.append("var int: D D2")
    lines.append("symmetric: link")
    lines.append("output: sp")
    for node in t.nodes:
        incident = "; ".join(f"link({min(node, nb, key=t.nodes.index)},{max(node, nb, key=t.nodes.index)})" for nb in t.neighbors(node))
        lines.append("")
        lines.append(f"[agent {node}]")
        lines.append("idb:")
        lines.append(f"  sp({node},{node},0).")
        lines.append(f"  sp({node},Y,D) :- spt({node},Y,X,D).")
        lines.append(f"  spt({node},Y,X,D+1) :- link({node},X), sp(X,Y,D), not spl({node},Y,D+1).")
        lines.append(f"  spl({node},{node},D+1).")
        lines.append(f"  spl({node},Y,D+1) :- link({node},X), sp(X,Y,D2), D2 < D.")
        lines.append("hbe: " + incident)
        lines.append(
            "hin: " + "; ".join(f"sp({nb},Y,D) where Y != {node}" for nb in t.neighbors(node))
        )
        lines.append("edb: " + incident)
        lines.append("in:")
    return "\n".join(lines) + "\n"


def routing_system(t: Topology, dmax: int = None) -> MultiAgentSystem:
    """One shortest-path agent per node, grounded at ``dmax``
    (default: node count + 1)."""
    return parse_scenario(routing_scenario_text(t, dmax), name="routing").build_system()


def chain_scenario(n: int) -> Scenario:
    """The two-agent chain whose fixpoint distance grows with ``n``:
    one agent derives ``q`` from any missing ``r(x)``, the other feeds it
    ``r`` values one exchange at a time."""
    if n < 0:
        raise ScenarioError("chain bound must be >= 0")
    text = f"""\
[domain]
nodes:
dmax: {n}
var int: X

[agent A1]
idb:
  q :- not r(X).
  s(X) :- r(X).
hbe:
hin: r(X)
edb:
in:

[agent A2]
idb:
  r(X+1) :- s(X).
  r(0).
hbe:
hin: s(X)
edb:
in:
"""
    return parse_scenario(text, name=f"chain({n})")


def chain_system(n: int) -> MultiAgentSystem:
    return chain_scenario(n).build_system()


def output_projection(agent_id: str, model, predicate: str) -> frozenset:
    """The agent's outgoing claims: atoms of the output predicate whose
    first argument is the agent itself."""
    return frozenset(
        a for a in model if a.predicate == predicate and a.args and a.args[0] == agent_id
    )


# ---------------------------------------------------------------------------
# Built-in lookup

_CHAIN_RE = re.compile(r"chain\((\d+)\)$")
_FILE_BUILTINS = ("example3", "routing5", "routing5-example6-script")


def builtin_names() -> tuple:
    return _FILE_BUILTINS + ("chain(N)",)


def builtin_scenario(name: str, dmax=None) -> Scenario:
    m = _CHAIN_RE.match(name.strip())
    if m:
        return chain_scenario(int(m.group(1)) if dmax is None else dmax)
    if name in _FILE_BUILTINS:
        text = resources.files("agentlog").joinpath("data", f"{name}.scenario").read_text()
        return parse_scenario(text, name=name, dmax=dmax)
    raise ScenarioError(f"unknown builtin scenario: {name!r} (have {', '.join(builtin_names())})")


def load_scenario(ref: str, dmax=None) -> Scenario:
    """Load a scenario by builtin name or by file path."""
    import os

    if _CHAIN_RE.match(ref.strip()) or ref in _FILE_BUILTINS:
        return builtin_scenario(ref, dmax=dmax)
    if os.path.exists(ref):
        with open(ref, encoding="utf-8") as fh:
            return parse_scenario(fh.read(), name=os.path.basename(ref), dmax=dmax)
    raise ScenarioError(f"no such scenario or file: {ref!r}")
