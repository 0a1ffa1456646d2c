"""Run execution: transitions, schedules, fixpoints, verdicts, traces.

A run of the underlying model is an infinite sequence of transitions
with fair communication and an eventually quiescent environment.  Here a
run is represented by a finite prefix plus a fixpoint certificate: once a
full communication round under a quiescent environment changes no state
at any step, determinism guarantees every continuation repeats the state,
which makes the point-h-onwards definitions decidable.

A single run executes sequentially and deterministically; distinct runs
share no mutable state and may execute concurrently.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .agents import AgentState, EnvChange, agent_model, message_payload, update_env, update_input
from .logic import parse_atom
from .system import MultiAgentSystem, NoUniqueModelError, superagent, superagent_model

__all__ = [
    "EnvEvent",
    "CommEvent",
    "GlobalState",
    "RoundRecord",
    "Trace",
    "Verdict",
    "DivergenceReport",
    "InvalidEventError",
    "initial_state",
    "env_transition",
    "comm_transition",
    "run_scripted",
    "run_fair",
    "detect_fixpoint",
    "rounds_to_fixpoint",
    "rounds_after_quiescence_to_fixpoint",
    "convergence_model",
    "non_convergent_atoms",
    "stabilized_environment",
    "verdict",
    "divergence_probe",
    "export_trace",
    "events_from_export",
    "default_max_rounds",
]


class InvalidEventError(ValueError):
    pass


@dataclass(frozen=True)
class EnvEvent:
    change: EnvChange


@dataclass(frozen=True)
class CommEvent:
    sender: str
    receiver: str


@dataclass(frozen=True)
class GlobalState:
    """One agent state per system agent, in system order."""

    agent_states: tuple

    def state_of(self, sys: MultiAgentSystem, agent_id: str) -> AgentState:
        return self.agent_states[sys.index(agent_id)]


@dataclass(frozen=True)
class RoundRecord:
    """One fair communication round: which trace slice it spans and
    whether any single event in it changed some agent state."""

    number: int
    start: int
    end: int
    changed: bool


@dataclass(frozen=True)
class Trace:
    """A recorded run prefix.

    ``states[k+1]`` is ``events[k]`` applied to ``states[k]``; ``models``
    holds every agent's stable model at every point.  ``quiescence_point``
    is the first point from which the environment never changes again
    (None when scheduled changes were still pending at the horizon).
    """

    agent_ids: tuple
    states: tuple
    events: tuple
    models: tuple
    quiescence_point: object = 0
    rounds: tuple = ()
    horizon_exceeded: bool = False

    def model_of(self, agent_idx: int, point: int) -> frozenset:
        return self.models[point][agent_idx]


def initial_state(sys: MultiAgentSystem) -> GlobalState:
    return GlobalState(tuple(a.initial for a in sys.agents))


def _models_row(sys: MultiAgentSystem, gs: GlobalState) -> tuple:
    return tuple(agent_model(a, s) for a, s in zip(sys.agents, gs.agent_states))


def env_transition(sys: MultiAgentSystem, gs: GlobalState, change: EnvChange) -> GlobalState:
    """Every agent sensing part of the change updates its EDB; the rest
    keep their state untouched (inputs never move here)."""
    outside = change.touched - sys.env_atoms
    if outside:
        listed = ", ".join(str(a) for a in sorted(outside)[:4])
        raise InvalidEventError(f"environment change touches non-environment atoms: {listed}")
    new_states = []
    for a, s in zip(sys.agents, gs.agent_states):
        if a.hbe & change.touched:
            new_states.append(AgentState(update_env(s.edb, change, a.hbe), s.indb))
        else:
            new_states.append(s)
    return GlobalState(tuple(new_states))


def comm_transition(
    sys: MultiAgentSystem,
    gs: GlobalState,
    sender: str,
    receiver: str,
    sender_model: frozenset = None,
) -> GlobalState:
    """The sender pushes its dependency slice, computed from its current
    state, and the receiver replaces that slice of its input database."""
    dep = sys.dependency(receiver, sender)
    if not dep:
        raise InvalidEventError(f"{receiver} does not depend on {sender}")
    if sender_model is None:
        sender_model = agent_model(sys.agent(sender), gs.state_of(sys, sender))
    payload = message_payload(sender_model, dep)
    r_idx = sys.index(receiver)
    old = gs.agent_states[r_idx]
    new_in = update_input(old.indb, dep, payload)
    if new_in == old.indb:
        return gs
    states = list(gs.agent_states)
    states[r_idx] = AgentState(old.edb, new_in)
    return GlobalState(tuple(states))


class _Recorder:
    """Accumulates states, events and per-point models incrementally;
    only agents touched by an event get their model recomputed."""

    def __init__(self, sys: MultiAgentSystem, start: GlobalState):
        self.sys = sys
        self.states = [start]
        self.events = []
        self.models = [_models_row(sys, start)]
        self.last_env_index = None

    @property
    def point(self) -> int:
        return len(self.states) - 1

    def current(self) -> GlobalState:
        return self.states[-1]

    def current_models(self) -> tuple:
        return self.models[-1]

    def apply_env(self, change: EnvChange):
        gs = self.current()
        nxt = env_transition(self.sys, gs, change)
        row = list(self.models[-1])
        for i, (a, before, after) in enumerate(
            zip(self.sys.agents, gs.agent_states, nxt.agent_states)
        ):
            if before != after:
                row[i] = agent_model(a, after)
        self.events.append(EnvEvent(change))
        self.last_env_index = len(self.events) - 1
        self.states.append(nxt)
        self.models.append(tuple(row))

    def apply_comm(self, sender: str, receiver: str) -> bool:
        gs = self.current()
        s_idx = self.sys.index(sender)
        nxt = comm_transition(self.sys, gs, sender, receiver, sender_model=self.models[-1][s_idx])
        changed = nxt != gs
        row = self.models[-1]
        if changed:
            r_idx = self.sys.index(receiver)
            row = list(row)
            row[r_idx] = agent_model(self.sys.agents[r_idx], nxt.agent_states[r_idx])
            row = tuple(row)
        self.events.append(CommEvent(sender, receiver))
        self.states.append(nxt)
        self.models.append(row)
        return changed

    def apply(self, event):
        if isinstance(event, EnvEvent):
            self.apply_env(event.change)
        elif isinstance(event, CommEvent):
            self.apply_comm(event.sender, event.receiver)
        else:
            raise InvalidEventError(f"unknown event: {event!r}")

    def quiescence_point(self, pending_env: bool):
        if pending_env:
            return None
        return 0 if self.last_env_index is None else self.last_env_index + 1

    def freeze(self, rounds=(), horizon_exceeded=False, pending_env=False) -> Trace:
        return Trace(
            agent_ids=self.sys.ids,
            states=tuple(self.states),
            events=tuple(self.events),
            models=tuple(self.models),
            quiescence_point=self.quiescence_point(pending_env),
            rounds=tuple(rounds),
            horizon_exceeded=horizon_exceeded,
        )


def run_scripted(sys: MultiAgentSystem, script, start: GlobalState = None) -> Trace:
    """Fold an explicit event sequence over the initial state."""
    rec = _Recorder(sys, start or initial_state(sys))
    for i, event in enumerate(script):
        try:
            rec.apply(event)
        except (InvalidEventError, ValueError) as exc:
            raise InvalidEventError(f"event {i}: {exc}") from None
    return rec.freeze()


def default_max_rounds(sys: MultiAgentSystem) -> int:
    from .system import io_graph

    return 4 * len(io_graph(sys).nodes) + 16


def _round_order(sys: MultiAgentSystem, policy: str, rng):
    pairs = [(s, r) for (r, s) in sys.dependent_pairs]  # stored as (receiver, sender)
    if policy == "shuffled":
        rng.shuffle(pairs)
    elif policy != "round-robin":
        raise ValueError(f"unknown policy: {policy}")
    return pairs


def run_fair(
    sys: MultiAgentSystem,
    env_schedule=(),
    max_rounds: int = None,
    policy: str = "round-robin",
    seed: int = 0,
    prefix_events=(),
) -> Trace:
    """Interleave timed environment changes with communication rounds.

    Each round fires every dependent pair exactly once (canonical order:
    receiver id, then sender id; the shuffled policy reorders per round
    under ``seed``), which satisfies fairness for any finite prefix.
    ``env_schedule`` is a finite set of ``(after_round, change)`` entries;
    ``after_round=0`` fires before the first round.  The run stops early
    at the first round in which no event changed any state while the
    environment is quiescent, or at ``max_rounds``.
    """
    if max_rounds is None:
        max_rounds = default_max_rounds(sys)
    rng = random.Random(seed)
    rec = _Recorder(sys, initial_state(sys))
    for i, event in enumerate(prefix_events):
        try:
            rec.apply(event)
        except (InvalidEventError, ValueError) as exc:
            raise InvalidEventError(f"prefix event {i}: {exc}") from None

    schedule = sorted(env_schedule, key=lambda e: e[0])
    pending = list(schedule)

    def fire_due(round_no: int):
        while pending and pending[0][0] <= round_no:
            _, change = pending.pop(0)
            rec.apply_env(change)

    fire_due(0)
    rounds = []
    certified = False
    for number in range(1, max_rounds + 1):
        start = rec.point
        changed = False
        for sender, receiver in _round_order(sys, policy, rng):
            if rec.apply_comm(sender, receiver):
                changed = True
        rounds.append(RoundRecord(number, start, rec.point, changed))
        if not changed and not pending:
            certified = True
            break
        fire_due(number)
    return rec.freeze(
        rounds=rounds,
        horizon_exceeded=not certified,
        pending_env=bool(pending),
    )


def detect_fixpoint(trace: Trace):
    """First point from which the run provably repeats forever.

    That is the start of the first round that (a) begins at or after the
    quiescence point and (b) changed no agent state at any of its events;
    determinism then pins every continuation.  None when the trace holds
    no such certificate.
    """
    if trace.quiescence_point is None:
        return None
    for r in trace.rounds:
        if not r.changed and r.start >= trace.quiescence_point:
            return r.start
    return None


def _certifying_round(trace: Trace):
    if trace.quiescence_point is None:
        return None
    for r in trace.rounds:
        if not r.changed and r.start >= trace.quiescence_point:
            return r
    return None


def rounds_to_fixpoint(trace: Trace):
    """Number of state-changing rounds before the fixpoint certificate."""
    cert = _certifying_round(trace)
    if cert is None:
        return None
    return sum(1 for r in trace.rounds if r.number < cert.number and r.changed)


def rounds_after_quiescence_to_fixpoint(trace: Trace):
    """State-changing rounds between environment quiescence and fixpoint."""
    cert = _certifying_round(trace)
    if cert is None:
        return None
    return sum(
        1
        for r in trace.rounds
        if r.number < cert.number and r.changed and r.start >= trace.quiescence_point
    )


def convergence_model(sys: MultiAgentSystem, trace: Trace, fixpoint: int) -> frozenset:
    """Atoms true, at the fixpoint, in the model of every agent whose
    atom base contains them."""
    if fixpoint is None:
        raise ValueError("no fixpoint: convergence model undefined")
    row = trace.models[fixpoint]
    conv = set()
    universe = frozenset().union(*(sys.hb(i) for i in sys.ids)) if sys.agents else frozenset()
    for a in universe:
        holders = [idx for idx, aid in enumerate(sys.ids) if a in sys.hb(aid)]
        if holders and all(a in row[idx] for idx in holders):
            conv.add(a)
    return frozenset(conv)


def non_convergent_atoms(sys: MultiAgentSystem, trace: Trace, fixpoint: int) -> frozenset:
    """Atoms on which agents still disagree at the fixpoint; the run is
    convergent for neither truth value on these."""
    row = trace.models[fixpoint]
    out = set()
    universe = frozenset().union(*(sys.hb(i) for i in sys.ids)) if sys.agents else frozenset()
    for a in universe:
        holders = [idx for idx, aid in enumerate(sys.ids) if a in sys.hb(aid)]
        values = {a in row[idx] for idx in holders}
        if len(values) == 2:
            out.add(a)
    return frozenset(out)


def stabilized_environment(trace: Trace) -> frozenset:
    """Union of all agents' EDBs at the quiescence point."""
    if trace.quiescence_point is None:
        raise ValueError("environment never quiesced within the trace")
    gs = trace.states[trace.quiescence_point]
    return frozenset().union(*(s.edb for s in gs.agent_states)) if gs.agent_states else frozenset()


@dataclass(frozen=True)
class DivergenceReport:
    """Evidence of a monotone ramp in one tracked integer family."""

    family: str
    hits: tuple  # (agent_id, observed strictly increasing values)


def divergence_probe(trace: Trace, family, min_streak: int = 3):
    """Watch the integer slot of a one-slot atom family across the run.

    ``family`` is ``(predicate, args)`` with exactly one ``None`` marking
    the integer slot.  For each agent the per-point values are collapsed
    to their changes; ``min_streak`` consecutive strict increases count
    as divergence.  A point where several family atoms occur in one model
    is ambiguous and rejected.
    """
    predicate, args = family
    slots = [i for i, v in enumerate(args) if v is None]
    if len(slots) != 1:
        raise ValueError("family must have exactly one open integer slot")
    slot = slots[0]

    def match(m):
        found = [
            a.args[slot]
            for a in m
            if a.predicate == predicate
            and len(a.args) == len(args)
            and all(v is None or a.args[i] == v for i, v in enumerate(args))
        ]
        if len(found) > 1:
            raise ValueError(
                f"ambiguous family {_family_text(family)}: {sorted(found)} at one point"
            )
        return found[0] if found else None

    hits = []
    for idx, agent_id in enumerate(trace.agent_ids):
        last = None
        streak = 0
        ramp = []
        best = ()
        for point in range(len(trace.states)):
            value = match(trace.models[point][idx])
            if value is None:
                last, streak, ramp = None, 0, []
                continue
            if last is None:
                last, streak, ramp = value, 0, [value]
                continue
            if value == last:
                continue
            if value > last:
                streak += 1
                ramp.append(value)
            else:
                streak, ramp = 0, [value]
            last = value
            if streak >= min_streak and len(ramp) > len(best):
                best = tuple(ramp)
        if best:
            hits.append((agent_id, best))
    if not hits:
        return None
    return DivergenceReport(_family_text(family), tuple(hits))


def _family_text(family) -> str:
    predicate, args = family
    rendered = ",".join("*" if v is None else str(v) for v in args)
    return f"{predicate}({rendered})" if args else predicate


@dataclass(frozen=True)
class Verdict:
    """What one recorded run witnesses about stabilization.

    A single run can refute weak stabilization (models differ) or support
    it (they match); it never proves it over all runs.
    """

    fixpoint_point: object
    strongly_convergent: bool
    horizon_exceeded: bool
    convergence_model: object
    non_convergent: frozenset
    stabilized_edb: object
    reference_model: object
    reference_note: str
    weakly_stabilizing_witnessed: bool
    divergence: tuple


def verdict(sys: MultiAgentSystem, trace: Trace, families=()) -> Verdict:
    fix = detect_fixpoint(trace)
    conv = convergence_model(sys, trace, fix) if fix is not None else None
    disagree = non_convergent_atoms(sys, trace, fix) if fix is not None else frozenset()

    stab = None
    reference = None
    note = ""
    if trace.quiescence_point is not None:
        stab = stabilized_environment(trace)
        try:
            reference = superagent_model(superagent(sys), stab)
        except NoUniqueModelError as exc:
            note = str(exc)

    reports = []
    for family in families:
        report = divergence_probe(trace, family)
        if report is not None:
            reports.append(report)

    witnessed = fix is not None and reference is not None and conv == reference
    return Verdict(
        fixpoint_point=fix,
        strongly_convergent=fix is not None,
        horizon_exceeded=trace.horizon_exceeded,
        convergence_model=conv,
        non_convergent=disagree,
        stabilized_edb=stab,
        reference_model=reference,
        reference_note=note,
        weakly_stabilizing_witnessed=witnessed,
        divergence=tuple(reports),
    )


# ---------------------------------------------------------------------------
# Trace export: one JSON record per line; schema in docs/trace-schema.md.


def _atoms_list(atoms) -> list:
    return [str(a) for a in sorted(atoms)]


def event_to_record(event):
    if isinstance(event, EnvEvent):
        return {
            "type": "env",
            "true": _atoms_list(event.change.became_true),
            "false": _atoms_list(event.change.became_false),
        }
    return {"type": "send", "from": event.sender, "to": event.receiver}


def event_from_record(record):
    if record["type"] == "env":
        return EnvEvent(
            EnvChange(
                frozenset(parse_atom(a) for a in record["true"]),
                frozenset(parse_atom(a) for a in record["false"]),
            )
        )
    if record["type"] == "send":
        return CommEvent(record["from"], record["to"])
    raise ValueError(f"unknown event record: {record!r}")


def _dump(record) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def verdict_to_record(v: Verdict) -> dict:
    return {
        "record": "verdict",
        "fixpoint_point": v.fixpoint_point,
        "strongly_convergent": v.strongly_convergent,
        "horizon_exceeded": v.horizon_exceeded,
        "convergence_model": None if v.convergence_model is None else _atoms_list(v.convergence_model),
        "non_convergent": _atoms_list(v.non_convergent),
        "stabilized_edb": None if v.stabilized_edb is None else _atoms_list(v.stabilized_edb),
        "reference_model": None if v.reference_model is None else _atoms_list(v.reference_model),
        "reference_note": v.reference_note,
        "weakly_stabilizing_witnessed": v.weakly_stabilizing_witnessed,
        "divergence": [
            {"family": r.family, "hits": [{"agent": a, "values": list(vs)} for a, vs in r.hits]}
            for r in v.divergence
        ],
    }


def export_trace(trace: Trace, verdict_value: Verdict = None) -> str:
    """Line-delimited records, one per point; verdict appended last."""
    lines = []
    for point, gs in enumerate(trace.states):
        agents = {}
        for idx, agent_id in enumerate(trace.agent_ids):
            s = gs.agent_states[idx]
            agents[agent_id] = {
                "edb": _atoms_list(s.edb),
                "in": _atoms_list(s.indb),
                "model": _atoms_list(trace.models[point][idx]),
            }
        event = event_to_record(trace.events[point]) if point < len(trace.events) else None
        lines.append(_dump({"record": "point", "point": point, "event": event, "agents": agents}))
    if verdict_value is not None:
        lines.append(_dump(verdict_to_record(verdict_value)))
    return "\n".join(lines) + "\n"


def events_from_export(text: str) -> list:
    """Recover the event list from an exported trace."""
    events = []
    for line in text.splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        if record.get("record") == "point" and record.get("event") is not None:
            events.append(event_from_record(record["event"]))
    return events
