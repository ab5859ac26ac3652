"""Bounded exhaustive search over small replicated-system runs.

A run is a sequence of *events* applied to a global state holding n
replicas plus, per destination replica, the set of sync messages still
in flight to it:

- ``ClientEvent(slot, target, req)`` — the next client request.  Request
  slots are consumed strictly in order; slot ``i`` always goes to
  replica ``i mod n``, and issuing fuses the local apply with the
  broadcast, so one client event puts n-1 copies of the sync message in
  flight.
- ``DeliverEvent(dest, origin, counter)`` — remove one in-flight message
  (identified by its dot) from ``dest``'s channel and deliver it.

The default channel is *arbitrary*: any in-flight message may arrive
next, so reordering and arbitrary delay are both explored (messages are
never lost — every terminal state has empty channels).  The *causal*
channel only enables a delivery when the destination has already
delivered everything in the message's context snapshot.

Two search strategies share the same transition function:

- ``explore`` — breadth-first over *distinct* global states, deduplicated
  by a full-fidelity canonical key, with a path-count accumulator so the
  number of terminal schedules is still exact.  Invariants are checked
  once per distinct state; a violating state is recorded (breadth-first
  order makes the first recording a shortest counterexample) and its
  branch pruned.
- ``enumerate_traces`` — depth-first over *schedules*, no deduplication,
  children visited in sorted event order.  Its emission sequence is a
  pure function of the configuration, which is what the corpus generator
  needs, and its terminal tally doubles as an independent check that the
  deduplicating search merges states soundly.

With a single replica there are no messages, so the state graph is a
tree and the two searches coincide; ``explore`` uses the depth-first
walk there to keep memory flat.

Checked invariants (reported by name):

- ``convergence``     terminal states must render byte-identical
                      canonical forms on every replica.
- ``buffer-liveness`` terminal states must have drained every pending
                      buffer.
- ``position-unique`` no two existent list elements at one replica may
                      share a position (checked at every state).
- ``position-range``  every position digit stays inside the base
                      (defensive; checked at every state).
- ``stuck``           a state with unconsumed slots must enable at least
                      one event (can only trip with a pinned op space).
"""

from __future__ import annotations

import hashlib
import json
import pickle
import time
from collections.abc import Callable
from dataclasses import dataclass

from .errors import BadConfig, BudgetExceeded, NotEnabled
from .operations import (
    LIST,
    LIST_KINDS,
    RPQ,
    RPQ_KINDS,
    OperationRequest,
    SyncMessage,
)
from .positions import BASE
from .replica import (
    BUG_ASSUME_CAUSAL,
    BUG_READD_ACCEPT,
    CAUSAL_ASSUMING,
    STANDARD,
    Existence,
    ReplicaState,
    fresh_replica,
)

CHANNEL_ARBITRARY = "arbitrary"
CHANNEL_CAUSAL = "causal"
CHANNELS = (CHANNEL_ARBITRARY, CHANNEL_CAUSAL)
STRATEGIES = (STANDARD, CAUSAL_ASSUMING)

# Only these flags change the *model* state machine; the rest of the
# bug catalog lives in the replica server implementation.
MODEL_BUG_FLAGS = frozenset({BUG_READD_ACCEPT, BUG_ASSUME_CAUSAL})

MAX_REPLICAS = 3
VIOLATION_CAP = 100

RPQ_ELEMENT = "e"
LIST_ATTRS = (10, 20)

# The priority-queue op space is fixed: five requests against one
# element, all of them valid at any replica state.
_RPQ_POOL = tuple(sorted(
    [
        OperationRequest("add", RPQ_ELEMENT, 10),
        OperationRequest("add", RPQ_ELEMENT, 20),
        OperationRequest("increase", RPQ_ELEMENT, -3),
        OperationRequest("increase", RPQ_ELEMENT, 4),
        OperationRequest("remove", RPQ_ELEMENT),
    ],
    key=lambda r: r.sort_key(),
))


@dataclass(frozen=True)
class ExplorationConfig:
    """Everything that pins down one search, minus resource budgets.

    ``pinned_ops`` replaces the generated op space with an explicit
    per-slot tuple of candidate requests (still filtered for validity at
    the target replica); None means the standard space.
    """

    data_type: str
    n: int
    q: int
    channel: str = CHANNEL_ARBITRARY
    strategy: str = STANDARD
    bug_flags: frozenset = frozenset()
    pinned_ops: tuple | None = None
    state_cap: int | None = None

    def __post_init__(self):
        if self.data_type not in (RPQ, LIST):
            raise BadConfig(f"unknown data type {self.data_type!r}")
        if not 1 <= self.n <= MAX_REPLICAS:
            raise BadConfig(f"replica count must be 1..{MAX_REPLICAS}, got {self.n}")
        if self.q < 1:
            raise BadConfig(f"need at least one request slot, got {self.q}")
        if self.n > 1 and self.q < self.n:
            raise BadConfig(
                f"with {self.n} replicas the round-robin needs q >= {self.n}, got {self.q}"
            )
        if self.channel not in CHANNELS:
            raise BadConfig(f"unknown channel mode {self.channel!r}")
        if self.strategy not in STRATEGIES:
            raise BadConfig(f"unknown strategy {self.strategy!r}")
        bad = set(self.bug_flags) - MODEL_BUG_FLAGS
        if bad:
            raise BadConfig(
                f"flags {sorted(bad)} do not alter the model; "
                f"model-level flags are {sorted(MODEL_BUG_FLAGS)}"
            )
        if self.pinned_ops is not None:
            if len(self.pinned_ops) != self.q:
                raise BadConfig(
                    f"pinned op space has {len(self.pinned_ops)} slots, expected {self.q}"
                )
            kinds = RPQ_KINDS if self.data_type == RPQ else LIST_KINDS
            for i, pool in enumerate(self.pinned_ops):
                if not pool:
                    raise BadConfig(f"pinned slot {i} is empty")
                for req in pool:
                    if req.kind not in kinds:
                        raise BadConfig(
                            f"pinned slot {i}: kind {req.kind!r} not valid for {self.data_type}"
                        )
        if self.state_cap is not None and self.state_cap < 1:
            raise BadConfig(f"state cap must be positive, got {self.state_cap}")


def config_fingerprint(cfg: ExplorationConfig) -> str:
    """Hex digest over the semantic knobs of a configuration.

    Corpus files embed this so a replay against a differently-shaped
    system is rejected up front.  Resource budgets are excluded — they
    change how much gets explored, not what any schedule means.
    """
    if cfg.pinned_ops is None:
        space: object = "standard-v1"
    else:
        space = [[r.as_wire() for r in pool] for pool in cfg.pinned_ops]
    doc = {
        "base": BASE,
        "bugs": sorted(cfg.bug_flags),
        "channel": cfg.channel,
        "data_type": cfg.data_type,
        "n": cfg.n,
        "op_space": space,
        "q": cfg.q,
        "strategy": cfg.strategy,
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


# -- events -----------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ClientEvent:
    slot: int
    target: int
    req: OperationRequest


@dataclass(frozen=True, slots=True)
class DeliverEvent:
    dest: int
    origin: int
    counter: int


def event_sort_key(ev) -> tuple:
    if isinstance(ev, ClientEvent):
        return (0, ev.slot, ev.req.sort_key())
    return (1, ev.dest, ev.origin, ev.counter)


def event_wire(ev) -> list:
    if isinstance(ev, ClientEvent):
        return ["C", ev.slot, ev.req.as_wire(), ev.target]
    return ["D", ev.dest, ev.origin, ev.counter]


def event_from_wire(item) -> ClientEvent | DeliverEvent:
    """Inverse of ``event_wire``; raises ValueError on anything off-shape."""
    if not isinstance(item, (list, tuple)) or not item:
        raise ValueError("event must be a non-empty array")
    tag = item[0]
    if tag == "C":
        if len(item) != 4:
            raise ValueError("client event needs [\"C\", slot, request, target]")
        _, slot, req, target = item
        if not isinstance(slot, int) or not isinstance(target, int):
            raise ValueError("client event slot/target must be integers")
        if not isinstance(req, dict):
            raise ValueError("client event request must be an object")
        return ClientEvent(slot, target, OperationRequest.from_wire(req))
    if tag == "D":
        if len(item) != 4:
            raise ValueError("deliver event needs [\"D\", dest, origin, counter]")
        _, dest, origin, counter = item
        if not all(isinstance(x, int) for x in (dest, origin, counter)):
            raise ValueError("deliver event fields must be integers")
        return DeliverEvent(dest, origin, counter)
    raise ValueError(f"unknown event tag {tag!r}")


# -- global state -------------------------------------------------------


@dataclass(frozen=True, slots=True)
class GlobalState:
    replicas: tuple[ReplicaState, ...]
    channels: tuple[frozenset[SyncMessage], ...]  # indexed by destination
    next_slot: int

    def canonical(self) -> tuple:
        return (
            self.next_slot,
            tuple(r.canonical_key() for r in self.replicas),
            tuple(
                tuple(sorted(m.canonical() for m in ch)) for ch in self.channels
            ),
        )


def state_digest(gs: GlobalState) -> bytes:
    return hashlib.blake2b(
        pickle.dumps(gs.canonical(), protocol=4), digest_size=16
    ).digest()


def initial_state(cfg: ExplorationConfig) -> GlobalState:
    return GlobalState(
        replicas=tuple(
            fresh_replica(cfg.data_type, i, cfg.strategy, cfg.bug_flags)
            for i in range(cfg.n)
        ),
        channels=tuple(frozenset() for _ in range(cfg.n)),
        next_slot=0,
    )


def is_terminal(cfg: ExplorationConfig, gs: GlobalState) -> bool:
    return gs.next_slot >= cfg.q and all(not ch for ch in gs.channels)


def candidate_requests(
    cfg: ExplorationConfig, state: ReplicaState, slot: int
) -> list[OperationRequest]:
    """Valid client requests for this slot at the target replica, sorted."""
    if cfg.pinned_ops is not None:
        pool: list[OperationRequest] = sorted(
            cfg.pinned_ops[slot], key=lambda r: r.sort_key()
        )
    elif cfg.data_type == RPQ:
        pool = list(_RPQ_POOL)
    else:
        pool = _list_pool(state, slot)
    return [r for r in pool if state.request_error(r) is None]


def _list_pool(state: ReplicaState, slot: int) -> list[OperationRequest]:
    """The list op space at one replica: insert a fresh slot-numbered id
    after the head or any existent element, or update / remove / re-add
    any id this replica has a record of."""
    views = state.views()
    seen = sorted(views)
    new_id = f"e{slot + 1}"
    pool = []
    for anchor in [None, *[e for e in seen if views[e].existence is Existence.EXISTENT]]:
        for attr in LIST_ATTRS:
            pool.append(OperationRequest("insert", new_id, attr, anchor))
    for elem in seen:
        for attr in LIST_ATTRS:
            pool.append(OperationRequest("update", elem, attr))
        pool.append(OperationRequest("remove", elem))
        pool.append(OperationRequest("readd", elem))
    pool.sort(key=lambda r: r.sort_key())
    return pool


def _client_step(cfg: ExplorationConfig, gs: GlobalState, ev: ClientEvent) -> GlobalState:
    state, msg = gs.replicas[ev.target].issue(ev.req)
    replicas = list(gs.replicas)
    replicas[ev.target] = state
    channels = tuple(
        ch | {msg} if dest != ev.target else ch
        for dest, ch in enumerate(gs.channels)
    )
    return GlobalState(tuple(replicas), channels, gs.next_slot + 1)


def _deliver_step(gs: GlobalState, ev: DeliverEvent, msg: SyncMessage) -> GlobalState:
    replicas = list(gs.replicas)
    replicas[ev.dest] = replicas[ev.dest].deliver(msg)
    channels = list(gs.channels)
    channels[ev.dest] = channels[ev.dest] - {msg}
    return GlobalState(tuple(replicas), tuple(channels), gs.next_slot)


def _find_message(gs: GlobalState, ev: DeliverEvent) -> SyncMessage | None:
    for m in gs.channels[ev.dest]:
        if m.origin == ev.origin and m.op.dot.counter == ev.counter:
            return m
    return None


def _deliverable(cfg: ExplorationConfig, gs: GlobalState, dest: int, msg: SyncMessage) -> bool:
    if cfg.channel == CHANNEL_CAUSAL:
        return gs.replicas[dest].delivered.covers_context(msg.ctx)
    return True


def enabled_events(cfg: ExplorationConfig, gs: GlobalState) -> list:
    """All events enabled in ``gs``, in deterministic sorted order."""
    return [ev for ev, _succ in _successors(cfg, gs)]


def _successors(cfg: ExplorationConfig, gs: GlobalState) -> list[tuple]:
    """(event, successor state) pairs in sorted event order."""
    out = []
    if gs.next_slot < cfg.q:
        slot = gs.next_slot
        target = slot % cfg.n
        for req in candidate_requests(cfg, gs.replicas[target], slot):
            ev = ClientEvent(slot, target, req)
            out.append((ev, _client_step(cfg, gs, ev)))
    delivers = []
    for dest in range(cfg.n):
        for msg in gs.channels[dest]:
            if _deliverable(cfg, gs, dest, msg):
                delivers.append(
                    (DeliverEvent(dest, msg.origin, msg.op.dot.counter), msg)
                )
    delivers.sort(key=lambda pair: event_sort_key(pair[0]))
    out.extend((ev, _deliver_step(gs, ev, msg)) for ev, msg in delivers)
    return out


def step(cfg: ExplorationConfig, gs: GlobalState, ev) -> GlobalState:
    """Validated single transition; raises ``NotEnabled`` otherwise."""
    if isinstance(ev, ClientEvent):
        if (
            ev.slot == gs.next_slot
            and ev.slot < cfg.q
            and ev.target == ev.slot % cfg.n
            and ev.req in candidate_requests(cfg, gs.replicas[ev.target], ev.slot)
        ):
            return _client_step(cfg, gs, ev)
        raise NotEnabled(f"client event not enabled: {event_wire(ev)}")
    if isinstance(ev, DeliverEvent):
        if 0 <= ev.dest < cfg.n:
            msg = _find_message(gs, ev)
            if msg is not None:
                if not _deliverable(cfg, gs, ev.dest, msg):
                    raise NotEnabled(
                        f"causal channel blocks delivery: {event_wire(ev)}"
                    )
                return _deliver_step(gs, ev, msg)
        raise NotEnabled(f"no such in-flight message: {event_wire(ev)}")
    raise NotEnabled(f"not an event: {ev!r}")


def replay_schedule(
    cfg: ExplorationConfig, schedule, history: "HistoryLog | None" = None
) -> GlobalState:
    """Run an explicit event sequence through the validated transition."""
    gs = initial_state(cfg)
    for ev in schedule:
        gs = step(cfg, gs, ev)
        if history is not None:
            history.record(ev, gs)
    return gs


def schedule_has_causal_inversion(cfg: ExplorationConfig, schedule) -> bool:
    """True if some delivery happens before one of its causal
    predecessors reached the same destination — the reordering a causal
    channel would have forbidden."""
    gs = initial_state(cfg)
    inverted = False
    for ev in schedule:
        if isinstance(ev, DeliverEvent):
            msg = _find_message(gs, ev)
            if msg is not None and not gs.replicas[ev.dest].delivered.covers_context(msg.ctx):
                inverted = True
        gs = step(cfg, gs, ev)
    return inverted


class HistoryLog:
    """Append-only (event, per-replica canonical bytes) trail of a replay.

    Recording is an observer: it never feeds back into transitions.
    """

    def __init__(self):
        self.entries: list[tuple[list, tuple[bytes, ...]]] = []

    def record(self, ev, gs: GlobalState) -> None:
        self.entries.append(
            (event_wire(ev), tuple(r.normalize() for r in gs.replicas))
        )

    def __len__(self) -> int:
        return len(self.entries)


# -- invariant checks ---------------------------------------------------


def state_violations(cfg: ExplorationConfig, gs: GlobalState) -> list[tuple[str, str]]:
    """Per-state invariants; returned as (name, detail) pairs."""
    out = []
    if cfg.data_type == LIST:
        for i, rep in enumerate(gs.replicas):
            poss = [
                v.pos
                for v in rep.views().values()
                if v.existence is Existence.EXISTENT
            ]
            if len(set(poss)) != len(poss):
                out.append(
                    ("position-unique", f"colliding positions at replica {i}")
                )
            if any(
                not 0 <= digit < BASE for p in poss for digit, _, _ in p
            ):
                out.append(("position-range", f"digit out of range at replica {i}"))
    return out


def terminal_violations(cfg: ExplorationConfig, gs: GlobalState) -> list[tuple[str, str]]:
    """Invariants that only make sense once every message was delivered."""
    out = []
    canon = [r.normalize() for r in gs.replicas]
    for i in range(1, len(canon)):
        if canon[i] != canon[0]:
            out.append(
                (
                    "convergence",
                    f"replicas 0 and {i} render different canonical bytes",
                )
            )
            break
    for i, rep in enumerate(gs.replicas):
        if rep.pending:
            out.append(
                ("buffer-liveness", f"replica {i} still buffers {len(rep.pending)} op(s)")
            )
            break
    return out


# -- results ------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    invariant: str
    schedule: tuple  # events leading to the violating state
    detail: str = ""

    def as_json(self) -> dict:
        return {
            "detail": self.detail,
            "invariant": self.invariant,
            "schedule": [event_wire(ev) for ev in self.schedule],
        }


@dataclass(frozen=True)
class TraceRecord:
    """One complete schedule plus the terminal canonical bytes per replica."""

    schedule: tuple
    oracle: tuple[bytes, ...]


@dataclass
class ExplorationReport:
    fingerprint: str
    states_visited: int
    distinct_states: int
    terminal_traces: int
    violations: tuple[Violation, ...]
    violations_capped: bool
    exhaustive: bool
    wall_time_s: float
    oracle_multiset: dict | None = None  # filled only on request

    def as_json(self) -> dict:
        return {
            "distinct_states": self.distinct_states,
            "exhaustive": self.exhaustive,
            "fingerprint": self.fingerprint,
            "states_visited": self.states_visited,
            "terminal_traces": self.terminal_traces,
            "violations": [v.as_json() for v in self.violations],
            "violations_capped": self.violations_capped,
            "wall_time_s": round(self.wall_time_s, 3),
        }


@dataclass
class BruteResult:
    """Outcome of the non-deduplicating depth-first walk."""

    states_visited: int
    terminal_traces: int
    violations: tuple[Violation, ...]
    violations_capped: bool
    oracle_multiset: dict | None
    capped: bool


# -- depth-first walk ----------------------------------------------------


def enumerate_traces(
    cfg: ExplorationConfig,
    emit: Callable[[TraceRecord], None] | None = None,
    *,
    check: bool = False,
    collect_oracles: bool = False,
    state_cap: int | None = None,
) -> BruteResult:
    """Walk every schedule depth-first, children in sorted event order.

    No deduplication happens, so ``terminal_traces`` counts schedules
    exactly and the ``emit`` callback sees them in an order that is a
    pure function of the configuration.  With ``check`` set, the same
    invariants as the deduplicating search run at every node, violating
    non-terminal nodes pruning their subtree the same way.
    """
    root = initial_state(cfg)
    visited = 1
    leaves = 0
    violations: list[Violation] = []
    shapes: set = set()
    capped_v = False
    budget_hit = False
    oracle_ms: dict | None = {} if collect_oracles else None
    path: list = []

    def note(name: str, detail: str, gs: GlobalState) -> None:
        nonlocal capped_v
        shape = (name, state_digest(gs))
        if shape in shapes:
            return
        if len(violations) >= VIOLATION_CAP:
            capped_v = True
            return
        shapes.add(shape)
        violations.append(Violation(name, tuple(path), detail))

    def walk(gs: GlobalState) -> None:
        nonlocal visited, leaves, budget_hit
        terminal = is_terminal(cfg, gs)
        if check:
            vs = state_violations(cfg, gs)
            if terminal:
                vs += terminal_violations(cfg, gs)
            for name, detail in vs:
                note(name, detail, gs)
            if vs and not terminal:
                return  # prune below a broken state
        if terminal:
            leaves += 1
            if emit is not None or collect_oracles:
                oracle = tuple(r.normalize() for r in gs.replicas)
                if emit is not None:
                    emit(TraceRecord(tuple(path), oracle))
                if oracle_ms is not None:
                    oracle_ms[oracle] = oracle_ms.get(oracle, 0) + 1
            return
        succs = _successors(cfg, gs)
        if not succs:
            if check:
                note("stuck", "no enabled events before the run completed", gs)
            return
        for ev, succ in succs:
            if state_cap is not None and visited >= state_cap:
                budget_hit = True
                return
            visited += 1
            path.append(ev)
            walk(succ)
            path.pop()
            if budget_hit:
                return

    walk(root)
    violations.sort(key=lambda v: len(v.schedule))
    return BruteResult(
        states_visited=visited,
        terminal_traces=leaves,
        violations=tuple(violations),
        violations_capped=capped_v,
        oracle_multiset=oracle_ms,
        capped=budget_hit,
    )


# -- deduplicating search -------------------------------------------------


def explore(
    cfg: ExplorationConfig,
    *,
    collect_oracles: bool = False,
    force_bfs: bool = False,
) -> ExplorationReport:
    """Search the full state space and check every invariant.

    Returns a report with exact distinct-state and terminal-schedule
    counts.  Raises ``BudgetExceeded`` (with the partial report attached)
    when ``cfg.state_cap`` distinct states is not enough to finish.
    """
    t0 = time.monotonic()
    if cfg.n == 1 and not force_bfs:
        return _explore_tree(cfg, collect_oracles, t0)
    return _explore_bfs(cfg, collect_oracles, t0)


def _explore_tree(cfg: ExplorationConfig, collect_oracles: bool, t0: float) -> ExplorationReport:
    # One replica means no messages: the state graph is a tree, every
    # walked node is a distinct state, and the depth-first walk needs
    # only O(depth) memory where the frontier of a breadth-first pass
    # would hold a whole level of full states.
    br = enumerate_traces(
        cfg, None, check=True, collect_oracles=collect_oracles,
        state_cap=cfg.state_cap,
    )
    report = ExplorationReport(
        fingerprint=config_fingerprint(cfg),
        states_visited=br.states_visited,
        distinct_states=br.states_visited,
        terminal_traces=br.terminal_traces,
        violations=br.violations,
        violations_capped=br.violations_capped,
        exhaustive=not br.capped,
        wall_time_s=time.monotonic() - t0,
        oracle_multiset=br.oracle_multiset,
    )
    if br.capped:
        raise BudgetExceeded(
            f"state cap {cfg.state_cap} exhausted after {br.states_visited} states",
            report,
        )
    return report


def _explore_bfs(cfg: ExplorationConfig, collect_oracles: bool, t0: float) -> ExplorationReport:
    root = initial_state(cfg)
    root_key = state_digest(root)
    preds: dict[bytes, tuple | None] = {root_key: None}
    violations: list[Violation] = []
    shapes: set = set()
    capped_v = False
    visited = 1
    distinct = 1
    terminal_paths: dict[bytes, int] = {}
    terminal_oracles: dict[bytes, tuple] = {}

    def schedule_to(key: bytes) -> tuple:
        events = []
        entry = preds[key]
        while entry is not None:
            ev, parent = entry
            events.append(ev)
            entry = preds[parent]
        return tuple(reversed(events))

    def note(name: str, detail: str, key: bytes) -> None:
        nonlocal capped_v
        shape = (name, key)
        if shape in shapes:
            return
        if len(violations) >= VIOLATION_CAP:
            capped_v = True
            return
        shapes.add(shape)
        violations.append(Violation(name, schedule_to(key), detail))

    def partial_report(exhausted: bool) -> ExplorationReport:
        oracle_ms = None
        if collect_oracles:
            oracle_ms = {}
            for key, count in terminal_paths.items():
                oracle = terminal_oracles[key]
                oracle_ms[oracle] = oracle_ms.get(oracle, 0) + count
        return ExplorationReport(
            fingerprint=config_fingerprint(cfg),
            states_visited=visited,
            distinct_states=distinct,
            terminal_traces=sum(terminal_paths.values()),
            violations=tuple(violations),
            violations_capped=capped_v,
            exhaustive=exhausted,
            wall_time_s=time.monotonic() - t0,
            oracle_multiset=oracle_ms,
        )

    def over_cap() -> bool:
        return cfg.state_cap is not None and distinct > cfg.state_cap

    # key -> [state, path count, pruned]
    frontier: dict[bytes, list] = {root_key: [root, 1, False]}
    for name, detail in state_violations(cfg, root):
        note(name, detail, root_key)

    while frontier:
        level: dict[bytes, list] = {}
        for key, (state, paths, pruned) in frontier.items():
            if pruned:
                continue
            succs = _successors(cfg, state)
            if not succs:
                note("stuck", "no enabled events before the run completed", key)
                continue
            for ev, succ in succs:
                visited += 1
                skey = state_digest(succ)
                if is_terminal(cfg, succ):
                    if skey in terminal_paths:
                        terminal_paths[skey] += paths
                        continue
                    distinct += 1
                    preds[skey] = (ev, key)
                    terminal_paths[skey] = paths
                    if collect_oracles:
                        terminal_oracles[skey] = tuple(
                            r.normalize() for r in succ.replicas
                        )
                    for name, detail in state_violations(cfg, succ):
                        note(name, detail, skey)
                    for name, detail in terminal_violations(cfg, succ):
                        note(name, detail, skey)
                    if over_cap():
                        raise BudgetExceeded(
                            f"state cap {cfg.state_cap} exhausted",
                            partial_report(False),
                        )
                    continue
                entry = level.get(skey)
                if entry is not None:
                    entry[1] += paths
                    continue
                distinct += 1
                preds[skey] = (ev, key)
                vs = state_violations(cfg, succ)
                for name, detail in vs:
                    note(name, detail, skey)
                level[skey] = [succ, paths, bool(vs)]
                if over_cap():
                    raise BudgetExceeded(
                        f"state cap {cfg.state_cap} exhausted",
                        partial_report(False),
                    )
        frontier = level

    return partial_report(True)
