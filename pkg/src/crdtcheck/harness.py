"""Conformance harness: drive replica servers through schedules and
compare their canonical bytes against the model-produced oracle.

Replay mode walks a corpus line by line.  Each case gets a fresh set of
server instances (reset by reconstruction — no reset protocol to get
wrong), the schedule's client events are sent as ClientOp frames, the
returned sync messages wait in a pending pool until the schedule's
deliver events hand them over, and a final Inspect per replica is
byte-compared against the case's oracle strings.

Verdicts per case:

- ``pass``           every replica matched its oracle string.
- ``diverged``       some replica's canonical bytes differ; the result
                     carries the replica index and the first differing
                     byte offset.
- ``replica-error``  the server rejected a scheduled client op, raised
                     an error, or the schedule asked to deliver a
                     message that was never produced.
- ``rejected``       the case was generated for a different
                     configuration (fingerprint mismatch) and was not
                     run at all.

Replay summaries contain counts and the first few failing cases and
deliberately no timing, so summarizing the same corpus twice yields the
same bytes.

Stress mode is the randomized variant: seeded random client requests
against the servers with the model replicas run in lockstep, random
partial delivery while a round is open, full delivery plus a canonical
byte comparison at every round end.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import IO, Callable, Iterable

from .errors import CrdtCheckError, ScheduleUnsatisfiable
from .explorer import (
    ClientEvent,
    DeliverEvent,
    ExplorationConfig,
    config_fingerprint,
)
from .operations import RPQ, OperationRequest
from .replica import Existence, ReplicaState, fresh_replica
from .server import ReplicaServer
from .testgen import TestCase, iter_corpus

PASS = "pass"
DIVERGED = "diverged"
REJECTED = "rejected"
REPLICA_ERROR = "replica-error"

MAX_REPORTED_FAILURES = 10


class LoopbackEndpoint:
    """In-process endpoint: frames go straight into the server object."""

    def __init__(self, server: ReplicaServer):
        self._server = server

    def send(self, obj: dict) -> dict:
        try:
            return self._server.handle_frame(obj)
        except CrdtCheckError as exc:
            return {"error": str(exc), "type": "Error"}


class SocketEndpoint:
    """Endpoint over a framed socket (see ``wire.FrameSocket``)."""

    def __init__(self, frame_socket):
        self._fs = frame_socket

    def send(self, obj: dict) -> dict:
        self._fs.send(obj)
        reply = self._fs.recv()
        if reply is None:
            return {"error": "connection closed", "type": "Error"}
        return reply

    def close(self) -> None:
        try:
            self.send({"type": "Shutdown"})
        finally:
            self._fs.close()


def loopback_factory(cfg: ExplorationConfig, bug_flags=()) -> Callable[[], list]:
    def make() -> list:
        return [
            LoopbackEndpoint(ReplicaServer(cfg.data_type, i, cfg.n, bug_flags))
            for i in range(cfg.n)
        ]

    return make


class PendingPool:
    """Sync messages produced but not yet delivered, keyed by
    (destination, origin, counter)."""

    def __init__(self):
        self._msgs: dict[tuple[int, int, int], dict] = {}

    def put(self, dest: int, msg: dict) -> None:
        origin = msg["origin"]
        counter = msg["op"]["dot"][1]
        self._msgs[(dest, origin, counter)] = msg

    def take(self, dest: int, origin: int, counter: int) -> dict:
        msg = self._msgs.pop((dest, origin, counter), None)
        if msg is None:
            raise ScheduleUnsatisfiable(
                f"no in-flight message from replica {origin} dot counter "
                f"{counter} for replica {dest}"
            )
        return msg

    def __len__(self) -> int:
        return len(self._msgs)


@dataclass
class CaseResult:
    case_id: str
    status: str
    replica: int | None = None
    diff_offset: int | None = None
    detail: str = ""

    def as_json(self) -> dict:
        return {
            "case": self.case_id,
            "detail": self.detail,
            "diff_offset": self.diff_offset,
            "replica": self.replica,
            "status": self.status,
        }


@dataclass
class ReplaySummary:
    cases: int = 0
    passed: int = 0
    diverged: int = 0
    rejected: int = 0
    replica_error: int = 0
    first_failures: list = field(default_factory=list)

    def note(self, result: CaseResult) -> None:
        self.cases += 1
        if result.status == PASS:
            self.passed += 1
            return
        if result.status == DIVERGED:
            self.diverged += 1
        elif result.status == REJECTED:
            self.rejected += 1
        else:
            self.replica_error += 1
        if len(self.first_failures) < MAX_REPORTED_FAILURES:
            self.first_failures.append(result.as_json())

    @property
    def clean(self) -> bool:
        return self.cases == self.passed

    def as_json(self) -> dict:
        return {
            "cases": self.cases,
            "diverged": self.diverged,
            "first_failures": self.first_failures,
            "pass": self.passed,
            "rejected": self.rejected,
            "replica_error": self.replica_error,
        }


def first_diff_offset(a: bytes, b: bytes) -> int:
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    return min(len(a), len(b))


def replay_case(tc: TestCase, endpoints: list, expected_fp: str) -> CaseResult:
    """Run one corpus case against freshly constructed endpoints."""
    if tc.fingerprint != expected_fp:
        return CaseResult(
            tc.case_id,
            REJECTED,
            detail=f"case fingerprint {tc.fingerprint[:12]}… does not match "
            f"this configuration ({expected_fp[:12]}…)",
        )
    n = len(endpoints)
    if len(tc.oracle) != n:
        return CaseResult(
            tc.case_id, REJECTED,
            detail=f"oracle covers {len(tc.oracle)} replicas, configuration has {n}",
        )
    pool = PendingPool()
    for ev in tc.schedule:
        if isinstance(ev, ClientEvent):
            reply = endpoints[ev.target].send(
                {"req": ev.req.as_wire(), "type": "ClientOp"}
            )
            if reply.get("type") == "Error":
                return CaseResult(
                    tc.case_id, REPLICA_ERROR, replica=ev.target,
                    detail=reply.get("error", ""),
                )
            if not reply.get("accepted"):
                return CaseResult(
                    tc.case_id, REPLICA_ERROR, replica=ev.target,
                    detail=f"scheduled client op was rejected: {ev.req.as_wire()}",
                )
            for sync in reply.get("syncs", []):
                pool.put(sync["dest"], sync["msg"])
        elif isinstance(ev, DeliverEvent):
            try:
                msg = pool.take(ev.dest, ev.origin, ev.counter)
            except ScheduleUnsatisfiable as exc:
                return CaseResult(
                    tc.case_id, REPLICA_ERROR, replica=ev.dest, detail=str(exc)
                )
            reply = endpoints[ev.dest].send({"msg": msg, "type": "Sync"})
            if reply.get("type") == "Error":
                return CaseResult(
                    tc.case_id, REPLICA_ERROR, replica=ev.dest,
                    detail=reply.get("error", ""),
                )
        else:  # pragma: no cover - schedules parse to the two event types
            return CaseResult(tc.case_id, REPLICA_ERROR, detail=f"bad event {ev!r}")
    for i in range(n):
        reply = endpoints[i].send({"type": "Inspect"})
        if reply.get("type") != "InspectReply":
            return CaseResult(
                tc.case_id, REPLICA_ERROR, replica=i, detail=reply.get("error", ""),
            )
        got = reply.get("state", "")
        if got != tc.oracle[i]:
            offset = first_diff_offset(
                got.encode("utf-8"), tc.oracle[i].encode("utf-8")
            )
            return CaseResult(
                tc.case_id, DIVERGED, replica=i, diff_offset=offset,
                detail=f"replica {i} differs from the oracle at byte {offset}",
            )
    return CaseResult(tc.case_id, PASS)


def replay_corpus(
    cfg: ExplorationConfig,
    stream: IO[str],
    *,
    bug_flags: Iterable[str] = (),
    endpoints_factory: Callable[[], list] | None = None,
) -> ReplaySummary:
    """Replay every case in a JSONL stream; raises ``MalformedCase`` on
    unparseable lines."""
    factory = endpoints_factory or loopback_factory(cfg, tuple(bug_flags))
    expected_fp = config_fingerprint(cfg)
    summary = ReplaySummary()
    for tc in iter_corpus(stream):
        summary.note(replay_case(tc, factory(), expected_fp))
    return summary


# -- randomized stress conformance -----------------------------------------


@dataclass
class StressFailure:
    kind: str  # issue-divergence | inspect-divergence | rejection-mismatch | replica-error
    round_no: int
    replica: int
    detail: str

    def as_json(self) -> dict:
        return {
            "detail": self.detail,
            "kind": self.kind,
            "replica": self.replica,
            "round": self.round_no,
        }


@dataclass
class StressReport:
    seed: int
    rounds: int
    ops: int = 0
    rejected: int = 0
    deliveries: int = 0
    failure: StressFailure | None = None

    @property
    def clean(self) -> bool:
        return self.failure is None

    def as_json(self) -> dict:
        return {
            "deliveries": self.deliveries,
            "failure": self.failure.as_json() if self.failure else None,
            "ops": self.ops,
            "rejected": self.rejected,
            "rounds": self.rounds,
            "seed": self.seed,
        }


def _random_request(
    rng: random.Random, data_type: str, model: ReplicaState, fresh_id: str
) -> OperationRequest:
    if data_type == RPQ:
        roll = rng.randrange(5)
        if roll < 2:
            return OperationRequest("add", "e", rng.randrange(0, 100))
        if roll < 4:
            return OperationRequest("increase", "e", rng.randrange(-9, 10))
        return OperationRequest("remove", "e")
    views = model.views()
    seen = sorted(views)
    existent = [e for e in seen if views[e].existence is Existence.EXISTENT]
    roll = rng.randrange(4)
    if roll == 0 or not seen:
        anchor = rng.choice([None, *existent]) if existent else None
        return OperationRequest("insert", fresh_id, rng.randrange(0, 100), anchor)
    elem = rng.choice(seen)
    if roll == 1:
        return OperationRequest("update", elem, rng.randrange(0, 100))
    if roll == 2:
        return OperationRequest("remove", elem)
    return OperationRequest("readd", elem)


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def stress(
    data_type: str,
    n: int,
    *,
    seed: int,
    rounds: int = 20,
    ops_per_round: int = 40,
    bug_flags: Iterable[str] = (),
    endpoints: list | None = None,
) -> StressReport:
    """Seeded random conformance session.

    The model replicas run in lockstep with the servers: every accepted
    request must produce byte-identical sync messages on both sides,
    rejections must agree, and after each round drains the network the
    canonical bytes must match replica by replica.  Stops at the first
    failure.
    """
    rng = random.Random(seed)
    eps = endpoints or [
        LoopbackEndpoint(ReplicaServer(data_type, i, n, tuple(bug_flags)))
        for i in range(n)
    ]
    models = [fresh_replica(data_type, i) for i in range(n)]
    report = StressReport(seed=seed, rounds=rounds)
    # in-flight: list of (dest, wire message, model SyncMessage)
    in_flight: list = []
    issued = 0

    def deliver(index: int, round_no: int) -> StressFailure | None:
        nonlocal models
        dest, wire_msg, model_msg = in_flight.pop(index)
        report.deliveries += 1
        reply = eps[dest].send({"msg": wire_msg, "type": "Sync"})
        if reply.get("type") == "Error":
            return StressFailure(
                "replica-error", round_no, dest, reply.get("error", "")
            )
        models[dest] = models[dest].deliver(model_msg)
        return None

    for round_no in range(rounds):
        for _ in range(ops_per_round):
            target = rng.randrange(n)
            issued += 1
            req = _random_request(rng, data_type, models[target], f"x{issued}")
            err = models[target].request_error(req)
            reply = eps[target].send({"req": req.as_wire(), "type": "ClientOp"})
            if reply.get("type") == "Error":
                report.failure = StressFailure(
                    "replica-error", round_no, target, reply.get("error", "")
                )
                return report
            if err is not None:
                report.ops += 1
                report.rejected += 1
                if reply.get("accepted"):
                    report.failure = StressFailure(
                        "rejection-mismatch", round_no, target,
                        f"model rejects {req.as_wire()} ({err}); server accepted",
                    )
                    return report
                continue
            if not reply.get("accepted"):
                report.failure = StressFailure(
                    "rejection-mismatch", round_no, target,
                    f"model accepts {req.as_wire()}; server rejected",
                )
                return report
            report.ops += 1
            models[target], model_msg = models[target].issue(req)
            model_wire = _canonical_json(model_msg.as_wire())
            syncs = reply.get("syncs", [])
            expected_dests = sorted(d for d in range(n) if d != target)
            if sorted(s["dest"] for s in syncs) != expected_dests:
                report.failure = StressFailure(
                    "issue-divergence", round_no, target,
                    f"sync fan-out went to {[s['dest'] for s in syncs]}, "
                    f"expected {expected_dests}",
                )
                return report
            for sync in syncs:
                got = _canonical_json(sync["msg"])
                if got != model_wire:
                    offset = first_diff_offset(
                        got.encode("utf-8"), model_wire.encode("utf-8")
                    )
                    report.failure = StressFailure(
                        "issue-divergence", round_no, target,
                        f"sync message differs from the model at byte {offset}",
                    )
                    return report
                in_flight.append((sync["dest"], sync["msg"], model_msg))
            # Deliver a random prefix of the backlog while the round is open.
            while in_flight and rng.random() < 0.4:
                failure = deliver(rng.randrange(len(in_flight)), round_no)
                if failure is not None:
                    report.failure = failure
                    return report
        # Round ends: drain everything, then compare canonical bytes.
        while in_flight:
            failure = deliver(rng.randrange(len(in_flight)), round_no)
            if failure is not None:
                report.failure = failure
                return report
        for i in range(n):
            reply = eps[i].send({"type": "Inspect"})
            if reply.get("type") != "InspectReply":
                report.failure = StressFailure(
                    "replica-error", round_no, i, reply.get("error", "")
                )
                return report
            want = models[i].normalize().decode("utf-8")
            got = reply.get("state", "")
            if got != want:
                offset = first_diff_offset(
                    got.encode("utf-8"), want.encode("utf-8")
                )
                report.failure = StressFailure(
                    "inspect-divergence", round_no, i,
                    f"canonical bytes differ from the model at byte {offset}",
                )
                return report
    return report
