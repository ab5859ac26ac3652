"""Standalone replica servers speaking the framed JSON protocol.

This is a second, independent implementation of the replica semantics —
written against the protocol, not against the model code.  It keeps its
own causal-context bookkeeping, eagerly maintained liveness flags on
every record (where the model recomputes survival from scratch at each
read), a position-sorted element index, and its own position generator.
The conformance harness drives both implementations through identical
schedules and compares canonical bytes; sharing nothing but the wire
format is what makes that comparison worth running.

A server instance is single-threaded and lockstep: every incoming frame
produces exactly one reply frame.  Client operations answer with an Ack
carrying the sync messages to forward (the server never talks to its
peers directly — the driver owns the topology), deliveries answer with a
bare Ack, and Inspect answers with the canonical state string.

Bug flags (transcription mistakes kept reproducible on purpose):

- ``bug1-readd-accept``   a re-add whose insert has not arrived is
                          applied anyway, fabricating a position for an
                          element this server has never seen; the real
                          insert is dropped when it arrives.
- ``bug2-assume-causal``  no dependency buffering at all: an operation
                          arriving before its prerequisites is silently
                          discarded, as if the channel were causal.
- ``bug4-dummy-position`` update/remove/re-add on a missing element
                          materializes a placeholder at the out-of-range
                          position [[64,0,0]] instead of buffering; the
                          real insert is dropped when it arrives.
- ``bug7-idgen-order``    the element index orders position ties by
                          *descending* (replica, counter), so anchored
                          inserts resolve the wrong neighbor and
                          generate different position bytes.
"""

from __future__ import annotations

import json
from bisect import insort

from .errors import DuplicateDelivery, ProtocolViolation, UnknownFlag

RPQ = "rpq"
LIST = "list"

BASE = 64
_GHOST_COUNTER_FLOOR = 1_000_000

BUG_FLAGS = (
    "bug1-readd-accept",
    "bug2-assume-causal",
    "bug4-dummy-position",
    "bug7-idgen-order",
)

BUG_DESCRIPTIONS = {
    "bug1-readd-accept": (
        "re-add applied without its insert; fabricates a position, "
        "drops the real insert when it arrives"
    ),
    "bug2-assume-causal": (
        "no dependency buffering; operations arriving before their "
        "prerequisites are silently discarded"
    ),
    "bug4-dummy-position": (
        "update/remove/re-add on a missing element materializes a "
        "placeholder at out-of-range position [[64,0,0]]"
    ),
    "bug7-idgen-order": (
        "position index breaks ties by descending (replica, counter); "
        "anchored inserts pick the wrong neighbor"
    ),
}

_RPQ_KINDS = ("add", "increase", "remove")
_LIST_KINDS = ("insert", "update", "remove", "readd")


def _dot_order(dot):
    # Dots are (replica, counter) pairs on the wire; causal order sorts
    # by counter first.
    return (dot[1], dot[0])


class _Ctx:
    """Mutable causal context: contiguous per-replica frontier plus a
    spill set of out-of-order dots, folded into the frontier as gaps
    close."""

    __slots__ = ("seen", "extra")

    def __init__(self, seen=None, extra=None):
        self.seen = dict(seen) if seen else {}
        self.extra = set(extra) if extra else set()

    def has(self, replica: int, counter: int) -> bool:
        return counter <= self.seen.get(replica, 0) or (replica, counter) in self.extra

    def add(self, replica: int, counter: int) -> None:
        if self.has(replica, counter):
            return
        if counter == self.seen.get(replica, 0) + 1:
            top = counter
            while (replica, top + 1) in self.extra:
                top += 1
                self.extra.discard((replica, top))
            self.seen[replica] = top
        else:
            self.extra.add((replica, counter))

    def snapshot(self) -> "_Ctx":
        return _Ctx(self.seen, self.extra)

    def wire(self) -> dict:
        return {
            "extra": [[r, c] for r, c in sorted(self.extra, key=lambda rc: (rc[1], rc[0]))],
            "seen": {str(r): c for r, c in sorted(self.seen.items())},
        }

    @staticmethod
    def from_wire(obj) -> "_Ctx":
        ctx = _Ctx()
        for r, c in obj.get("seen", {}).items():
            ctx.seen[int(r)] = int(c)
        for r, c in obj.get("extra", []):
            ctx.extra.add((int(r), int(c)))
        return ctx


class _Rec:
    """One applied operation record: dot, payload, origin context, and a
    liveness flag the remove path keeps current."""

    __slots__ = ("dot", "val", "ctx", "alive")

    def __init__(self, dot, val, ctx, alive):
        self.dot = dot
        self.val = val
        self.ctx = ctx
        self.alive = alive


class _RpqElem:
    __slots__ = ("adds", "incs", "rems")

    def __init__(self):
        self.adds = []  # _Rec, val = added value
        self.incs = []  # _Rec, val = delta
        self.rems = []  # (replica, counter)


class _ListElem:
    __slots__ = ("ins_dot", "pos", "base_attr", "ins_ctx", "ins_alive",
                 "upds", "readds", "rems", "ghost")

    def __init__(self, ins_dot, pos, base_attr, ins_ctx, ghost=False):
        self.ins_dot = ins_dot
        self.pos = pos  # tuple of (digit, replica, counter) triples
        self.base_attr = base_attr
        self.ins_ctx = ins_ctx
        self.ins_alive = True
        self.upds = []    # _Rec, val = new attr
        self.readds = []  # _Rec, val unused
        self.rems = []    # (replica, counter)
        self.ghost = ghost


def _survives(ctx: _Ctx, rems) -> bool:
    return all(ctx.has(r, c) for r, c in rems)


def _gen_pos(left, right, replica, counter, depth=0):
    """Dense position strictly between two neighbors (either may be None).

    Same scheme as the origin-side generator this server is measured
    against: walk the shared prefix, take the midpoint of the first
    non-empty digit gap, pad with a zero digit when squeezing under a
    digit-1 bound.  Final digits are never zero, so extending a path
    always produces something strictly larger.  No precondition is
    enforced — with a broken neighbor index (bug7) the inputs can be
    out of order, and the walk still terminates with *some* position.
    """
    l_trip = left[depth] if left is not None and depth < len(left) else None
    r_trip = right[depth] if right is not None and depth < len(right) else None
    hi = r_trip[0] if r_trip is not None else BASE
    lo = max(l_trip[0] + 1 if l_trip is not None else 0, 1)
    if lo <= hi - 1:
        return ((lo + hi - 1) // 2, replica, counter),
    if l_trip is not None:
        keep_right = right if r_trip is not None and l_trip == r_trip else None
        return (l_trip,) + _gen_pos(left, keep_right, replica, counter, depth + 1)
    if hi == 1:
        return ((0, replica, counter),) + _gen_pos(None, None, replica, counter, depth + 1)
    # hi == 0: the bound starts with a zero digit; copy its padding triple.
    return (r_trip,) + _gen_pos(None, right, replica, counter, depth + 1)


class ReplicaServer:
    """One replica endpoint; drive it with ``handle_frame``."""

    def __init__(self, data_type: str, replica: int, n: int, bug_flags=()):
        if data_type not in (RPQ, LIST):
            raise ProtocolViolation(f"unknown data type {data_type!r}")
        for flag in bug_flags:
            if flag not in BUG_FLAGS:
                raise UnknownFlag(
                    f"{flag!r} is not in the bug catalog {list(BUG_FLAGS)}"
                )
        self.data_type = data_type
        self.replica = replica
        self.n = n
        self.counter = 0
        self.delivered = _Ctx()
        self.applied = _Ctx()
        self.elems: dict = {}
        self.by_pos: list = []  # (index key, pos, elem id); inserts only
        self.pending: dict = {}  # (replica, counter) -> sync msg object
        self.bug1 = "bug1-readd-accept" in bug_flags
        self.bug2 = "bug2-assume-causal" in bug_flags
        self.bug4 = "bug4-dummy-position" in bug_flags
        self.bug7 = "bug7-idgen-order" in bug_flags
        self.ghost_count = 0

    # -- frame dispatch ------------------------------------------------

    def handle_frame(self, obj: dict) -> dict:
        kind = obj.get("type")
        if kind == "ClientOp":
            return self._handle_client(obj.get("req"))
        if kind == "Sync":
            return self._handle_sync(obj.get("msg"))
        if kind == "Inspect":
            return {"state": self.canonical_state(), "type": "InspectReply"}
        if kind == "Shutdown":
            return {"accepted": True, "syncs": [], "type": "Ack"}
        raise ProtocolViolation(f"unknown frame type {kind!r}")

    # -- client operations ----------------------------------------------

    def _handle_client(self, req) -> dict:
        if not isinstance(req, dict):
            raise ProtocolViolation("ClientOp frame carries no request object")
        kind, elem, arg, anchor = self._check_request_shape(req)
        if self._rejection(kind, elem, anchor) is not None:
            return {"accepted": False, "syncs": [], "type": "Ack"}

        snapshot = self.delivered.snapshot()
        self.counter += 1
        dot = (self.replica, self.counter)
        deps: list = []
        pos = None
        if self.data_type == RPQ:
            if kind in ("increase", "remove"):
                win = self._rpq_winner(elem)
                if win is not None:
                    deps = [list(win)]
        else:
            if kind == "insert":
                pos = self._generate_position(anchor, self.counter)
            else:
                deps = [list(self.elems[elem].ins_dot)]
        op = {
            "anchor": anchor,
            "arg": arg,
            "deps": sorted(deps, key=lambda rc: (rc[1], rc[0])),
            "dot": [dot[0], dot[1]],
            "id": elem,
            "kind": kind,
            "pos": [list(t) for t in pos] if pos is not None else None,
        }
        self.delivered.add(*dot)
        self._apply(op, snapshot)
        msg = {"ctx": snapshot.wire(), "op": op, "origin": self.replica}
        syncs = [
            {"dest": d, "msg": msg} for d in range(self.n) if d != self.replica
        ]
        return {"accepted": True, "syncs": syncs, "type": "Ack"}

    def _check_request_shape(self, req: dict):
        kind = req.get("kind")
        kinds = _RPQ_KINDS if self.data_type == RPQ else _LIST_KINDS
        if kind not in kinds:
            raise ProtocolViolation(f"kind {kind!r} not valid for {self.data_type}")
        elem = req.get("id")
        if not isinstance(elem, str) or not elem:
            raise ProtocolViolation("request id must be a non-empty string")
        arg = req.get("arg")
        if kind in ("add", "increase", "insert", "update"):
            if not isinstance(arg, int):
                raise ProtocolViolation(f"{kind} requires an integer arg")
        else:
            arg = None
        anchor = req.get("anchor")
        if kind != "insert":
            anchor = None
        elif anchor is not None and not isinstance(anchor, str):
            raise ProtocolViolation("insert anchor must be a string or null")
        return kind, elem, arg, anchor

    def _rejection(self, kind: str, elem: str, anchor) -> str | None:
        if self.data_type == RPQ:
            return None
        if kind == "insert":
            if elem in self.elems:
                return "id in use"
            if anchor is not None:
                e = self.elems.get(anchor)
                if e is None or not self._list_existent(e):
                    return "anchor not existent here"
            return None
        if elem not in self.elems:
            return "id never seen here"
        return None

    # -- sync delivery ---------------------------------------------------

    def _handle_sync(self, msg) -> dict:
        if not isinstance(msg, dict):
            raise ProtocolViolation("Sync frame carries no message object")
        op, ctx = self._check_sync_shape(msg)
        dot = (op["dot"][0], op["dot"][1])
        if self.delivered.has(*dot):
            raise DuplicateDelivery(
                f"dot {dot} delivered twice at replica {self.replica}"
            )
        self.delivered.add(*dot)
        if self.bug2:
            if self._deps_applied(op):
                self._apply(op, ctx)
            else:
                # Assume-causal handling: the dot is consumed, the
                # effect is gone.
                self.applied.add(*dot)
            return {"accepted": True, "syncs": [], "type": "Ack"}
        if self._deps_applied(op):
            self._apply(op, ctx)
        elif self.bug1 and op["kind"] == "readd":
            self._materialize_ghost(op, ctx)
        elif (
            self.bug4
            and self.data_type == LIST
            and op["kind"] in ("update", "remove", "readd")
        ):
            self._materialize_dummy(op, ctx)
            self._apply(op, ctx)
        else:
            self.pending[dot] = (op, ctx)
        self._flush()
        return {"accepted": True, "syncs": [], "type": "Ack"}

    def _check_sync_shape(self, msg: dict):
        op = msg.get("op")
        if not isinstance(op, dict):
            raise ProtocolViolation("sync message has no operation")
        dot = op.get("dot")
        if (
            not isinstance(dot, list)
            or len(dot) != 2
            or not all(isinstance(x, int) for x in dot)
        ):
            raise ProtocolViolation("operation dot must be [replica, counter]")
        kinds = _RPQ_KINDS if self.data_type == RPQ else _LIST_KINDS
        if op.get("kind") not in kinds:
            raise ProtocolViolation(
                f"kind {op.get('kind')!r} not valid for {self.data_type}"
            )
        if not isinstance(op.get("id"), str):
            raise ProtocolViolation("operation id must be a string")
        deps = op.get("deps", [])
        if not isinstance(deps, list) or not all(
            isinstance(d, list) and len(d) == 2 for d in deps
        ):
            raise ProtocolViolation("operation deps must be [replica, counter] pairs")
        if op["kind"] == "insert":
            pos = op.get("pos")
            if not isinstance(pos, list) or not pos:
                raise ProtocolViolation("insert carries no position")
        ctx_obj = msg.get("ctx")
        if not isinstance(ctx_obj, dict):
            raise ProtocolViolation("sync message has no context")
        return op, _Ctx.from_wire(ctx_obj)

    def _deps_applied(self, op: dict) -> bool:
        return all(self.applied.has(r, c) for r, c in op.get("deps", []))

    def _flush(self) -> None:
        while True:
            ready = None
            for dot in sorted(self.pending, key=_dot_order):
                op, ctx = self.pending[dot]
                if self._deps_applied(op):
                    ready = dot
                    break
            if ready is None:
                return
            op, ctx = self.pending.pop(ready)
            self._apply(op, ctx)

    # -- effects -----------------------------------------------------------

    def _apply(self, op: dict, ctx: _Ctx) -> None:
        dot = (op["dot"][0], op["dot"][1])
        self.applied.add(*dot)
        kind = op["kind"]
        elem = op["id"]
        if self.data_type == RPQ:
            e = self.elems.get(elem)
            if e is None:
                e = self.elems[elem] = _RpqElem()
            if kind == "add":
                e.adds.append(_Rec(dot, op["arg"], ctx, _survives(ctx, e.rems)))
            elif kind == "increase":
                e.incs.append(_Rec(dot, op["arg"], ctx, _survives(ctx, e.rems)))
            else:  # remove
                e.rems.append(dot)
                for rec in e.adds:
                    if rec.alive and not rec.ctx.has(*dot):
                        rec.alive = False
                for rec in e.incs:
                    if rec.alive and not rec.ctx.has(*dot):
                        rec.alive = False
            return
        if kind == "insert":
            if elem in self.elems:
                return  # the first applied insert owns the element
            pos = tuple((d, r, c) for d, r, c in op["pos"])
            self._index_insert(pos, elem)
            self.elems[elem] = _ListElem(dot, pos, op["arg"], ctx)
            return
        e = self.elems.get(elem)
        if e is None:
            raise ProtocolViolation(
                f"{kind} for {elem!r} applied before its insert"
            )
        if kind == "update":
            e.upds.append(_Rec(dot, op["arg"], ctx, _survives(ctx, e.rems)))
        elif kind == "readd":
            e.readds.append(_Rec(dot, None, ctx, _survives(ctx, e.rems)))
        else:  # remove
            e.rems.append(dot)
            if e.ins_alive and not e.ins_ctx.has(*dot):
                e.ins_alive = False
            for rec in e.upds:
                if rec.alive and not rec.ctx.has(*dot):
                    rec.alive = False
            for rec in e.readds:
                if rec.alive and not rec.ctx.has(*dot):
                    rec.alive = False

    def _materialize_ghost(self, op: dict, ctx: _Ctx) -> None:
        """bug1: accept a re-add for an element nobody inserted here."""
        self.ghost_count += 1
        last = None
        for _key, pos, elem in reversed(self.by_pos):
            if self._list_existent(self.elems[elem]):
                last = pos
                break
        pos = _gen_pos(last, None, self.replica,
                       _GHOST_COUNTER_FLOOR + self.ghost_count)
        dot = (op["dot"][0], op["dot"][1])
        self.applied.add(*dot)
        self._index_insert(pos, op["id"])
        self.elems[op["id"]] = _ListElem(dot, pos, 0, ctx, ghost=True)

    def _materialize_dummy(self, op: dict, ctx: _Ctx) -> None:
        """bug4: fabricate a placeholder instead of buffering."""
        if op["id"] in self.elems:
            return
        pos = ((BASE, 0, 0),)
        dot = (op["dot"][0], op["dot"][1])
        self._index_insert(pos, op["id"])
        self.elems[op["id"]] = _ListElem(dot, pos, 0, ctx, ghost=True)

    # -- position index ----------------------------------------------------

    def _index_key(self, pos):
        if self.bug7:
            return tuple((d, -r, -c) for d, r, c in pos)
        return pos

    def _index_insert(self, pos, elem: str) -> None:
        insort(self.by_pos, (self._index_key(pos), pos, elem))

    def _generate_position(self, anchor, counter: int):
        ordered = [
            (key, pos) for key, pos, elem in self.by_pos
            if self._list_existent(self.elems[elem])
        ]
        if anchor is None:
            left = None
            right = ordered[0][1] if ordered else None
        else:
            left = self.elems[anchor].pos
            left_key = self._index_key(left)
            right = None
            for key, pos in ordered:
                if key > left_key:
                    right = pos
                    break
        return _gen_pos(left, right, self.replica, counter)

    # -- read side -----------------------------------------------------------

    def _rpq_winner(self, elem: str):
        e = self.elems.get(elem)
        if e is None:
            return None
        alive = [rec for rec in e.adds if rec.alive]
        if not alive:
            return None
        return max(alive, key=lambda rec: _dot_order(rec.dot)).dot

    def _list_existent(self, e: _ListElem) -> bool:
        return e.ins_alive or any(rec.alive for rec in e.readds)

    def canonical_state(self) -> str:
        elements: dict = {}
        if self.data_type == RPQ:
            for elem, e in self.elems.items():
                alive = [rec for rec in e.adds if rec.alive]
                if alive:
                    win = max(alive, key=lambda rec: _dot_order(rec.dot))
                    value = win.val + sum(rec.val for rec in e.incs if rec.alive)
                    elements[elem] = {
                        "add_dot": [win.dot[0], win.dot[1]],
                        "existence": "existent",
                        "value": value,
                    }
                elif e.adds:
                    last = max(e.adds, key=lambda rec: _dot_order(rec.dot))
                    elements[elem] = {
                        "add_dot": [last.dot[0], last.dot[1]],
                        "existence": "once-existent",
                        "value": None,
                    }
                else:
                    elements[elem] = {
                        "add_dot": None,
                        "existence": "non-existent",
                        "value": None,
                    }
        else:
            for elem, e in self.elems.items():
                existent = self._list_existent(e)
                pairs = [(_dot_order(e.ins_dot), e.base_attr)]
                pairs += [
                    (_dot_order(rec.dot), rec.val) for rec in e.upds if rec.alive
                ]
                attr = max(pairs)[1]
                elements[elem] = {
                    "add_dot": [e.ins_dot[0], e.ins_dot[1]],
                    "attr": attr if existent else None,
                    "existence": "existent" if existent else "once-existent",
                    "pos": [list(t) for t in e.pos],
                }
        doc = {
            "ctx": self.applied.wire(),
            "elements": elements,
            "type": self.data_type,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def serve_connection(server: ReplicaServer, sock) -> None:
    """Run one lockstep session over a connected socket until Shutdown
    or end-of-stream.  Errors answer with an Error frame; the session
    continues, leaving the driver to decide what to do with a broken
    replica."""
    from .errors import CrdtCheckError
    from .wire import FrameSocket

    fs = FrameSocket(sock)
    while True:
        obj = fs.recv()
        if obj is None:
            return
        try:
            reply = server.handle_frame(obj)
        except CrdtCheckError as exc:
            fs.send({"error": str(exc), "type": "Error"})
            continue
        fs.send(reply)
        if obj.get("type") == "Shutdown":
            return
