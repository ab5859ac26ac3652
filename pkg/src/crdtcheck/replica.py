"""Replica state machines for the two replicated data types.

Both data types — a priority queue with add / increase / remove, and an
ordered list with insert / update / remove / re-add — share one
conflict-resolution recipe:

- every applied operation is kept as a record alongside the causal
  context its origin had when issuing it;
- the visible state of an element is a pure function of the set of
  applied records, so replicas that applied the same dots render the
  same bytes no matter the delivery order;
- removes win: a record survives a remove only if the remove's dot was
  already in the record's context, i.e. the record's author had seen
  the remove.  Anything concurrent with (or earlier than) a remove is
  dead.

Out-of-order delivery is handled by *buffering*, not by assuming a
causal channel: an incoming operation whose dependency dots are not all
applied yet sits in a pending buffer until they are, and the buffer is
flushed transitively after every apply.  The ``causal-assuming``
strategy is the deliberately unsafe variant: it skips the dependency
check and silently discards an operation whose prerequisites are
missing, which is only correct when the transport already delivers
causally.

## Invariants

- delivery-once: a dot is applied at most once per replica; handing the
  same sync message in twice raises ``DuplicateDelivery``.
- strong convergence: equal applied dot sets imply byte-identical
  ``normalize()`` output.
- position stability: a list element's position is fixed by its
  original insert; re-add never reassigns it.
- buffer liveness: once every broadcast message has been delivered, the
  pending buffer drains (dependencies only ever name dots broadcast
  earlier).

Bug injection: ``bug1-readd-accept`` makes a re-add with missing
dependencies take effect immediately, fabricating a position for the
element it has never seen; the original insert, arriving later, is
ignored.  The flag exists so the explorer can demonstrate that the
checker catches the divergence this causes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum

from .dots import CausalContext, Dot
from .errors import DuplicateDelivery, UnknownElement
from .operations import LIST, RPQ, Operation, OperationRequest, SyncMessage
from .positions import Position, generate_between, position_wire

STANDARD = "standard"
CAUSAL_ASSUMING = "causal-assuming"

BUG_READD_ACCEPT = "bug1-readd-accept"
BUG_ASSUME_CAUSAL = "bug2-assume-causal"

# Fabricated positions get counters far above any real dot counter so
# they never collide with origin-generated position stamps.
_BUG_NONCE_FLOOR = 1_000_000


class Existence(Enum):
    NON_EXISTENT = "non-existent"
    EXISTENT = "existent"
    ONCE_EXISTENT = "once-existent"


@dataclass(frozen=True, slots=True)
class AddRec:
    dot: Dot
    value: int
    ctx: CausalContext


@dataclass(frozen=True, slots=True)
class IncRec:
    dot: Dot
    delta: int
    ctx: CausalContext


@dataclass(frozen=True, slots=True)
class RemRec:
    dot: Dot
    ctx: CausalContext


@dataclass(frozen=True, slots=True)
class InsRec:
    dot: Dot
    pos: Position
    attr: int
    ctx: CausalContext
    ghost: bool = False  # fabricated by bug1, not by a real insert


@dataclass(frozen=True, slots=True)
class UpdRec:
    dot: Dot
    attr: int
    ctx: CausalContext


@dataclass(frozen=True, slots=True)
class RpqOps:
    adds: tuple[AddRec, ...] = ()
    incs: tuple[IncRec, ...] = ()
    rems: tuple[RemRec, ...] = ()

    def canonical(self) -> tuple:
        return (
            tuple(sorted((a.dot.key(), a.value, a.ctx.canonical()) for a in self.adds)),
            tuple(sorted((i.dot.key(), i.delta, i.ctx.canonical()) for i in self.incs)),
            tuple(sorted((r.dot.key(), r.ctx.canonical()) for r in self.rems)),
        )


@dataclass(frozen=True, slots=True)
class ListOps:
    ins: InsRec | None = None
    upds: tuple[UpdRec, ...] = ()
    rems: tuple[RemRec, ...] = ()
    readds: tuple[RemRec, ...] = ()  # same shape as a remove record: dot + ctx

    def canonical(self) -> tuple:
        ins = self.ins
        return (
            (ins.dot.key(), ins.pos, ins.attr, ins.ctx.canonical(), ins.ghost) if ins else None,
            tuple(sorted((u.dot.key(), u.attr, u.ctx.canonical()) for u in self.upds)),
            tuple(sorted((r.dot.key(), r.ctx.canonical()) for r in self.rems)),
            tuple(sorted((r.dot.key(), r.ctx.canonical()) for r in self.readds)),
        )


@dataclass(frozen=True, slots=True)
class RpqView:
    existence: Existence
    value: int | None
    add_dot: Dot | None


@dataclass(frozen=True, slots=True)
class ListView:
    existence: Existence
    attr: int
    pos: Position
    add_dot: Dot


def _survives(ctx: CausalContext, rems: tuple[RemRec, ...]) -> bool:
    """Remove-win kill rule: the record lives iff it saw every remove."""
    return all(ctx.contains(r.dot) for r in rems)


def rpq_view(ops: RpqOps) -> RpqView:
    alive = [a for a in ops.adds if _survives(a.ctx, ops.rems)]
    if alive:
        win = max(alive, key=lambda a: a.dot)
        total = win.value + sum(
            i.delta for i in ops.incs if _survives(i.ctx, ops.rems)
        )
        return RpqView(Existence.EXISTENT, total, win.dot)
    if ops.adds:
        last = max(ops.adds, key=lambda a: a.dot)
        return RpqView(Existence.ONCE_EXISTENT, None, last.dot)
    return RpqView(Existence.NON_EXISTENT, None, None)


def list_view(ops: ListOps) -> ListView:
    ins = ops.ins
    assert ins is not None, "list records only exist once their insert applied"
    alive = _survives(ins.ctx, ops.rems) or any(
        _survives(x.ctx, ops.rems) for x in ops.readds
    )
    candidates = [(ins.dot, ins.attr)] + [
        (u.dot, u.attr) for u in ops.upds if _survives(u.ctx, ops.rems)
    ]
    _, attr = max(candidates)
    existence = Existence.EXISTENT if alive else Existence.ONCE_EXISTENT
    return ListView(existence, attr, ins.pos, ins.dot)


@dataclass(frozen=True, slots=True)
class ReplicaState:
    """One replica's full state.  All transitions return a new state."""

    data_type: str
    replica: int
    counter: int = 0
    elems: dict = field(default_factory=dict)  # elem id -> RpqOps | ListOps
    pending: dict = field(default_factory=dict)  # Dot -> SyncMessage
    delivered: CausalContext = field(default_factory=CausalContext)
    applied: CausalContext = field(default_factory=CausalContext)
    strategy: str = STANDARD
    bug_flags: frozenset = frozenset()
    bug_nonce: int = 0

    # -- client side -------------------------------------------------

    def request_error(self, req: OperationRequest) -> str | None:
        """Why this client request must be rejected, or None if valid."""
        if self.data_type == RPQ:
            return None  # every priority-queue request is total
        if req.kind == "insert":
            if req.elem in self.elems:
                return f"id {req.elem!r} already in use"
            if req.anchor is not None:
                anchor = self.elems.get(req.anchor)
                if anchor is None or list_view(anchor).existence is not Existence.EXISTENT:
                    return f"anchor {req.anchor!r} not resolvable"
            return None
        if req.elem not in self.elems:
            return f"id {req.elem!r} never seen here"
        return None

    def issue(self, req: OperationRequest) -> tuple["ReplicaState", SyncMessage]:
        """Apply a client request locally and produce its sync message.

        Raises ``UnknownElement`` for requests that reference ids or
        anchors this replica cannot resolve; rejected requests change
        nothing and broadcast nothing.
        """
        err = self.request_error(req)
        if err is not None:
            raise UnknownElement(err)
        snapshot = self.delivered
        dot = Dot(self.counter + 1, self.replica)
        op = self._stamp(req, dot)
        state = replace(
            self,
            counter=self.counter + 1,
            delivered=self.delivered.add(dot),
            applied=self.applied.add(dot),
            elems=self._effect(op, snapshot),
        )
        return state, SyncMessage(origin=self.replica, op=op, ctx=snapshot)

    def _stamp(self, req: OperationRequest, dot: Dot) -> Operation:
        deps: frozenset[Dot] = frozenset()
        pos: Position | None = None
        if self.data_type == RPQ:
            if req.kind in ("increase", "remove"):
                view = rpq_view(self.elems[req.elem]) if req.elem in self.elems else None
                if view is not None and view.existence is Existence.EXISTENT:
                    deps = frozenset([view.add_dot])
        else:
            if req.kind == "insert":
                pos = self._position_after(req.anchor, dot)
            else:
                deps = frozenset([self.elems[req.elem].ins.dot])
        return Operation(kind=req.kind, elem=req.elem, dot=dot, arg=req.arg,
                         anchor=req.anchor, pos=pos, deps=deps)

    def _position_after(self, anchor: str | None, dot: Dot) -> Position:
        """Generate a position between the anchor and its visible successor."""
        existing = sorted(
            v.pos for v in (list_view(o) for o in self.elems.values())
            if v.existence is Existence.EXISTENT
        )
        left = None
        if anchor is not None:
            left = list_view(self.elems[anchor]).pos
        right = next((p for p in existing if left is None or p > left), None)
        return generate_between(left, right, self.replica, dot.counter)

    # -- remote side -------------------------------------------------

    def deliver(self, msg: SyncMessage) -> "ReplicaState":
        """Handle one incoming sync message.

        Standard strategy: apply if the dependencies are met, buffer
        otherwise, then flush the buffer to a fixpoint.  Causal-assuming
        strategy: never buffer; unmet dependencies mean the operation is
        mishandled on the spot.
        """
        dot = msg.op.dot
        if self.delivered.contains(dot):
            raise DuplicateDelivery(f"dot {dot} delivered twice at replica {self.replica}")
        state = replace(self, delivered=self.delivered.add(dot))
        if self.strategy == CAUSAL_ASSUMING or BUG_ASSUME_CAUSAL in self.bug_flags:
            return state._apply_now_or_mangle(msg)
        if self._deps_met(msg.op):
            state = state._apply(msg)
        elif BUG_READD_ACCEPT in self.bug_flags and msg.op.kind == "readd":
            state = state._bug_materialize_readd(msg)
        else:
            pending = dict(state.pending)
            pending[dot] = msg
            state = replace(state, pending=pending)
        return state._flush()

    def _deps_met(self, op: Operation) -> bool:
        return all(self.applied.contains(d) for d in op.deps)

    def _apply(self, msg: SyncMessage) -> "ReplicaState":
        return replace(
            self,
            applied=self.applied.add(msg.op.dot),
            elems=self._effect(msg.op, msg.ctx),
        )

    def _apply_now_or_mangle(self, msg: SyncMessage) -> "ReplicaState":
        """Causal-assuming handling: no buffer, missing deps lose the op."""
        if self._deps_met(msg.op):
            return self._apply(msg)
        # The operation is "processed" — its dot counts as handled — but
        # its effect is dropped.  This is exactly the misbehaviour a
        # causal-delivery assumption hides.
        return replace(self, applied=self.applied.add(msg.op.dot))

    def _bug_materialize_readd(self, msg: SyncMessage) -> "ReplicaState":
        """bug1: accept a re-add whose insert never arrived.

        The element springs into existence with a locally fabricated
        position; the real insert is ignored when it shows up.
        """
        nonce = self.bug_nonce + 1
        existing = sorted(
            v.pos for v in (list_view(o) for o in self.elems.values())
            if v.existence is Existence.EXISTENT
        )
        pos = generate_between(existing[-1] if existing else None, None,
                               self.replica, _BUG_NONCE_FLOOR + nonce)
        elems = dict(self.elems)
        elems[msg.op.elem] = ListOps(
            ins=InsRec(dot=msg.op.dot, pos=pos, attr=0, ctx=msg.ctx, ghost=True),
        )
        return replace(self, applied=self.applied.add(msg.op.dot),
                       elems=elems, bug_nonce=nonce)

    def _flush(self) -> "ReplicaState":
        """Drain every buffered operation whose dependencies are now met."""
        state = self
        progress = True
        while progress and state.pending:
            progress = False
            for dot in sorted(state.pending):
                msg = state.pending[dot]
                if state._deps_met(msg.op):
                    pending = dict(state.pending)
                    del pending[dot]
                    state = replace(state._apply(msg), pending=pending)
                    progress = True
                    break
        return state

    # -- effects -----------------------------------------------------

    def _effect(self, op: Operation, ctx: CausalContext) -> dict:
        elems = dict(self.elems)
        if self.data_type == RPQ:
            ops = elems.get(op.elem, RpqOps())
            if op.kind == "add":
                ops = replace(ops, adds=ops.adds + (AddRec(op.dot, op.arg, ctx),))
            elif op.kind == "increase":
                ops = replace(ops, incs=ops.incs + (IncRec(op.dot, op.arg, ctx),))
            elif op.kind == "remove":
                ops = replace(ops, rems=ops.rems + (RemRec(op.dot, ctx),))
            else:
                raise ValueError(f"bad kind {op.kind!r} for rpq")
            elems[op.elem] = ops
            return elems
        ops = elems.get(op.elem)
        if op.kind == "insert":
            if ops is not None:
                # Either a bug fabricated this element (the late insert is
                # ignored — that is the bug) or a duplicate id arrived; the
                # first applied insert keeps the position either way.
                return elems
            elems[op.elem] = ListOps(ins=InsRec(op.dot, op.pos, op.arg, ctx))
            return elems
        assert ops is not None, "deps guarantee the insert applied first"
        if op.kind == "update":
            ops = replace(ops, upds=ops.upds + (UpdRec(op.dot, op.arg, ctx),))
        elif op.kind == "remove":
            ops = replace(ops, rems=ops.rems + (RemRec(op.dot, ctx),))
        elif op.kind == "readd":
            ops = replace(ops, readds=ops.readds + (RemRec(op.dot, ctx),))
        else:
            raise ValueError(f"bad kind {op.kind!r} for list")
        elems[op.elem] = ops
        return elems

    # -- derived views -----------------------------------------------

    def views(self) -> dict:
        if self.data_type == RPQ:
            return {e: rpq_view(o) for e, o in self.elems.items()}
        return {e: list_view(o) for e, o in self.elems.items()}

    def query(self):
        """Reader-facing value: rpq — the max-value existent element
        (ties broken by smaller id); list — existent (id, attr) pairs in
        position order."""
        views = self.views()
        if self.data_type == RPQ:
            best = None
            for elem in sorted(views):  # ascending ids: ties keep the smaller
                v = views[elem]
                if v.existence is Existence.EXISTENT:
                    if best is None or v.value > best[1]:
                        best = (elem, v.value)
            return best
        existent = [(v.pos, e, v.attr) for e, v in views.items()
                    if v.existence is Existence.EXISTENT]
        return [(e, attr) for _, e, attr in sorted(existent)]

    def normalize(self) -> bytes:
        """Canonical form: sorted-key JSON, UTF-8, no whitespace.

        Contains the per-element views plus the applied-dot context, and
        deliberately nothing else — not the local counter, not the
        pending buffer, not the record store — so replicas that applied
        the same dots serialize identically.
        """
        elements = {}
        for elem, v in sorted(self.views().items()):
            if self.data_type == RPQ:
                elements[elem] = {
                    "add_dot": v.add_dot.as_wire() if v.add_dot else None,
                    "existence": v.existence.value,
                    "value": v.value,
                }
            else:
                elements[elem] = {
                    "add_dot": v.add_dot.as_wire(),
                    "attr": v.attr if v.existence is Existence.EXISTENT else None,
                    "existence": v.existence.value,
                    "pos": position_wire(v.pos),
                }
        doc = {"ctx": self.applied.as_wire(), "elements": elements, "type": self.data_type}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")

    # -- identity ----------------------------------------------------

    def canonical_key(self) -> tuple:
        """Full-fidelity identity for state-space deduplication.

        Unlike ``normalize`` this keeps everything that can influence a
        future transition: record stores with their context snapshots,
        the pending buffer contents, both causal contexts, the counter.
        Buffer *ordering* still does not matter.
        """
        return (
            self.counter,
            self.delivered.canonical(),
            self.applied.canonical(),
            tuple(sorted((e, o.canonical()) for e, o in self.elems.items())),
            tuple(sorted((d.key(), m.canonical()) for d, m in self.pending.items())),
            self.bug_nonce,
        )


def fresh_replica(data_type: str, replica: int, strategy: str = STANDARD,
                  bug_flags: frozenset | None = None) -> ReplicaState:
    return ReplicaState(
        data_type=data_type,
        replica=replica,
        strategy=strategy,
        bug_flags=bug_flags or frozenset(),
    )
