"""Client requests, broadcast operations, and sync messages.

A *request* is what a client hands to one replica: just the kind and its
arguments.  The replica that accepts a request stamps it into an
*operation*: the request plus the fresh dot, the dependency dots that
must be applied before the operation may take effect elsewhere, and —
for list inserts — the position generated at the origin, so that no
other replica ever re-derives it.  A *sync message* wraps the operation
with its origin and the origin's causal context snapshot from just
before the request was applied; the snapshot is what remote replicas
use to decide which operations were concurrent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dots import CausalContext, Dot
from .positions import Position, position_from_wire, position_wire

RPQ = "rpq"
LIST = "list"

RPQ_KINDS = ("add", "increase", "remove")
LIST_KINDS = ("insert", "update", "remove", "readd")


@dataclass(frozen=True, slots=True)
class OperationRequest:
    kind: str
    elem: str
    arg: int | None = None
    anchor: str | None = None  # list insert only; None means list head

    def sort_key(self) -> tuple:
        return (self.kind, self.elem, self.arg if self.arg is not None else -1,
                self.anchor if self.anchor is not None else "")

    def as_wire(self) -> dict:
        return {"anchor": self.anchor, "arg": self.arg, "id": self.elem, "kind": self.kind}

    @staticmethod
    def from_wire(obj: dict) -> "OperationRequest":
        return OperationRequest(
            kind=obj["kind"],
            elem=obj["id"],
            arg=obj.get("arg"),
            anchor=obj.get("anchor"),
        )


@dataclass(frozen=True, slots=True)
class Operation:
    kind: str
    elem: str
    dot: Dot
    arg: int | None = None
    anchor: str | None = None
    pos: Position | None = None  # origin-generated, list insert only
    deps: frozenset[Dot] = field(default_factory=frozenset)

    def as_wire(self) -> dict:
        return {
            "anchor": self.anchor,
            "arg": self.arg,
            "deps": [d.as_wire() for d in sorted(self.deps)],
            "dot": self.dot.as_wire(),
            "id": self.elem,
            "kind": self.kind,
            "pos": position_wire(self.pos) if self.pos is not None else None,
        }

    @staticmethod
    def from_wire(obj: dict) -> "Operation":
        return Operation(
            kind=obj["kind"],
            elem=obj["id"],
            dot=Dot.of(*obj["dot"]),
            arg=obj.get("arg"),
            anchor=obj.get("anchor"),
            pos=position_from_wire(obj["pos"]) if obj.get("pos") is not None else None,
            deps=frozenset(Dot.of(r, c) for r, c in obj.get("deps", [])),
        )

    def canonical(self) -> tuple:
        return (self.kind, self.elem, self.dot.key(), self.arg, self.anchor, self.pos,
                tuple(sorted(d.key() for d in self.deps)))


@dataclass(frozen=True, slots=True)
class SyncMessage:
    origin: int
    op: Operation
    ctx: CausalContext  # origin's delivered set just before the op

    def as_wire(self) -> dict:
        return {"ctx": self.ctx.as_wire(), "op": self.op.as_wire(), "origin": self.origin}

    @staticmethod
    def from_wire(obj: dict) -> "SyncMessage":
        return SyncMessage(
            origin=int(obj["origin"]),
            op=Operation.from_wire(obj["op"]),
            ctx=CausalContext.from_wire(obj["ctx"]),
        )

    def canonical(self) -> tuple:
        return (self.origin, self.op.canonical(), self.ctx.canonical())

    def __hash__(self) -> int:
        return hash(self.canonical())
