from __future__ import annotations

from ..dyadic import ceil_lg
from .messages import BitWriter, Kind, Message, write_scalars


class ProtocolError(RuntimeError):
    pass


class Custodian:
    """Holder of one POVM.  Reacts to leader messages; never talks to other custodians."""

    def __init__(self, index: int, source):
        self.index = index
        self.source = source
        self.t0 = None
        self.k0 = None
        self.reuse = True
        self.sent: dict[int, int] = {}  # element j -> precision already sent
        self.assigned: int | None = None
        self.output: int | None = None
        self.finished = False

    @property
    def outcome_bits(self) -> int:
        return ceil_lg(self.source.count)

    def hello(self) -> Message:
        return (
            BitWriter()
            .write(self.source.count, 32)
            .write(self.source.dim, 32)
            .write(int(self.source.truncation_capable), 1)
            .message(Kind.ANNOUNCE_OUTCOME_COUNT, self.index)
        )

    def handle(self, msg: Message) -> list[Message]:
        r = msg.reader()
        kind = msg.kind
        if kind is Kind.SET_T0:
            self.t0 = r.read(32)
            self.k0 = k = r.read(32)
            self.reuse = bool(r.read(1))
            r.done()
            for j in range(self.source.count):
                self.sent[j] = k
            memo = getattr(self.source, "payload_memo", None)
            if memo is not None and k in memo:
                value, nbits = memo[k]
                return [Message(Kind.INITIAL_TRUNCATIONS, self.index, value, nbits)]
            w = BitWriter()
            capable = self.source.truncation_capable
            for j in range(self.source.count):
                scalars = self.source.truncation(j, k) if capable else self.source.approximation(j, k)
                write_scalars(w, scalars, k)
            if memo is not None:
                memo[k] = (w.value, w.nbits)
            return [w.message(Kind.INITIAL_TRUNCATIONS, self.index)]
        if kind is Kind.OUTCOME_ASSIGNED:
            self.assigned = r.read(self.outcome_bits)
            r.done()
            if self.assigned >= self.source.count:
                raise ProtocolError(f"outcome {self.assigned} out of range")
            if not self.reuse:
                self.sent[self.assigned] = self.k0
            return []
        if kind in (Kind.REQUEST_ONE_MORE_BIT, Kind.REQUEST_FRESH_APPROXIMATION):
            r.read(1)
            r.done()
            j = self.assigned
            if j is None:
                raise ProtocolError("refinement requested before an outcome was assigned")
            k = self.sent[j] + 1
            self.sent[j] = k
            w = BitWriter()
            if kind is Kind.REQUEST_ONE_MORE_BIT and self.source.truncation_capable:
                for _, mag in self.source.truncation(j, k):
                    w.write(mag & 1, 1)
                return [w.message(Kind.REFINEMENT_BITS, self.index)]
            write_scalars(w, self.source.approximation(j, k), k)
            return [w.message(Kind.APPROXIMATION_PAYLOAD, self.index)]
        if kind is Kind.FINAL_OUTPUT:
            r.read(1)
            r.done()
            self.output = self.assigned
            self.finished = True
            return []
        raise ProtocolError(f"custodian cannot handle {kind.name}")
