"""Leader/custodian protocol for remote sampling, with exact bit metering."""
from __future__ import annotations

from ..quantum import Scenario
from ..randomness import BitSource
from .custodian import Custodian, ProtocolError
from .leader import Leader, LeaderCache, RunRecord, T0Policy, t0_default
from .messages import Kind, Message, decode
from .meter import BitMeter
from .sources import ExactDyadicSource, FunctionSource, LoggedSource, source_for
from .transport import InMemoryTransport, SocketTransport, TransportError

TRANSPORTS = ("memory", "socket")


def make_transport(custodians, kind: str = "memory", wire: bool = True):
    if kind == "memory":
        return InMemoryTransport(custodians, wire=wire)
    if kind == "socket":
        return SocketTransport.local(custodians)
    raise ValueError(f"unknown transport {kind!r}")


def run_protocol(
    scenario: Scenario,
    t0_policy=None,
    src=None,
    transport: str = "memory",
    *,
    mode: str = "truncation",
    model: str = "discrete",
    reuse: bool = True,
    cache: LeaderCache | None = None,
    sources=None,
    keep_transcript: bool = True,
    wire: bool | None = None,
    **leader_opts,
) -> tuple[tuple, RunRecord]:
    """One protocol run: custodian i gets only POVM i, the leader only rho.

    ``sources`` overrides the per-custodian parameter sources (for instance
    to log or fault-inject accesses, or to share their memo across runs).
    ``wire`` (default: same as ``keep_transcript``) makes the in-memory
    transport encode and decode every frame.  Returns the joint outcome and the run
    record; raises :class:`ProtocolError` if a custodian's output disagrees.
    """
    if src is None:
        src = BitSource(0)
    if sources is None:
        sources = [source_for(p) for p in scenario.povms]
    custodians = [Custodian(i, s) for i, s in enumerate(sources)]
    if wire is None:
        wire = keep_transcript
    link = make_transport(custodians, transport, wire)
    try:
        leader = Leader(
            scenario.rho,
            link,
            t0_policy=t0_policy,
            mode=mode,
            model=model,
            reuse=reuse,
            cache=cache,
            keep_transcript=keep_transcript,
            **leader_opts,
        )
        record = leader.run(src)
    finally:
        link.close()
    record.custodian_outputs = [c.output for c in custodians]
    if tuple(record.custodian_outputs) != record.outcome:
        raise ProtocolError(f"custodians output {record.custodian_outputs}, leader sampled {record.outcome}")
    return record.outcome, record


__all__ = [
    "BitMeter",
    "Custodian",
    "ExactDyadicSource",
    "FunctionSource",
    "Kind",
    "Leader",
    "LeaderCache",
    "LoggedSource",
    "Message",
    "ProtocolError",
    "RunRecord",
    "SocketTransport",
    "InMemoryTransport",
    "T0Policy",
    "TRANSPORTS",
    "TransportError",
    "decode",
    "make_transport",
    "run_protocol",
    "source_for",
    "t0_default",
]
