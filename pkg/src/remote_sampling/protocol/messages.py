"""Protocol messages and their wire format.

A frame on the wire is::

    length      4 bytes, little-endian: byte count of everything after it
    kind        1 byte
    custodian   2 bytes, little-endian
    nbits       4 bytes, little-endian: payload length in bits
    payload     ceil(nbits / 8) bytes, bits packed MSB-first, zero padded

Only payload bits are metered; the 11 bytes of framing are reported apart.
Payload layouts per kind are documented on :class:`Kind`.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from ..dyadic import Dyadic

HEADER = struct.Struct("<BHI")
LENGTH = struct.Struct("<I")
FRAME_OVERHEAD_BITS = 8 * (LENGTH.size + HEADER.size)


class Kind(enum.IntEnum):
    """Message kinds.

    ANNOUNCE_OUTCOME_COUNT (custodian -> leader): n_i, d_i as 32-bit fields, then
        a bit set when the custodian can send prefix-consistent truncations.
    SET_T0 (leader -> custodian): t0 and entry precision k, 32 bits each, then
        a reuse bit (0 means refinements restart from k at every proposal).
    INITIAL_TRUNCATIONS (custodian -> leader): for each element j, each packed
        scalar as a sign bit then k magnitude bits.
    OUTCOME_ASSIGNED (leader -> custodian): X_i in ceil(lg n_i) bits.
    REQUEST_ONE_MORE_BIT (leader -> custodian): a single 1 bit.
    REFINEMENT_BITS (custodian -> leader): next magnitude bit of each packed
        scalar of M_{i X_i}, d_i^2 bits.
    REQUEST_FRESH_APPROXIMATION (leader -> custodian): a single 1 bit.
    APPROXIMATION_PAYLOAD (custodian -> leader): each packed scalar of
        M_{i X_i} as a sign bit then k' magnitude bits, k' one more than the
        precision previously sent for that matrix.
    FINAL_OUTPUT (leader -> custodian): a single 1 bit.
    """

    ANNOUNCE_OUTCOME_COUNT = 1
    SET_T0 = 2
    INITIAL_TRUNCATIONS = 3
    OUTCOME_ASSIGNED = 4
    REQUEST_ONE_MORE_BIT = 5
    REFINEMENT_BITS = 6
    REQUEST_FRESH_APPROXIMATION = 7
    APPROXIMATION_PAYLOAD = 8
    FINAL_OUTPUT = 9


_KINDS = {k.value: k for k in Kind}

TO_LEADER = frozenset(
    {Kind.ANNOUNCE_OUTCOME_COUNT, Kind.INITIAL_TRUNCATIONS, Kind.REFINEMENT_BITS, Kind.APPROXIMATION_PAYLOAD}
)


class FrameError(ValueError):
    pass


@dataclass(slots=True)
class Message:
    kind: Kind
    custodian: int
    payload: int  # payload bits as an integer, first bit most significant
    nbits: int

    @property
    def to_leader(self) -> bool:
        return self.kind in TO_LEADER

    @property
    def direction(self) -> str:
        return "custodian->leader" if self.to_leader else "leader->custodian"

    def encode(self) -> bytes:
        nbytes = (self.nbits + 7) // 8
        body = (self.payload << (8 * nbytes - self.nbits)).to_bytes(nbytes, "big") if nbytes else b""
        head = HEADER.pack(int(self.kind), self.custodian, self.nbits)
        return LENGTH.pack(len(head) + len(body)) + head + body

    def reader(self) -> BitReader:
        return BitReader(self.payload, self.nbits)


def decode(frame: bytes) -> Message:
    if len(frame) < LENGTH.size + HEADER.size:
        raise FrameError("short frame")
    (length,) = LENGTH.unpack_from(frame)
    if length != len(frame) - LENGTH.size:
        raise FrameError(f"length prefix {length} does not match frame size {len(frame)}")
    kind, custodian, nbits = HEADER.unpack_from(frame, LENGTH.size)
    body = frame[LENGTH.size + HEADER.size:]
    nbytes = (nbits + 7) // 8
    if len(body) != nbytes:
        raise FrameError(f"payload of {nbits} bits needs {nbytes} bytes, got {len(body)}")
    payload = int.from_bytes(body, "big") >> (8 * nbytes - nbits) if nbytes else 0
    try:
        kind = _KINDS[kind]
    except KeyError as exc:
        raise FrameError(f"unknown message kind {kind}") from exc
    return Message(kind, custodian, payload, nbits)


def read_frame(recv_exact) -> bytes:
    """Read one frame using ``recv_exact(n) -> bytes``."""
    head = recv_exact(LENGTH.size)
    (length,) = LENGTH.unpack(head)
    return head + recv_exact(length)


class BitWriter:
    __slots__ = ("value", "nbits")

    def __init__(self):
        self.value = 0
        self.nbits = 0

    def write(self, value: int, width: int) -> BitWriter:
        if value < 0 or value >> width:
            raise ValueError(f"{value} does not fit in {width} bits")
        self.value = (self.value << width) | value
        self.nbits += width
        return self

    def message(self, kind: Kind, custodian: int) -> Message:
        return Message(kind, custodian, self.value, self.nbits)


class BitReader:
    __slots__ = ("value", "left")

    def __init__(self, value: int, nbits: int):
        self.value = value
        self.left = nbits

    def read(self, width: int) -> int:
        if width > self.left:
            raise FrameError(f"payload underrun: wanted {width} bits, {self.left} left")
        self.left -= width
        out = self.value >> self.left
        self.value &= (1 << self.left) - 1
        return out

    def done(self):
        if self.left:
            raise FrameError(f"{self.left} unread payload bits")


def write_scalars(w: BitWriter, scalars, k: int) -> None:
    """Append ``(negative, magnitude)`` pairs as sign bit + ``k`` magnitude bits."""
    value, nbits = w.value, w.nbits
    top = 1 << k
    for neg, mag in scalars:
        if not 0 <= mag < top:
            raise ValueError(f"{mag} does not fit in {k} bits")
        value = (value << (k + 1)) | (top if neg else 0) | mag
        nbits += k + 1
    w.value, w.nbits = value, nbits


def read_scalars(r: BitReader, count: int, k: int) -> list[tuple[int, int]]:
    width = (k + 1) * count
    if width > r.left:
        raise FrameError(f"payload underrun: wanted {width} bits, {r.left} left")
    r.left -= width
    chunk = r.value >> r.left
    r.value &= (1 << r.left) - 1
    mask = (1 << k) - 1
    out = []
    for shift in range(width - k - 1, -1, -(k + 1)):
        v = chunk >> shift
        out.append(((v >> k) & 1, v & mask))
    return out


def scalar_value(neg: int, mag: int, k: int) -> Dyadic:
    return Dyadic(-mag if neg else mag, -k)
