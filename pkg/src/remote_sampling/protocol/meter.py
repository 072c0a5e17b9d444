"""Bit-exact communication accounting."""
from __future__ import annotations

from dataclasses import dataclass, field

from .messages import FRAME_OVERHEAD_BITS, TO_LEADER, Kind, Message

SETUP = "setup"
REFINEMENT = "refinement"
CONTROL = "control"

_PHASE = {
    Kind.ANNOUNCE_OUTCOME_COUNT: CONTROL,
    Kind.SET_T0: CONTROL,
    Kind.INITIAL_TRUNCATIONS: SETUP,
    Kind.OUTCOME_ASSIGNED: CONTROL,
    Kind.REQUEST_ONE_MORE_BIT: REFINEMENT,
    Kind.REFINEMENT_BITS: REFINEMENT,
    Kind.REQUEST_FRESH_APPROXIMATION: REFINEMENT,
    Kind.APPROXIMATION_PAYLOAD: REFINEMENT,
    Kind.FINAL_OUTPUT: CONTROL,
}


_DIRECTION = {k: ("custodian->leader" if k in TO_LEADER else "leader->custodian") for k in Kind}


@dataclass
class TranscriptRecord:
    direction: str
    kind: str
    custodian: int
    bits: int
    cumulative_z: int

    def to_json(self) -> dict:
        return vars(self).copy()


@dataclass
class RoundRecord:
    """One refinement step of one proposal, from precision ``t - 1`` to ``t``."""

    outcome: int
    t: int
    bits: int = 0
    contacted: list = field(default_factory=list)  # custodians asked this round
    saved: int = 0  # bits a full round would have cost for custodians served from cache


class BitMeter:
    """Counts payload bits per phase and direction; ``Z = setup + refinement``."""

    def __init__(self, keep_transcript: bool = True):
        self.phase = {SETUP: 0, REFINEMENT: 0, CONTROL: 0}
        self.direction = {"custodian->leader": 0, "leader->custodian": 0}
        self.framing = 0
        self.messages = 0
        self.rounds: list[RoundRecord] = []
        self._round: RoundRecord | None = None
        self.keep_transcript = keep_transcript
        self.transcript: list[TranscriptRecord] = []
        self.frames: list[bytes] = []

    @property
    def setup(self) -> int:
        return self.phase[SETUP]

    @property
    def refinement(self) -> int:
        return self.phase[REFINEMENT]

    @property
    def control(self) -> int:
        return self.phase[CONTROL]

    @property
    def z(self) -> int:
        return self.phase[SETUP] + self.phase[REFINEMENT]

    @property
    def saved(self) -> int:
        return sum(r.saved for r in self.rounds)

    def record(self, msg: Message, frame: bytes | None = None) -> None:
        phase = _PHASE[msg.kind]
        nbits = msg.nbits
        self.phase[phase] += nbits
        self.direction[_DIRECTION[msg.kind]] += nbits
        self.framing += FRAME_OVERHEAD_BITS + (-msg.nbits) % 8
        self.messages += 1
        if phase == REFINEMENT and self._round is not None:
            self._round.bits += msg.nbits
        if self.keep_transcript:
            self.transcript.append(
                TranscriptRecord(msg.direction, msg.kind.name, msg.custodian, msg.nbits, self.z)
            )
            if frame is not None:
                self.frames.append(frame)

    def begin_round(self, outcome: int, t: int) -> RoundRecord:
        self._round = RoundRecord(outcome, t)
        self.rounds.append(self._round)
        return self._round

    def end_round(self) -> None:
        self._round = None

    def transcript_bytes(self) -> bytes:
        return b"".join(self.frames)

    def summary(self, include_control: bool = False) -> dict:
        out = {
            "setup": self.setup,
            "refinement": self.refinement,
            "control": self.control,
            "Z": self.z,
            "custodian_to_leader": self.direction["custodian->leader"],
            "leader_to_custodian": self.direction["leader->custodian"],
            "framing_overhead": self.framing,
            "messages": self.messages,
            "refinement_rounds": len(self.rounds),
            "saved_by_cache": self.saved,
        }
        if include_control:
            out["Z_with_control"] = self.z + self.control
        return out
