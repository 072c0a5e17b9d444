"""The leader: owns rho, the randomness and the meter; sees POVM data only through messages."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

from ..approx import ApproxProbabilityTable, Proposal, assemble_probability, build_proposal, required_entry_precision
from ..dyadic import Dyadic, ceil_lg
from ..quantum import Matrix, digit_table
from ..sampler import DEFAULT_BUDGET, DEFAULT_UNIFORM_BITS, SampleStats, sample_modified
from .custodian import ProtocolError
from .messages import BitWriter, Kind, Message, read_scalars, scalar_value
from .meter import BitMeter
from .sources import unpack_hermitian


def t0_default(n: int) -> int:
    """``ceil(lg n)``: keeps the rejection constant C at most 3."""
    if n < 1:
        raise ValueError("n must be positive")
    return ceil_lg(n)


@dataclass(frozen=True)
class T0Policy:
    """``t0 = ceil(lg n) + offset`` (floored at 0), or ``fixed`` when given."""

    offset: int = 0
    fixed: int | None = None

    def __call__(self, n: int) -> int:
        if self.fixed is not None:
            return self.fixed
        return max(0, t0_default(n) + self.offset)

    def describe(self) -> str:
        if self.fixed is not None:
            return f"fixed:{self.fixed}"
        return "ceil(lg n)" if not self.offset else f"ceil(lg n){self.offset:+d}"


class HeldMatrix:
    """What the leader knows about one POVM element: signs and magnitudes at ``k`` bits."""

    __slots__ = ("k", "signs", "mags", "prefix", "key")

    def __init__(self, k: int, signs: tuple, mags: tuple, prefix: bool, cache: LeaderCache):
        self.k = k
        self.signs = signs
        self.mags = mags
        self.prefix = prefix
        self.key = cache.intern((k, signs, mags))


class LeaderCache:
    """Memo of leader computations keyed by the exact data received.

    Shared across runs of one scenario so that repeating a computation on
    byte-identical custodian data is not paid for twice.  Bound to one
    leader-side copy of rho.
    """

    def __init__(self):
        self._source = None
        self._bits = None
        self.rho = None
        self.probs: dict = {}
        self.matrices: dict = {}
        self.tables: dict = {}
        self.proposals: dict = {}
        self._ids: dict = {}

    def intern(self, data) -> int:
        """Small integer standing for ``data`` (cheap to hash in memo keys)."""
        return self._ids.setdefault(data, len(self._ids))

    def held_rho(self, rho, bits: int):
        """Leader copy of ``rho`` truncated to ``bits``; fixed for the cache's lifetime."""
        if self._source is None:
            self._source, self._bits = rho, bits
            self.rho = tuple(tuple(e.truncated(bits) for e in row) for row in rho)
        elif bits != self._bits or (self._source is not rho and self._source != rho):
            raise ValueError("LeaderCache reused with a different rho or precision")
        return self.rho


@dataclass
class RunRecord:
    """Everything one protocol run produced."""

    outcome: tuple
    flat: int
    stats: SampleStats
    meter: BitMeter
    t0: int
    k0: int
    n: int
    d: int
    m: int
    dims: tuple
    outcomes: tuple
    mode: str
    model: str
    custodian_outputs: list = field(default_factory=list)
    proposal: Proposal | None = None
    fresh: tuple = ()  # per custodian: refinements are fresh approximations

    @property
    def C(self) -> Dyadic:
        return self.stats.C

    def to_json(self, include_control: bool = False) -> dict:
        return {
            "outcome": list(self.outcome),
            "t0": self.t0,
            "entry_precision": self.k0,
            "n": self.n,
            "d": self.d,
            "m": self.m,
            "mode": self.mode,
            "fresh_custodians": [i for i, f in enumerate(self.fresh) if f],
            "model": self.model,
            "sampling": self.stats.to_json(),
            "bits": self.meter.summary(include_control),
            "custodian_outputs": self.custodian_outputs,
        }


class Leader:
    """Runs the remote-sampling protocol over a transport.

    The constructor takes only rho and the transport: POVM data reaches the
    leader exclusively as decoded messages.
    """

    def __init__(
        self,
        rho: Matrix,
        transport,
        *,
        t0_policy=None,
        mode: str = "truncation",
        model: str = "discrete",
        budget: int = DEFAULT_BUDGET,
        uniform_bits: int = DEFAULT_UNIFORM_BITS,
        cache: LeaderCache | None = None,
        keep_transcript: bool = True,
        reuse: bool = True,
    ):
        if mode not in ("truncation", "approximation"):
            raise ValueError(f"unknown mode {mode!r}")
        self.rho = rho
        self.transport = transport
        self.t0_policy = t0_policy or T0Policy()
        self.mode = mode
        self.model = model
        self.budget = budget
        self.uniform_bits = uniform_bits
        self.cache = cache or LeaderCache()
        self.meter = BitMeter(keep_transcript)
        self.m = transport.size
        self.held: list[dict[int, HeldMatrix]] = [dict() for _ in range(self.m)]
        self.initial: list[dict[int, HeldMatrix]] = [dict() for _ in range(self.m)]
        self.reuse = reuse
        self.assigned: tuple | None = None
        self.proposal: Proposal | None = None

    # -- messaging -----------------------------------------------------------

    def _send(self, msg: Message):
        frame = self.transport.send(msg)
        self.meter.record(msg, frame)

    def _recv(self, i: int, *kinds: Kind) -> Message:
        msg, frame = self.transport.recv(i)
        if msg.kind not in kinds or msg.custodian != i:
            raise ProtocolError(f"expected {[k.name for k in kinds]} from custodian {i}, got {msg.kind.name}")
        self.meter.record(msg, frame)
        return msg

    # -- protocol ------------------------------------------------------------------

    def handshake(self):
        self.outcomes = []
        self.dims = []
        fresh = []
        for i in range(self.m):
            r = self._recv(i, Kind.ANNOUNCE_OUTCOME_COUNT).reader()
            self.outcomes.append(r.read(32))
            self.dims.append(r.read(32))
            capable = r.read(1)
            r.done()
            # custodians that cannot truncate get fresh-approximation rounds
            fresh.append(self.mode == "approximation" or not capable)
        self.fresh = tuple(fresh)
        self.outcomes = tuple(self.outcomes)
        self.dims = tuple(self.dims)
        self.n = prod(self.outcomes)
        self.d = prod(self.dims)
        if len(self.rho) != self.d:
            raise ProtocolError(f"custodian dimensions multiply to {self.d}, rho is {len(self.rho)}x{len(self.rho)}")
        self.t0 = self.t0_policy(self.n)
        self.k0 = required_entry_precision(self.t0, self.d, self.m)
        # leader-side copy of rho, precise enough for every t within the budget
        rho_bits = required_entry_precision(self.t0 + self.budget, self.d, self.m)
        self.rho_held = self.cache.held_rho(self.rho, rho_bits)
        for i in range(self.m):
            w = BitWriter().write(self.t0, 32).write(self.k0, 32).write(int(self.reuse), 1)
            self._send(w.message(Kind.SET_T0, i))

    def get_table(self, t0: int) -> ApproxProbabilityTable:
        k = self.k0
        msgs = [self._recv(i, Kind.INITIAL_TRUNCATIONS) for i in range(self.m)]
        key = (t0, k, tuple((msg.payload, msg.nbits) for msg in msgs))
        hit = self.cache.tables.get(key)
        if hit is not None:
            initial, table = hit
            self.initial = initial
            self.held = [dict(h) for h in initial]
            return table
        for i, msg in enumerate(msgs):
            r = msg.reader()
            di2 = self.dims[i] ** 2
            for j in range(self.outcomes[i]):
                pairs = read_scalars(r, di2, k)
                self.held[i][j] = self.initial[i][j] = HeldMatrix(
                    k, tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), True, self.cache
                )
            r.done()
        values = tuple(self._prob(x, t0) for x in digit_table(self.outcomes))
        table = ApproxProbabilityTable(t0, values, self.outcomes)
        self.cache.tables[key] = (self.initial, table)
        return table

    def proposal_for(self, table: ApproxProbabilityTable) -> Proposal:
        key = id(table)
        hit = self.cache.proposals.get(key)
        if hit is None or hit[0] is not table:
            hit = self.cache.proposals[key] = (table, build_proposal(table))
        prop = hit[1]
        self.proposal = prop
        return prop

    def on_propose(self, flat: int):
        x = digit_table(self.outcomes)[flat]
        self.assigned = x
        for i, xi in enumerate(x):
            self._send(BitWriter().write(xi, ceil_lg(self.outcomes[i])).message(Kind.OUTCOME_ASSIGNED, i))
            if not self.reuse:
                self.held[i][xi] = self.initial[i][xi]

    def refine(self, flat: int, t: int) -> Dyadic:
        x = digit_table(self.outcomes)[flat]
        k = required_entry_precision(t, self.d, self.m)
        rnd = self.meter.begin_round(flat, t)
        for i, xi in enumerate(x):
            held = self.held[i][xi]
            di2 = self.dims[i] ** 2
            fresh = self.fresh[i]
            if held.k >= k:
                rnd.saved += 1 + ((k + 1) * di2 if fresh else di2)
                continue
            if held.k != k - 1:
                raise ProtocolError(f"custodian {i} element {xi} at {held.k} bits, {k} needed")
            kind = Kind.REQUEST_FRESH_APPROXIMATION if fresh else Kind.REQUEST_ONE_MORE_BIT
            self._send(BitWriter().write(1, 1).message(kind, i))
            rnd.contacted.append(i)
            msg = self._recv(i, Kind.REFINEMENT_BITS, Kind.APPROXIMATION_PAYLOAD)
            r = msg.reader()
            if msg.kind is Kind.REFINEMENT_BITS:
                if fresh or not held.prefix:
                    raise ProtocolError("one-bit extension of a non-truncation value")
                mags = tuple((mag << 1) | r.read(1) for mag in held.mags)
                self.held[i][xi] = HeldMatrix(k, held.signs, mags, True, self.cache)
            else:
                pairs = read_scalars(r, di2, k)
                self.held[i][xi] = HeldMatrix(
                    k, tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), False, self.cache
                )
            r.done()
        self.meter.end_round()
        return self._prob(flat, t)

    def finish(self, flat: int):
        for i in range(self.m):
            self._send(BitWriter().write(1, 1).message(Kind.FINAL_OUTPUT, i))

    # -- computation -----------------------------------------------------------

    def _matrix(self, i: int, held: HeldMatrix) -> Matrix:
        key = (i, held.key)
        mat = self.cache.matrices.get(key)
        if mat is None:
            k = held.k
            vals = [scalar_value(s, mg, k) for s, mg in zip(held.signs, held.mags)]
            mat = self.cache.matrices[key] = unpack_hermitian(vals, self.dims[i])
        return mat

    def _prob(self, flat, t: int) -> Dyadic:
        x = flat if isinstance(flat, tuple) else digit_table(self.outcomes)[flat]
        helds = [self.held[i][xi] for i, xi in enumerate(x)]
        key = (x, t, tuple(h.key for h in helds))
        val = self.cache.probs.get(key)
        if val is None:
            entries = [{xi: self._matrix(i, h)} for i, (xi, h) in enumerate(zip(x, helds))]
            k = min(h.k for h in helds)
            val = self.cache.probs[key] = assemble_probability(entries, self.rho_held, x, t, k)
        return val

    def run(self, src) -> RunRecord:
        self.handshake()
        flat, stats = sample_modified(
            self, src, self.t0, model=self.model, budget=self.budget, uniform_bits=self.uniform_bits
        )
        self.finish(flat)
        return RunRecord(
            outcome=digit_table(self.outcomes)[flat],
            flat=flat,
            stats=stats,
            meter=self.meter,
            t0=self.t0,
            k0=self.k0,
            n=self.n,
            d=self.d,
            m=self.m,
            dims=self.dims,
            outcomes=self.outcomes,
            mode=self.mode,
            model=self.model,
            proposal=self.proposal,
            fresh=self.fresh,
        )
