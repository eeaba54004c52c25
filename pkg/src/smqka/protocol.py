"""The SMQKA protocol: preparation, decoy checks, encoding, circulation, extraction.

Every participant P_i prepares a sequence S_i of n Z-basis particles. S_i
travels the ring P_i -> P_{i+1} -> ... -> P_{i-1} -> P_i. Before each hop the
sender hides kn fresh decoys (X/Y eigenstates) among the data particles; the
receiver measures them in the announced bases and the sender counts errors.
Intermediate holders then apply I or U per bit of their sub-key. Back home,
P_i measures in Z, compares with what it prepared and XORs in its own key.

All N sequences advance together in lockstep rounds: in round r, the holder
of S_i (participant i+r-1) sends it to i+r. Round N returns every sequence to
its owner, so the step-6 barrier is simply the end of round N-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .config import ScenarioConfig, decoy_count
from .qubit import DECOY_BASES, Basis, PureState, apply_encoding, measure, prepare


class ProtocolStateError(RuntimeError):
    """An operation was attempted without the state it depends on."""


class SlotKind(str, Enum):
    DATA = "data"
    DECOY = "decoy"


class PrepRecord(NamedTuple):
    basis: Basis
    index: int


@dataclass(frozen=True)
class ParticleSlot:
    kind: SlotKind
    state: PureState
    # known to the preparer only; receivers never consult it
    prep_record: PrepRecord

    def __post_init__(self):
        data = self.kind is SlotKind.DATA
        if data != (self.prep_record.basis is Basis.Z):
            raise ValueError(f"{self.kind.value} slot prepared in basis {self.prep_record.basis.value}")

    def with_state(self, state: PureState) -> ParticleSlot:
        return ParticleSlot(self.kind, state, self.prep_record)


@dataclass(frozen=True)
class SubSecretKey:
    bits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("sub-secret key must contain only bits")

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> SubSecretKey:
        return cls(tuple(int(b) for b in rng.integers(0, 2, size=n)))

    @classmethod
    def from_string(cls, text: str) -> SubSecretKey:
        return cls(tuple(int(c) for c in text))

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    def __xor__(self, other) -> SubSecretKey:
        return SubSecretKey(xor_bits(self.bits, tuple(other)))

    def __str__(self) -> str:
        return bits_to_str(self.bits)


def xor_bits(a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} != {len(b)}")
    return tuple(x ^ y for x, y in zip(a, b))


def bits_to_str(bits: Sequence[int]) -> str:
    return "".join(str(b) for b in bits)


@dataclass
class SequenceInTransit:
    """Particles of one circulating sequence.

    ``owner`` prepared the data particles; ``hop_sender`` inserted the decoys
    currently hidden at ``decoy_positions``. ``substitute`` marks a stand-in
    sequence a coalition forwards in place of a genuine one.
    """

    slots: list[ParticleSlot]
    owner: int
    hop_sender: int
    decoy_positions: tuple[int, ...] = ()
    substitute: bool = False

    def __len__(self) -> int:
        return len(self.slots)

    def data_slots(self) -> list[ParticleSlot]:
        hidden = set(self.decoy_positions)
        return [s for j, s in enumerate(self.slots) if j not in hidden]


@dataclass(frozen=True)
class DetectionRecord:
    sender: int
    receiver: int
    decoys_checked: int
    errors: int
    error_rate: float
    passed: bool
    round: int = 0
    owner: Optional[int] = None

    @property
    def hop(self) -> tuple[int, int]:
        return (self.sender, self.receiver)


class EncodingEvent(NamedTuple):
    round: int
    encoder: int
    owner: int
    substitute: bool
    bits: tuple[int, ...]


@dataclass
class Participant:
    """Participant state plus the honest behaviour.

    Adversarial roles subclass this and override the ``outgoing``,
    ``on_receive``, ``measure_decoy`` and ``encoding_bits`` hooks.
    """

    id: int
    subkey: SubSecretKey
    strategy: str = "honest"
    prep_log: Optional[tuple[int, ...]] = None
    extracted_key: Optional[tuple[int, ...]] = None

    @property
    def honest(self) -> bool:
        return self.strategy == "honest"

    def prepare_sequence(self, n: int, rng: np.random.Generator) -> list[ParticleSlot]:
        return init_sequence(self, n, rng)

    def outgoing(self, label: int, seq: SequenceInTransit, receiver: int,
                 rng: np.random.Generator) -> SequenceInTransit:
        """Data sequence actually put on the wire for sequence ``label``."""
        return seq

    def measure_decoy(self, state: PureState, basis: Basis, rng: np.random.Generator) -> int:
        return measure(state, basis, rng).index

    def on_receive(self, label: int, seq: SequenceInTransit, round: int,
                   rng: np.random.Generator) -> SequenceInTransit:
        """Called once decoys are checked and removed, before any encoding in the round."""
        return seq

    def encoding_bits(self, label: int, round: int) -> Optional[Sequence[int]]:
        """Bits to encode on sequence ``label``; None leaves it untouched."""
        return self.subkey.bits


_FRESH = {
    (basis, i): ParticleSlot(
        SlotKind.DATA if basis is Basis.Z else SlotKind.DECOY, prepare(basis, i), PrepRecord(basis, i)
    )
    for basis in Basis
    for i in (0, 1)
}


def fresh_slot(basis: Basis, index: int) -> ParticleSlot:
    """Newly prepared particle: data if ``basis`` is Z, decoy otherwise."""
    return _FRESH[basis, index]


def init_sequence(p: Participant, n: int, rng: np.random.Generator) -> list[ParticleSlot]:
    """n data particles, each uniformly |0> or |1>; indices go to ``p.prep_log``."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    indices = tuple(rng.integers(0, 2, size=n).tolist())
    return log_prepared(p, indices)


def log_prepared(p: Participant, indices: Sequence[int]) -> list[ParticleSlot]:
    p.prep_log = tuple(indices)
    return [fresh_slot(Basis.Z, i) for i in indices]


def insert_decoys(
    slots: Sequence[ParticleSlot],
    k: float,
    rng: np.random.Generator,
    *,
    owner: int = 0,
    sender: int = 0,
    decoy_bases: Sequence[Basis] = DECOY_BASES,
    substitute: bool = False,
) -> SequenceInTransit:
    """Hide ``k*len(slots)`` random decoys at uniformly random distinct positions."""
    n = len(slots)
    kn = decoy_count(n, k)
    total = n + kn
    positions = tuple(sorted(int(j) for j in rng.choice(total, size=kn, replace=False))) if kn else ()
    basis_picks = rng.integers(0, len(decoy_bases), size=kn)
    index_picks = rng.integers(0, 2, size=kn)
    decoys = iter(fresh_slot(decoy_bases[b], i) for b, i in zip(basis_picks.tolist(), index_picks.tolist()))
    data = iter(slots)
    hidden = set(positions)
    out = [next(decoys) if j in hidden else next(data) for j in range(total)]
    return SequenceInTransit(out, owner, sender, positions, substitute)


def run_detection(
    seq: SequenceInTransit,
    receiver: Participant,
    threshold: float,
    rng: np.random.Generator,
    round: int = 0,
) -> DetectionRecord:
    """Decoy check between ``seq.hop_sender`` and ``receiver``.

    The sender announces positions and bases, the receiver measures and
    reports outcomes, the sender counts mismatches. The decoys are consumed:
    on return ``seq`` holds only its data slots.
    """
    announced = [(j, seq.slots[j].prep_record.basis) for j in seq.decoy_positions]
    reported = [receiver.measure_decoy(seq.slots[j].state, basis, rng) for j, basis in announced]
    errors = sum(
        outcome != seq.slots[j].prep_record.index
        for (j, _), outcome in zip(announced, reported)
    )
    checked = len(announced)
    rate = errors / checked if checked else 0.0

    seq.slots = seq.data_slots()
    seq.decoy_positions = ()
    return DetectionRecord(seq.hop_sender, receiver.id, checked, errors, rate,
                           rate <= threshold, round, seq.owner)


def encode_sequence(seq: SequenceInTransit, subkey: Sequence[int]) -> SequenceInTransit:
    bits = tuple(subkey)
    if seq.decoy_positions:
        raise ProtocolStateError("decoys must be removed before encoding")
    if len(bits) != len(seq.slots):
        raise ProtocolStateError(f"key length {len(bits)} does not match {len(seq.slots)} data slots")
    slots = [s.with_state(apply_encoding(s.state, b)) for s, b in zip(seq.slots, bits)]
    return SequenceInTransit(slots, seq.owner, seq.hop_sender, (), seq.substitute)


def read_encoded_bits(owner: Participant, seq: SequenceInTransit,
                      rng: np.random.Generator) -> tuple[int, ...]:
    """XOR of every encoding applied to each slot, read by a Z measurement."""
    if seq.owner != owner.id:
        raise ProtocolStateError(f"participant {owner.id} cannot extract sequence of {seq.owner}")
    if owner.prep_log is None:
        raise ProtocolStateError(f"participant {owner.id} has no preparation log")
    if seq.decoy_positions or len(seq.slots) != len(owner.prep_log):
        raise ProtocolStateError("sequence does not match the preparation log")
    return tuple(
        int(measure(s.state, Basis.Z, rng).index != original)
        for s, original in zip(seq.slots, owner.prep_log)
    )


def extract_key(owner: Participant, seq: SequenceInTransit, rng: np.random.Generator) -> tuple[int, ...]:
    key = xor_bits(owner.subkey.bits, read_encoded_bits(owner, seq, rng))
    owner.extracted_key = key
    return key


@dataclass
class RunReport:
    config: ScenarioConfig
    subkeys: tuple[SubSecretKey, ...]
    final_keys: Optional[dict[int, tuple[int, ...]]]
    detections: list[DetectionRecord]
    aborted: bool
    abort_record: Optional[DetectionRecord] = None
    attack_flags: dict[str, bool] = field(default_factory=dict)
    honest_ids: tuple[int, ...] = ()
    desired_key: Optional[tuple[int, ...]] = None
    stolen_keys: dict[int, tuple[int, ...]] = field(default_factory=dict)
    encodings: list[EncodingEvent] = field(default_factory=list)
    # (kind, participant, victim) in the order the coalition posted/read stolen keys
    coalition_log: list[tuple[str, int, int]] = field(default_factory=list)

    @property
    def error_rates(self) -> list[float]:
        return [d.error_rate for d in self.detections]


def run_protocol(
    config: ScenarioConfig,
    rng: np.random.Generator,
    subkeys: Optional[Sequence[SubSecretKey]] = None,
) -> RunReport:
    """One full protocol execution under ``config.attack``."""
    from .adversary import assemble_scenario

    N, n = config.N, config.n
    if subkeys is None:
        subkeys = [SubSecretKey.random(n, rng) for _ in range(N)]
    subkeys = tuple(SubSecretKey(tuple(k)) for k in subkeys)
    if len(subkeys) != N or any(len(k) != n for k in subkeys):
        raise ValueError(f"expected {N} sub-keys of length {n}")

    scenario = assemble_scenario(config, subkeys, rng)
    parties = scenario.participants

    carriers = {
        i: SequenceInTransit(parties[i].prepare_sequence(n, rng), owner=i, hop_sender=i)
        for i in range(N)
    }
    detections: list[DetectionRecord] = []
    encodings: list[EncodingEvent] = []

    def report(final_keys, abort_record=None) -> RunReport:
        return RunReport(
            config=config,
            subkeys=subkeys,
            final_keys=final_keys,
            detections=detections,
            aborted=abort_record is not None,
            abort_record=abort_record,
            attack_flags=scenario.flags(final_keys),
            honest_ids=tuple(p.id for p in parties if p.honest),
            desired_key=scenario.desired_key,
            stolen_keys=scenario.stolen_keys(),
            encodings=encodings,
            coalition_log=list(scenario.board.events) if scenario.board else [],
        )

    for r in range(1, N + 1):
        for label in range(N):
            s, t = (label + r - 1) % N, (label + r) % N
            wire = parties[s].outgoing(label, carriers[label], t, rng)
            seq = insert_decoys(wire.slots, config.k, rng, owner=wire.owner, sender=s,
                                substitute=wire.substitute)
            for tap in scenario.taps.get((r, s), ()):
                tap.tap(seq, rng)
            record = run_detection(seq, parties[t], config.threshold, rng, round=r)
            detections.append(record)
            if not record.passed:
                return report(None, record)
            carriers[label] = seq

        for label in range(N):
            t = (label + r) % N
            carriers[label] = parties[t].on_receive(label, carriers[label], r, rng)

        if r == N:
            break
        for label in range(N):
            t = (label + r) % N
            bits = parties[t].encoding_bits(label, r)
            if bits is None:
                continue
            carriers[label] = encode_sequence(carriers[label], bits)
            carriers[label].hop_sender = t
            encodings.append(EncodingEvent(r, t, carriers[label].owner,
                                           carriers[label].substitute, tuple(bits)))

    final_keys = {i: extract_key(parties[i], carriers[i], rng) for i in range(N)}
    return report(final_keys)
