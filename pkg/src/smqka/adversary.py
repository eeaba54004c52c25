"""Participant attacks on SMQKA and an outside intercept-resend eavesdropper.

Privacy: to learn k_t, P_{t-1} prepares its own sequence all in |0>. After
P_t encodes on it, P_{t+1} measures in Z and reads k_t straight off.

Fairness: colluders steal every honest sub-key that way, keep the honest
parties' sequences away from other honest parties, and have the last
colluder before each honest h encode ``desired ^ k_h`` on S_h. The honest
party then extracts ``desired``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .config import ScenarioConfig, adjacent_pairs
from .protocol import (
    Participant,
    ProtocolStateError,
    SequenceInTransit,
    SubSecretKey,
    log_prepared,
    xor_bits,
)
from .qubit import Basis, PureState, measure, prepare


class NonadjacencyError(ValueError):
    def __init__(self, pair: tuple[int, int], N: int):
        super().__init__(f"honest participants {pair[0]} and {pair[1]} are adjacent (mod {N})")
        self.pair = pair


class Action(str, enum.Enum):
    PASS_THROUGH = "PassThrough"
    ENCODE_MASKED = "EncodeMasked"
    STEAL_VIA_ALL_ZERO = "StealViaAllZero"
    MEASURE_AND_REPORT = "MeasureAndReport"


class CollusionBlackboard:
    """Shared notes of the dishonest coalition.

    A stolen sub-key exists only after the successor's measurement posted it;
    reading it earlier raises ``ProtocolStateError``.
    """

    def __init__(self, members):
        self.members = frozenset(members)
        self.target_key: Optional[tuple[int, ...]] = None
        self.events: list[tuple[str, int, int]] = []
        self._stolen: dict[int, tuple[int, ...]] = {}
        self._vault: dict[int, tuple[int, ...]] = {}

    def _admit(self, who: int) -> None:
        if who not in self.members:
            raise PermissionError(f"participant {who} is not part of the coalition")

    def post_stolen(self, author: int, victim: int, key: Sequence[int]) -> None:
        self._admit(author)
        self._stolen[victim] = tuple(key)
        self.events.append(("stolen", author, victim))

    def stolen(self, reader: int, victim: int) -> tuple[int, ...]:
        self._admit(reader)
        try:
            key = self._stolen[victim]
        except KeyError:
            raise ProtocolStateError(f"sub-key of participant {victim} not stolen yet") from None
        self.events.append(("read", reader, victim))
        return key

    def stolen_keys(self) -> dict[int, tuple[int, ...]]:
        return dict(self._stolen)

    def stash(self, author: int, label: int, z_indices: Sequence[int]) -> None:
        self._admit(author)
        self._vault[label] = tuple(z_indices)

    def reclaim(self, reader: int, label: int) -> tuple[int, ...]:
        self._admit(reader)
        try:
            return self._vault.pop(label)
        except KeyError:
            raise ProtocolStateError(f"no preserved copy of sequence {label}") from None


@dataclass(frozen=True)
class AttackPlan:
    N: int
    target_key: Optional[tuple[int, ...]]
    honest_set: tuple[int, ...]
    actions: dict[int, frozenset[Action]] = field(default_factory=dict)

    @property
    def colluders(self) -> tuple[int, ...]:
        return tuple(sorted(self.actions))

    def has(self, who: int, action: Action) -> bool:
        return action in self.actions.get(who, ())

    @property
    def victims(self) -> tuple[int, ...]:
        """Participants whose sub-keys the plan steals."""
        return tuple(
            sorted((w + 1) % self.N for w in self.actions if self.has(w, Action.STEAL_VIA_ALL_ZERO))
        )


def privacy_attack_prepare(n: int) -> list[int]:
    """Z indices of the attacker's all-|0> sequence."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    return [0] * n


def privacy_attack_extract(outcomes: Sequence[int], n: Optional[int] = None) -> SubSecretKey:
    """Sub-key of the single encoder between an all-|0> preparation and a Z readout."""
    if n is not None and len(outcomes) != n:
        raise ValueError(f"expected {n} outcomes, got {len(outcomes)}")
    return SubSecretKey(tuple(outcomes))


def fairness_mask(stolen: Sequence[int], desired: Sequence[int]) -> tuple[int, ...]:
    return xor_bits(tuple(desired), tuple(stolen))


def plan_privacy_attack(N: int, target: int) -> AttackPlan:
    if N < 3:
        raise ValueError("privacy attack needs N >= 3")
    before, after = (target - 1) % N, (target + 1) % N
    return AttackPlan(
        N, None, tuple(i for i in range(N) if i not in (before, after)),
        {before: frozenset({Action.STEAL_VIA_ALL_ZERO}),
         after: frozenset({Action.MEASURE_AND_REPORT})},
    )


def plan_generalized_attack(N: int, honest_set: Sequence[int], desired: Sequence[int]) -> AttackPlan:
    """Roles that let everyone outside ``honest_set`` fix the shared key to ``desired``.

    Requires the honest ids to be pairwise nonadjacent on the ring. With a
    single honest party this is the all-but-one attack.
    """
    if N < 3:
        raise ValueError("fairness attack needs N >= 3")
    honest = tuple(sorted(honest_set))
    if len(set(honest)) != len(honest) or not honest:
        raise ValueError(f"honest set must be non-empty and distinct, got {list(honest_set)}")
    if any(not 0 <= h < N for h in honest):
        raise ValueError(f"honest ids must lie in [0, {N})")
    pairs = adjacent_pairs(N, honest)
    if pairs:
        raise NonadjacencyError(pairs[0], N)

    actions: dict[int, set[Action]] = {i: {Action.PASS_THROUGH} for i in range(N) if i not in honest}
    for h in honest:
        actions[(h - 1) % N] |= {Action.STEAL_VIA_ALL_ZERO, Action.ENCODE_MASKED}
        actions[(h + 1) % N].add(Action.MEASURE_AND_REPORT)
    return AttackPlan(N, tuple(desired), honest, {i: frozenset(a) for i, a in actions.items()})


def max_nonadjacent(N: int) -> int:
    """Largest pairwise-nonadjacent set on a ring of N."""
    return N // 2


class Colluder(Participant):
    """A dishonest participant carrying out its share of an ``AttackPlan``."""

    def __init__(self, id: int, subkey: SubSecretKey, plan: AttackPlan, board: CollusionBlackboard,
                 fairness: bool):
        super().__init__(id, subkey, strategy="colluder")
        self.plan = plan
        self.board = board
        self.fairness = fairness

    def prepare_sequence(self, n, rng):
        if self.plan.has(self.id, Action.STEAL_VIA_ALL_ZERO):
            return log_prepared(self, privacy_attack_prepare(n))
        return super().prepare_sequence(n, rng)

    def _honest_owned(self, label: int) -> bool:
        return self.fairness and label in self.plan.honest_set

    def outgoing(self, label, seq, receiver, rng):
        # keep an honest party's sequence away from every other honest party
        if self._honest_owned(label) and receiver in self.plan.honest_set and receiver != label:
            self.board.stash(self.id, label, _read_z(seq, rng))
            dummy = [prepare(Basis.Z, int(i)) for i in rng.integers(0, 2, size=len(seq))]
            slots = [s.with_state(d) for s, d in zip(seq.slots, dummy)]
            return SequenceInTransit(slots, self.id, self.id, (), substitute=True)
        return seq

    def on_receive(self, label, seq, round, rng):
        if seq.substitute:
            indices = self.board.reclaim(self.id, label)
            slots = [s.with_state(prepare(Basis.Z, i)) for s, i in zip(seq.slots, indices)]
            return SequenceInTransit(slots, label, self.id)
        victim = (self.id - 1) % self.plan.N
        if (self.plan.has(self.id, Action.MEASURE_AND_REPORT) and round == 2
                and label == (victim - 1) % self.plan.N):
            outcomes = [measure(s.state, Basis.Z, rng) for s in seq.slots]
            self.board.post_stolen(self.id, victim, privacy_attack_extract([o.index for o in outcomes]).bits)
            seq.slots = [s.with_state(o.collapsed) for s, o in zip(seq.slots, outcomes)]
        return seq

    def encoding_bits(self, label, round):
        if not self._honest_owned(label):
            return self.subkey.bits
        if (label - 1) % self.plan.N == self.id:
            return fairness_mask(self.board.stolen(self.id, label), self.plan.target_key)
        return None


def _read_z(seq: SequenceInTransit, rng) -> list[int]:
    return [measure(s.state, Basis.Z, rng).index for s in seq.slots]


class InterceptResend:
    """Outside eavesdropper on one hop: measure every particle, resend the collapsed state.

    Data and decoy particles are tapped alike; positions are announced only
    after transit.
    """

    def __init__(self, basis: Basis = Basis.Z):
        self.basis = Basis(basis)
        self.outcomes: list[int] = []

    def tap(self, seq: SequenceInTransit, rng: np.random.Generator) -> SequenceInTransit:
        new_slots = []
        for slot in seq.slots:
            outcome = measure(slot.state, self.basis, rng)
            self.outcomes.append(outcome.index)
            new_slots.append(slot.with_state(outcome.collapsed))
        seq.slots = new_slots
        return seq

    def intercept(self, state: PureState, rng: np.random.Generator) -> PureState:
        outcome = measure(state, self.basis, rng)
        self.outcomes.append(outcome.index)
        return outcome.collapsed


@dataclass
class Scenario:
    participants: list[Participant]
    taps: dict[tuple[int, int], list[InterceptResend]] = field(default_factory=dict)
    board: Optional[CollusionBlackboard] = None
    plan: Optional[AttackPlan] = None
    attack: str = "none"
    desired_key: Optional[tuple[int, ...]] = None

    def stolen_keys(self) -> dict[int, tuple[int, ...]]:
        return self.board.stolen_keys() if self.board else {}

    def flags(self, final_keys) -> dict[str, bool]:
        if self.attack == "none":
            return {}
        if self.attack == "outside_intercept_resend":
            return {"intercept_resend": final_keys is not None}
        subkeys = {p.id: p.subkey.bits for p in self.participants}
        stolen = self.stolen_keys()
        flags = {"privacy": all(stolen.get(v) == subkeys[v] for v in self.plan.victims)}
        if self.attack.startswith("fairness"):
            flags["fairness"] = final_keys is not None and all(
                final_keys[h] == self.desired_key for h in self.plan.honest_set
            )
        return flags


def assemble_scenario(config: ScenarioConfig, subkeys: Sequence[SubSecretKey],
                      rng: np.random.Generator) -> Scenario:
    """Participants, taps and coalition for ``config.attack``."""
    N, attack = config.N, config.attack
    honest = [Participant(i, subkeys[i]) for i in range(N)]

    if attack == "none":
        return Scenario(honest)
    if attack == "outside_intercept_resend":
        taps = {(config.tap_round, config.tap_sender): [InterceptResend(config.tap_basis)]}
        return Scenario(honest, taps=taps, attack=attack)

    desired = None
    fairness = attack.startswith("fairness")
    if attack == "privacy":
        plan = plan_privacy_attack(N, config.victim)
    else:
        if config.desired_key in (None, "random"):
            desired = tuple(int(b) for b in rng.integers(0, 2, size=config.n))
        else:
            desired = tuple(config.desired_key)
        honest_set = config.honest_set if attack == "fairness_nonadjacent" else (config.victim,)
        plan = plan_generalized_attack(N, honest_set, desired)

    board = CollusionBlackboard(plan.colluders)
    board.target_key = desired
    parties = [
        Colluder(i, subkeys[i], plan, board, fairness) if i in plan.actions else honest[i]
        for i in range(N)
    ]
    return Scenario(parties, board=board, plan=plan, attack=attack, desired_key=desired)
