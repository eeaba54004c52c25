from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smqka.adversary import InterceptResend
from smqka.analysis import trial_rng
from smqka.config import ConfigError, ScenarioConfig
from smqka.protocol import (
    Participant,
    ProtocolStateError,
    SequenceInTransit,
    SlotKind,
    SubSecretKey,
    encode_sequence,
    extract_key,
    init_sequence,
    insert_decoys,
    log_prepared,
    run_detection,
    run_protocol,
)
from smqka.qubit import Basis, apply_encoding, equal_up_to_phase, prepare

U = np.array([[0, 1], [-1, 0]], dtype=complex)


def party(i=0, key="0000"):
    return Participant(i, SubSecretKey.from_string(key))


def data_seq(indices, owner=0):
    p = party(owner, "0" * len(indices))
    return p, SequenceInTransit(log_prepared(p, indices), owner, owner)


def int_xor(*keys):
    """Independent XOR oracle over bit strings via integer arithmetic."""
    value = reduce(lambda a, b: a ^ b, (int(k, 2) for k in keys))
    return tuple(int(c) for c in format(value, f"0{len(keys[0])}b"))


# init_sequence

def test_init_sequence_reproducible():
    a, b = party(), party()
    s1 = init_sequence(a, 4, np.random.default_rng(7))
    s2 = init_sequence(b, 4, np.random.default_rng(7))
    assert s1 == s2 and a.prep_log == b.prep_log
    assert len(s1) == 4
    assert all(s.kind is SlotKind.DATA and s.prep_record.basis is Basis.Z for s in s1)
    assert [s.prep_record.index for s in s1] == list(a.prep_log)


def test_init_sequence_uniform(rng):
    p = party()
    init_sequence(p, 10_000, rng)
    assert abs(sum(p.prep_log) / 10_000 - 0.5) <= 0.02


def test_init_sequence_rejects_empty(rng):
    with pytest.raises(ValueError):
        init_sequence(party(), 0, rng)


# insert_decoys

@pytest.mark.parametrize("k, decoys", [(1, 4), (0, 0), (0.5, 2), (2, 8)])
def test_insert_decoys_counts(k, decoys, rng):
    _, seq = data_seq([0, 1, 1, 0])
    out = insert_decoys(seq.slots, k, rng)
    assert len(out) == 4 + decoys
    assert len(out.decoy_positions) == decoys
    assert sum(s.kind is SlotKind.DECOY for s in out.slots) == decoys


def test_insert_decoys_rejects_fractional_product(rng):
    _, seq = data_seq([0, 1, 1, 0])
    with pytest.raises(ConfigError, match="not an integer"):
        insert_decoys(seq.slots, 0.3, rng)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 40), k=st.integers(0, 3), seed=st.integers(0, 2**32))
def test_insert_decoys_conservation(n, k, seed):
    rng = np.random.default_rng(seed)
    p = party(0, "0" * n)
    slots = init_sequence(p, n, rng)
    seq = insert_decoys(slots, k, rng)
    assert len(seq) == n + k * n
    assert len(set(seq.decoy_positions)) == k * n
    assert all(0 <= j < len(seq) for j in seq.decoy_positions)
    assert seq.data_slots() == slots
    for j in seq.decoy_positions:
        assert seq.slots[j].prep_record.basis in (Basis.X, Basis.Y)


def test_decoy_states_uniform_over_four(rng):
    _, seq = data_seq([0] * 8000)
    out = insert_decoys(seq.slots, 1, rng)
    counts = {}
    for j in out.decoy_positions:
        rec = out.slots[j].prep_record
        counts[rec] = counts.get(rec, 0) + 1
    assert len(counts) == 4
    # binomial sd for p=1/4 at 8000 draws is ~39
    assert all(abs(c - 2000) < 160 for c in counts.values())


# run_detection

def test_honest_detection_passes_and_consumes_decoys(rng):
    _, seq = data_seq([0, 1, 1, 0, 1])
    transit = insert_decoys(seq.slots, 2, rng, sender=0)
    record = run_detection(transit, party(1), 0.0, rng)
    assert (record.errors, record.decoys_checked, record.passed) == (0, 10, True)
    assert record.hop == (0, 1)
    assert transit.slots == seq.slots and transit.decoy_positions == ()


def test_detection_without_decoys_passes_vacuously(rng):
    _, seq = data_seq([0, 1, 1, 0])
    transit = insert_decoys(seq.slots, 0, rng)
    record = run_detection(transit, party(1), 0.0, rng)
    assert record.passed and record.error_rate == 0 and record.decoys_checked == 0


def test_flipped_decoy_fails_zero_threshold(rng):
    _, seq = data_seq([0, 1, 1, 0])
    transit = insert_decoys(seq.slots, 1, rng)
    j = transit.decoy_positions[0]
    slot = transit.slots[j]
    transit.slots[j] = slot.with_state(prepare(slot.prep_record.basis, 1 - slot.prep_record.index))
    record = run_detection(transit, party(1), 0.0, rng)
    assert record.errors == 1 and not record.passed
    assert record.error_rate == pytest.approx(1 / 4)


def test_threshold_is_inclusive(rng):
    _, seq = data_seq([0, 1, 1, 0])
    transit = insert_decoys(seq.slots, 1, rng)
    j = transit.decoy_positions[0]
    slot = transit.slots[j]
    transit.slots[j] = slot.with_state(prepare(slot.prep_record.basis, 1 - slot.prep_record.index))
    assert run_detection(transit, party(1), 0.25, rng).passed


def test_intercept_resend_z_error_rate(rng):
    _, seq = data_seq([0] * 1000)
    transit = insert_decoys(seq.slots, 1, rng)
    InterceptResend(Basis.Z).tap(transit, rng)
    record = run_detection(transit, party(1), 0.0, rng)
    assert record.decoys_checked == 1000
    assert abs(record.error_rate - 0.5) <= 0.05


# encode_sequence

def test_encode_all_zero_key_is_identity():
    _, seq = data_seq([0, 1, 1, 0])
    assert encode_sequence(seq, (0, 0, 0, 0)).slots == seq.slots


def test_encode_zero_slot_with_one():
    _, seq = data_seq([0])
    out = encode_sequence(seq, (1,))
    assert out.slots[0].state == -prepare(Basis.Z, 1)
    assert np.allclose([out.slots[0].state.amp0, out.slots[0].state.amp1], U @ [1, 0])


def test_encode_twice_returns_original_up_to_phase():
    _, seq = data_seq([0, 1])
    out = encode_sequence(encode_sequence(seq, (1, 1)), (1, 1))
    for a, b in zip(out.slots, seq.slots):
        assert equal_up_to_phase(a.state, b.state)


def test_encode_length_mismatch():
    _, seq = data_seq([0, 1])
    with pytest.raises(ProtocolStateError):
        encode_sequence(seq, (1, 1, 0))


def test_encode_refuses_sequence_with_decoys(rng):
    _, seq = data_seq([0, 1])
    with pytest.raises(ProtocolStateError):
        encode_sequence(insert_decoys(seq.slots, 1, rng), (1, 1))


# extract_key

def test_extract_three_party_single_slot(rng):
    # prepared |1>, P1 encodes 1, P2 encodes 0; oracle: U @ |1> = |0>
    after = U @ np.array([0, 1])
    assert np.allclose(after, [1, 0])
    for own_bit in (0, 1):
        owner = Participant(0, SubSecretKey((own_bit,)))
        seq = SequenceInTransit(log_prepared(owner, [1]), 0, 0)
        seq = encode_sequence(encode_sequence(seq, (1,)), (0,))
        assert extract_key(owner, seq, rng) == (own_bit ^ 1,)
        assert owner.extracted_key == (own_bit ^ 1,)


def test_extract_all_zero_encodings_returns_own_key(rng):
    owner = party(0, "1011")
    seq = SequenceInTransit(log_prepared(owner, [0, 1, 0, 1]), 0, 0)
    seq = encode_sequence(seq, (0, 0, 0, 0))
    assert extract_key(owner, seq, rng) == (1, 0, 1, 1)


def test_extract_requires_prep_log(rng):
    owner = party(0, "01")
    seq = SequenceInTransit([], 0, 0)
    with pytest.raises(ProtocolStateError):
        extract_key(owner, seq, rng)


def test_extract_rejects_foreign_sequence(rng):
    owner = party(0, "01")
    _, seq = data_seq([0, 1], owner=1)
    owner.prep_log = (0, 1)
    with pytest.raises(ProtocolStateError):
        extract_key(owner, seq, rng)


# run_protocol

def test_honest_three_party_example(rng):
    keys = ["0101", "0011", "0110"]
    expected = int_xor(*keys)
    assert expected == (0, 0, 0, 0)
    report = run_protocol(ScenarioConfig(N=3, n=4), rng, [SubSecretKey.from_string(k) for k in keys])
    assert not report.aborted
    assert all(key == expected for key in report.final_keys.values())


def test_honest_five_party_run(rng):
    report = run_protocol(ScenarioConfig(N=5, n=32, k=1, threshold=0), rng)
    expected = int_xor(*(str(k) for k in report.subkeys))
    assert not report.aborted
    assert set(report.final_keys.values()) == {expected}


@settings(max_examples=25, deadline=None)
@given(N=st.integers(3, 10), n=st.integers(1, 16), k=st.integers(0, 2), seed=st.integers(0, 2**63))
def test_correctness_property(N, n, k, seed):
    report = run_protocol(ScenarioConfig(N=N, n=n, k=k), np.random.default_rng(seed))
    expected = int_xor(*(str(key) for key in report.subkeys))
    assert not report.aborted
    assert all(v == expected for v in report.final_keys.values())
    assert len(report.detections) == N * N
    assert all(d.errors == 0 and d.decoys_checked == k * n for d in report.detections)


@pytest.mark.parametrize("attack, extra", [
    ("none", {}),
    ("privacy", {}),
    ("fairness_all_but_one", {}),
    ("fairness_nonadjacent", {"honest_set": (1, 3)}),
])
def test_per_slot_linearity(attack, extra):
    """Extracted encoded bits equal the XOR of every logged encoding on that sequence."""
    config = ScenarioConfig(N=6, n=24, attack=attack, **extra)
    for trial in range(5):
        report = run_protocol(config, trial_rng(11, trial))
        for owner, key in report.final_keys.items():
            applied = [e.bits for e in report.encodings if e.owner == owner and not e.substitute]
            replay = reduce(lambda a, b: tuple(x ^ y for x, y in zip(a, b)), applied, (0,) * config.n)
            encoded = tuple(a ^ b for a, b in zip(key, report.subkeys[owner].bits))
            assert encoded == replay


def test_every_hop_checked_once(rng):
    N = 4
    report = run_protocol(ScenarioConfig(N=N, n=8), rng)
    hops = {(d.round, d.sender, d.receiver) for d in report.detections}
    assert len(hops) == N * N
    assert {(d.owner, d.round) for d in report.detections} == {(i, r) for i in range(N) for r in range(1, N + 1)}


def test_outside_eavesdropper_forces_abort(rng):
    config = ScenarioConfig(N=3, n=64, k=1, attack="outside_intercept_resend")
    report = run_protocol(config, rng)
    assert report.aborted and report.final_keys is None
    assert report.abort_record.hop == (0, 1) and report.abort_record.round == 1
    assert not report.abort_record.passed


def test_abort_dominance_suppresses_keys():
    config = ScenarioConfig(N=3, n=4, k=1, attack="outside_intercept_resend")
    for t in range(200):
        report = run_protocol(config, trial_rng(3, t))
        failed = [d for d in report.detections if not d.passed]
        assert report.aborted == bool(failed)
        if report.aborted:
            assert report.final_keys is None and report.abort_record == failed[0]
        else:
            assert all(len(v) == 4 for v in report.final_keys.values())


def test_privacy_scenario_not_aborted(rng):
    report = run_protocol(ScenarioConfig(N=5, n=16, attack="privacy"), rng)
    assert not report.aborted
    assert report.attack_flags == {"privacy": True}


def test_run_is_deterministic_under_seed():
    config = ScenarioConfig(N=4, n=8, attack="fairness_all_but_one")
    a = run_protocol(config, trial_rng(5, 0))
    b = run_protocol(config, trial_rng(5, 0))
    assert a.final_keys == b.final_keys and a.detections == b.detections


def test_subkey_validation(rng):
    with pytest.raises(ValueError):
        run_protocol(ScenarioConfig(N=3, n=4), rng, [SubSecretKey.from_string("01")] * 3)
