import random

import pytest
from hypothesis import given, settings, strategies as st

from dcmb import Commitment, HashParams, Salt, commit, verify, generate_salt
from dcmb.commitment import encode_payload, canonical_encoding, PRODUCTION, TEST


def test_commit_then_verify(tiny):
    rng = random.Random(1)
    for _ in range(100):
        payload = rng.randint(0, 10 ** 6)
        c = commit(payload, generate_salt(rng), tiny)
        assert verify(c, payload, tiny)
        assert verify(c, str(payload), tiny)
        assert not verify(c, payload + 1, tiny)


@settings(max_examples=25, deadline=None)
@given(payload=st.binary(min_size=1, max_size=64), salt=st.binary(min_size=1, max_size=32))
def test_any_bytes_open_their_commitment(payload, salt):
    params = HashParams(memory_cost=64, iterations=1)
    assert verify(commit(payload, salt, params), payload, params)


def test_commit_is_deterministic(tiny):
    salt = Salt.from_text('fjpd7')
    assert commit(5367, salt, tiny) == commit(5367, salt, tiny)
    assert commit(5367, salt, tiny).hash != commit(5367, Salt.from_text('fjpd8'), tiny).hash


def test_params_mismatch_never_verifies(tiny):
    other = HashParams(memory_cost=128, iterations=1)
    c = commit('Maintenance imminent', b'salt', tiny)
    assert c.params_id == tiny.params_id
    assert not verify(c, 'Maintenance imminent', other)


def test_verify_rejects_unencodable_candidates(tiny):
    c = commit(1, b'salt', tiny)
    assert not verify(c, True, tiny)
    assert not verify(c, None, tiny)
    assert not verify(c, '', tiny)


def test_empty_payload(tiny):
    with pytest.raises(Commitment.EmptyPayload):
        commit('', b'salt', tiny)
    with pytest.raises(Commitment.EmptyPayload):
        commit(b'', b'salt', tiny)


def test_payload_encoding():
    assert encode_payload(5367) == b'5367'
    assert encode_payload(5367.0) == b'5367'
    assert encode_payload(53.5) == b'53.5'
    assert encode_payload('Maintenance imminent') == b'Maintenance imminent'
    assert encode_payload(b'\x00\x01') == b'\x00\x01'
    with pytest.raises(TypeError):
        encode_payload(False)
    with pytest.raises(TypeError):
        encode_payload([1])


def test_length_prefix_separates_payload_from_salt(tiny):
    assert canonical_encoding(b'53', b'67x') != canonical_encoding(b'5367', b'x')
    assert commit('53', b'67x', tiny).hash != commit('5367', b'x', tiny).hash


def test_invalid_params():
    for kwargs in ({'memory_cost': 0, 'iterations': 1}, {'memory_cost': 64, 'iterations': 0},
                   {'memory_cost': 64, 'iterations': 1, 'parallelism': -1},
                   {'memory_cost': 4, 'iterations': 1}, {'memory_cost': 64, 'iterations': True}):
        with pytest.raises(HashParams.InvalidParams):
            HashParams(**kwargs)
    with pytest.raises(ValueError):
        HashParams(memory_cost=64, iterations=1, variant='scrypt')


def test_params_id_names_the_parameter_set(tiny):
    assert tiny.params_id == 'argon2id:m=64,t=1,p=1,l=32'
    assert HashParams.from_id(tiny.params_id) == tiny
    assert HashParams.from_id(PRODUCTION.params_id) == PRODUCTION
    assert PRODUCTION.memory_cost == 64 * 1024 and TEST.memory_cost == 8 * 1024
    with pytest.raises(HashParams.InvalidParams):
        HashParams.from_id('argon2id:m=64')


def test_salts():
    assert Salt.from_config('fjpd7') == b'fjpd7'
    assert Salt.from_config({'text': 'fjpd7'}) == b'fjpd7'
    assert Salt.from_config({'hex': '666a706437'}) == b'fjpd7'
    assert generate_salt(random.Random(3)) == generate_salt(random.Random(3))
    assert len(generate_salt()) == 16
    assert generate_salt() != generate_salt()


def test_commitment_repr(tiny):
    c = commit(5367, Salt.from_text('fjpd7'), tiny)
    d = c._repr
    assert d['salt'] == '666a706437' and d['params_id'] == tiny.params_id
    assert Commitment.from_repr(d) == c


def test_seeded_salts_do_not_collide():
    rng = random.Random(42)
    assert len({generate_salt(rng) for _ in range(10_000)}) == 10_000


def test_matches_a_direct_argon2_call(tiny):
    from argon2.low_level import Type, hash_secret_raw
    from Cryptodome.Hash import SHA256

    payload, salt = b'Maintenance imminent', b'fjpd7'
    expected = hash_secret_raw(secret=len(payload).to_bytes(4, 'big') + payload + salt,
                               salt=SHA256.new(salt).digest(), time_cost=1, memory_cost=64, parallelism=1,
                               hash_len=32, type=Type.ID)
    assert commit(payload, salt, tiny).hash == expected


def test_exactly_one_candidate_opens_a_commitment(tiny):
    candidates = ['Maintenance imminent', 'Maintenance overdue', 'Normal wear']
    c = commit(candidates[1], b'fjpd7', tiny)
    assert [verify(c, x, tiny) for x in candidates] == [False, True, False]


def flip_bit(data: bytes, bit: int) -> bytes:
    flipped = bytearray(data)
    flipped[bit // 8] ^= 1 << (bit % 8)
    return bytes(flipped)


def test_single_bit_flips_change_the_digest(tiny):
    rng = random.Random(64)
    payload, salt = b'5367 hours of spindle wear', bytes(generate_salt(rng))
    digests = {commit(payload, salt, tiny).hash}
    for bit in rng.sample(range(8 * len(payload)), 32):
        digests.add(commit(flip_bit(payload, bit), salt, tiny).hash)
    for bit in rng.sample(range(8 * len(salt)), 32):
        digests.add(commit(payload, flip_bit(salt, bit), tiny).hash)
    assert len(digests) == 65
