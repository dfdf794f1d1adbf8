"""Encoder/decoder round trips, innovation bookkeeping, wire format."""

import random
import struct

import numpy as np
import pytest

from codedelay.codec import (
    CodedPacket,
    DecoderState,
    encode,
    pack_packet,
    systematic_packet,
    unpack_packet,
)


def rng_for(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def random_generation(rng, k, L):
    return rng.integers(0, 256, (k, L), dtype=np.uint8)


def fill_with_coded(dec, payloads, rng, gen_id=0):
    m = 0
    while dec.rank < dec.k:
        dec.ingest(encode(gen_id, payloads, m, rng))
        m += 1
    return m


class TestRoundTrip:
    @pytest.mark.parametrize("k", [1, 4, 17, 32])
    def test_all_coded(self, k):
        rng = rng_for(100 + k)
        payloads = random_generation(rng, k, 24)
        dec = DecoderState(0, k, 24)
        fill_with_coded(dec, payloads, rng)
        np.testing.assert_array_equal(dec.decode(), payloads)

    def test_mixed_and_shuffled(self):
        rng = rng_for(7)
        k, L = 8, 40
        payloads = random_generation(rng, k, L)
        pkts = [systematic_packet(3, payloads, i) for i in (0, 2, 5, 7)]
        pkts += [encode(3, payloads, m, rng) for m in range(k)]
        random.Random(7).shuffle(pkts)
        dec = DecoderState(3, k, L)
        for p in pkts:
            dec.ingest(p)
        assert dec.rank == k
        np.testing.assert_array_equal(dec.decode(), payloads)

    def test_systematic_only(self):
        rng = rng_for(8)
        k, L = 5, 10
        payloads = random_generation(rng, k, L)
        dec = DecoderState(0, k, L)
        for i in range(k):
            assert dec.ingest(systematic_packet(0, payloads, i))
        np.testing.assert_array_equal(dec.decode(), payloads)


class TestInnovation:
    def test_duplicate_systematic_not_innovative(self):
        rng = rng_for(9)
        payloads = random_generation(rng, 4, 8)
        dec = DecoderState(0, 4, 8)
        assert dec.ingest(systematic_packet(0, payloads, 1))
        assert not dec.ingest(systematic_packet(0, payloads, 1))
        assert dec.rank == 1

    def test_linear_combination_not_innovative(self):
        rng = rng_for(10)
        payloads = random_generation(rng, 6, 8)
        p1 = encode(0, payloads, 0, rng)
        p2 = encode(0, payloads, 1, rng)
        dep = CodedPacket(generation_id=0, sys_index=None,
                          coeffs=p1.coeffs ^ p2.coeffs,
                          payload=p1.payload ^ p2.payload)
        dec = DecoderState(0, 6, 8)
        assert dec.ingest(p1)
        assert dec.ingest(p2)
        assert not dec.ingest(dep)
        assert dec.rank == 2

    def test_systematic_colliding_with_coded_pivot(self):
        # A coded packet can claim column 0 as its pivot; the later systematic
        # arrival for index 0 must still be counted correctly.
        rng = rng_for(11)
        k, L = 3, 6
        payloads = random_generation(rng, k, L)
        coded = None
        while coded is None or coded.coeffs[0] == 0:
            coded = encode(0, payloads, 0, rng)
        dec = DecoderState(0, k, L)
        assert dec.ingest(coded)
        assert dec.ingest(systematic_packet(0, payloads, 0))
        assert dec.ingest(systematic_packet(0, payloads, 1))
        assert dec.rank == k
        np.testing.assert_array_equal(dec.decode(), payloads)

    def test_rank_never_decreases_and_steps_by_one(self):
        rng = rng_for(12)
        k, L = 10, 12
        payloads = random_generation(rng, k, L)
        pkts = [encode(1, payloads, m, rng) for m in range(2 * k)]
        pkts += [systematic_packet(1, payloads, i) for i in range(k)]
        random.Random(12).shuffle(pkts)
        dec = DecoderState(1, k, L)
        prev = 0
        for p in pkts:
            innovative = dec.ingest(p)
            assert dec.rank - prev == (1 if innovative else 0)
            prev = dec.rank
        assert dec.rank == k

    def test_ingest_after_decodable_still_tracks_systematic(self):
        rng = rng_for(13)
        payloads = random_generation(rng, 3, 4)
        dec = DecoderState(0, 3, 4)
        fill_with_coded(dec, payloads, rng)
        assert not dec.ingest(systematic_packet(0, payloads, 0))
        assert 0 in dec.seen_systematic

    def test_wrong_generation_rejected(self):
        rng = rng_for(14)
        payloads = random_generation(rng, 3, 4)
        dec = DecoderState(5, 3, 4)
        with pytest.raises(ValueError):
            dec.ingest(systematic_packet(6, payloads, 0))


class TestDeliverablePrefix:
    def test_tracks_the_systematic_run(self):
        rng = rng_for(15)
        k, L = 5, 6
        payloads = random_generation(rng, k, L)
        dec = DecoderState(0, k, L)
        assert dec.deliverable_prefix() == 0
        dec.ingest(systematic_packet(0, payloads, 1))
        assert dec.deliverable_prefix() == 0  # gap at index 0
        dec.ingest(systematic_packet(0, payloads, 0))
        assert dec.deliverable_prefix() == 2
        dec.ingest(systematic_packet(0, payloads, 3))
        assert dec.deliverable_prefix() == 2
        fill_with_coded(dec, payloads, rng)
        assert dec.deliverable_prefix() == k

    def test_coded_packets_do_not_advance_it(self):
        rng = rng_for(16)
        payloads = random_generation(rng, 4, 6)
        dec = DecoderState(0, 4, 6)
        dec.ingest(encode(0, payloads, 0, rng))
        assert dec.deliverable_prefix() == 0

    def test_decode_requires_full_rank(self):
        dec = DecoderState(0, 4, 6)
        with pytest.raises(ValueError):
            dec.decode()


class TestWireFormat:
    def test_systematic_round_trip(self):
        rng = rng_for(17)
        payloads = random_generation(rng, 4, 32)
        pkt = systematic_packet(9, payloads, 2)
        blob = pack_packet(pkt, 4)
        assert len(blob) == 4 + 1 + 2 + 32
        back = unpack_packet(blob, 4)
        assert back.generation_id == 9
        assert back.sys_index == 2
        np.testing.assert_array_equal(back.payload, pkt.payload)

    def test_coded_round_trip(self):
        rng = rng_for(18)
        payloads = random_generation(rng, 6, 20)
        pkt = encode(77, payloads, 0, rng)
        blob = pack_packet(pkt, 6)
        assert len(blob) == 4 + 1 + 6 + 20
        back = unpack_packet(blob, 6)
        assert back.generation_id == 77
        assert back.sys_index is None
        np.testing.assert_array_equal(back.coeffs, pkt.coeffs)
        np.testing.assert_array_equal(back.payload, pkt.payload)

    def test_round_trip_through_decoder(self):
        rng = rng_for(19)
        k, L = 5, 16
        payloads = random_generation(rng, k, L)
        dec = DecoderState(0, k, L)
        m = 0
        while dec.rank < k:
            blob = pack_packet(encode(0, payloads, m, rng), k)
            dec.ingest(unpack_packet(blob, k))
            m += 1
        np.testing.assert_array_equal(dec.decode(), payloads)

    def test_unknown_kind_rejected(self):
        blob = struct.pack(">IB", 0, 0x02) + b"\x00" * 8
        with pytest.raises(ValueError):
            unpack_packet(blob, 4)

    def test_truncated_blob_rejected(self):
        with pytest.raises((ValueError, struct.error)):
            unpack_packet(b"\x00\x00\x00", 4)
        # coded frame cut inside the coefficient block
        with pytest.raises((ValueError, struct.error)):
            unpack_packet(struct.pack(">IB", 0, 0x01) + b"\x01\x02", 4)

    def test_coefficient_count_enforced_on_pack(self):
        rng = rng_for(20)
        payloads = random_generation(rng, 4, 8)
        pkt = encode(0, payloads, 0, rng)
        with pytest.raises(ValueError):
            pack_packet(pkt, 5)


def test_encode_never_emits_the_zero_combination():
    rng = rng_for(21)
    payloads = random_generation(rng, 1, 4)
    for m in range(2000):
        pkt = encode(0, payloads, m, rng)
        assert pkt.coeffs.any()
