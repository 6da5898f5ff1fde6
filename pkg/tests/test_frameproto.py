"""Field arithmetic, Reed-Solomon, checksum, framing and dedup tests."""

import random

import pytest

from bluelink import frameproto as fp


class TestGF32:
    def test_zero_annihilates(self):
        for k in range(32):
            assert fp.gf_mul(0, k) == 0
            assert fp.gf_mul(k, 0) == 0

    def test_one_is_identity(self):
        for k in range(32):
            assert fp.gf_mul(1, k) == k

    def test_field_axioms_exhaustive(self):
        # closure, commutativity, associativity on a sample, distributivity in full
        for a in range(32):
            for b in range(32):
                ab = fp.gf_mul(a, b)
                assert 0 <= ab < 32
                assert ab == fp.gf_mul(b, a)
                for c in range(32):
                    assert fp.gf_mul(a, b ^ c) == fp.gf_mul(a, b) ^ fp.gf_mul(a, c)

    def test_associativity_exhaustive(self):
        for a in range(0, 32, 3):
            for b in range(32):
                for c in range(32):
                    assert fp.gf_mul(fp.gf_mul(a, b), c) == fp.gf_mul(a, fp.gf_mul(b, c))

    def test_nonzero_inverses(self):
        for a in range(1, 32):
            assert fp.gf_mul(a, fp.gf_inv(a)) == 1

    def test_range_check(self):
        with pytest.raises(ValueError):
            fp.gf_mul(32, 1)


class TestReedSolomon:
    def test_all_zero_data_gives_zero_parity(self):
        for n_parity in (2, 6, 10):
            cw = fp.rs_encode([0] * 10, n_parity)
            assert cw == [0] * (10 + n_parity)

    def test_clean_roundtrip(self):
        rng = random.Random(0)
        for _ in range(50):
            data = [rng.randrange(32) for _ in range(10)]
            cw = fp.rs_encode(data, 10)
            assert fp.rs_decode(cw, 10) == (data, 0)

    def test_recovers_up_to_half_parity_errors(self):
        rng = random.Random(1)
        for _ in range(300):
            data = [rng.randrange(32) for _ in range(10)]
            cw = fp.rs_encode(data, 10)
            n_err = rng.randint(1, 5)
            pos = rng.sample(range(len(cw)), n_err)
            bad = list(cw)
            for p in pos:
                bad[p] ^= rng.randrange(1, 32)
            decoded = fp.rs_decode(bad, 10)
            assert decoded is not None
            assert decoded == (data, n_err)

    def test_exactly_t_errors(self):
        rng = random.Random(2)
        for n_parity in (6, 8, 10, 12):
            t = n_parity // 2
            for _ in range(50):
                data = [rng.randrange(32) for _ in range(10)]
                cw = fp.rs_encode(data, n_parity)
                pos = rng.sample(range(len(cw)), t)
                bad = list(cw)
                for p in pos:
                    bad[p] ^= rng.randrange(1, 32)
                assert fp.rs_decode(bad, n_parity) == (data, t)

    def test_beyond_capability_never_returns_original(self):
        # t+1 errors: either decode failure or a miscorrection != original.
        rng = random.Random(3)
        detected = 0
        trials = 1000
        for _ in range(trials):
            data = [rng.randrange(32) for _ in range(10)]
            cw = fp.rs_encode(data, 10)
            pos = rng.sample(range(len(cw)), 6)
            bad = list(cw)
            for p in pos:
                bad[p] ^= rng.randrange(1, 32)
            res = fp.rs_decode(bad, 10)
            if res is None or res[0] != data:
                detected += 1
            assert res is None or res[0] != data
        assert detected == trials

    def test_length_bound(self):
        with pytest.raises(ValueError):
            fp.rs_encode([0] * 25, 10)
        with pytest.raises(ValueError):
            fp.rs_decode([0] * 32, 4)


class TestBsd5:
    def test_empty_is_zero(self):
        assert fp.bsd5([]) == 0

    def test_single_symbol_is_itself(self):
        for s in range(32):
            assert fp.bsd5(fp.int_to_bits(s, 5)) == s

    def test_length_multiple_of_five(self):
        with pytest.raises(ValueError):
            fp.bsd5([1, 0, 1])

    def test_single_bit_flip_detection_rate(self):
        rng = random.Random(4)
        detected = 0
        trials = 10000
        for _ in range(trials):
            n = 5 * rng.randint(1, 12)
            bits = [rng.randrange(2) for _ in range(n)]
            ref = fp.bsd5(bits)
            flipped = list(bits)
            flipped[rng.randrange(n)] ^= 1
            detected += fp.bsd5(flipped) != ref
        assert detected / trials >= 0.95


SUPPORTED_LAYOUTS = [
    (10, 10, 30),
    (10, 10, 40),
    (10, 10, 50),
    (10, 10, 60),
    (20, 10, 120),
    (20, 20, 280),
    (30, 30, 720),
]


class TestFrameLayout:
    @pytest.mark.parametrize("rows,cols,parity", SUPPORTED_LAYOUTS)
    def test_supported_layouts_serialize_to_grid_size(self, rows, cols, parity):
        lay = fp.FrameLayout(rows, cols, parity)
        assert (
            lay.data_bits + fp.SEQ_BITS + fp.CHECKSUM_BITS + parity + lay.pad_bits
            == rows * cols
        )
        assert lay.pad_bits == 0
        bits = fp.assemble_frame([0] * lay.data_bits, 0, lay)
        assert len(bits) == rows * cols

    def test_ten_by_ten_half_rate_payload(self):
        # 50 parity bits on 10x10 leaves exactly 40 payload bits
        assert fp.FrameLayout(10, 10, 50).data_bits == 40

    def test_chunks_respect_codeword_bound(self):
        for rows, cols, parity in SUPPORTED_LAYOUTS:
            lay = fp.FrameLayout(rows, cols, parity)
            for n_msg, n_par in lay.chunks():
                assert n_msg + n_par <= 31
            assert sum(m for m, _ in lay.chunks()) == lay.message_symbols
            assert sum(p for _, p in lay.chunks()) == lay.parity_symbols

    def test_rate_constructor(self):
        lay = fp.FrameLayout.from_parity_rate(10, 10, 0.5)
        assert lay.parity_bits == 50

    def test_padded_layout_for_non_symbol_grid(self):
        lay = fp.FrameLayout(4, 4, 0)
        assert lay.data_bits == 5 and lay.pad_bits == 1
        bits = fp.assemble_frame([1, 0, 1, 1, 0], 9, lay)
        assert len(bits) == 16
        res = fp.parse_frame(bits, lay)
        assert res.ok and list(res.payload) == [1, 0, 1, 1, 0] and res.seq == 9

    def test_invalid_layouts(self):
        with pytest.raises(ValueError):
            fp.FrameLayout(10, 10, 33)  # parity not whole symbols
        with pytest.raises(ValueError):
            fp.FrameLayout(2, 2, 0)  # no payload room


class TestFrameRoundtrip:
    def test_all_zero_frame(self):
        lay = fp.FrameLayout(10, 10, 50)
        frame = fp.DataFrame.build([0] * 40, 0, lay)
        assert frame.checksum == 0
        assert all(p == 0 for p in frame.parity)

    def test_random_roundtrips(self):
        rng = random.Random(5)
        lay = fp.FrameLayout(10, 10, 50)
        for _ in range(1000):
            payload = [rng.randrange(2) for _ in range(lay.data_bits)]
            seq = rng.randrange(32)
            res = fp.parse_frame(fp.assemble_frame(payload, seq, lay), lay)
            assert res.ok and list(res.payload) == payload and res.seq == seq

    def test_roundtrip_all_supported_layouts(self):
        rng = random.Random(6)
        for rows, cols, parity in SUPPORTED_LAYOUTS:
            lay = fp.FrameLayout(rows, cols, parity)
            for _ in range(20):
                payload = [rng.randrange(2) for _ in range(lay.data_bits)]
                seq = rng.randrange(32)
                res = fp.parse_frame(fp.assemble_frame(payload, seq, lay), lay)
                assert res.ok and list(res.payload) == payload and res.seq == seq

    def test_corrupt_within_capability_all_layouts(self):
        # parity fraction >= 40%: full recovery after bounded symbol corruption
        rng = random.Random(7)
        for rows, cols, parity in SUPPORTED_LAYOUTS:
            lay = fp.FrameLayout(rows, cols, parity)
            if parity / lay.total_bits < 0.4:
                continue
            for _ in range(30):
                payload = [rng.randrange(2) for _ in range(lay.data_bits)]
                bits = fp.assemble_frame(payload, 3, lay)
                syms = fp.pack_symbols(bits)
                # corrupt up to the per-chunk correction bound
                offset = 0
                p_off = lay.message_symbols
                for n_msg, n_par in lay.chunks():
                    idxs = list(range(offset, offset + n_msg)) + list(
                        range(p_off, p_off + n_par)
                    )
                    for p in rng.sample(idxs, n_par // 2):
                        syms[p] ^= rng.randrange(1, 32)
                    offset += n_msg
                    p_off += n_par
                res = fp.parse_frame(fp.unpack_symbols(syms), lay)
                assert res.ok and list(res.payload) == payload

    def test_five_percent_ber_within_five_symbols_recovers(self):
        rng = random.Random(8)
        lay = fp.FrameLayout(10, 10, 50)
        for _ in range(100):
            payload = [rng.randrange(2) for _ in range(40)]
            bits = fp.assemble_frame(payload, 1, lay)
            # 5 bit errors confined to <= 5 symbols
            symbol_idx = rng.sample(range(20), 5)
            for s in symbol_idx:
                bits[5 * s + rng.randrange(5)] ^= 1
            res = fp.parse_frame(bits, lay)
            assert res.ok and list(res.payload) == payload

    def test_random_bits_rejected(self):
        rng = random.Random(9)
        lay = fp.FrameLayout(10, 10, 50)
        accepted = 0
        for _ in range(1000):
            bits = [rng.randrange(2) for _ in range(100)]
            if fp.parse_frame(bits, lay).ok:
                accepted += 1
        assert accepted <= 40  # >= 96% rejected

    def test_failure_reasons(self):
        lay = fp.FrameLayout(10, 10, 50)
        bits = fp.assemble_frame([1] * 40, 2, lay)
        # break more symbols than RS can correct -> rs_failure
        wrecked = list(bits)
        for s in range(12):
            for b in range(5):
                wrecked[5 * s + b] ^= 1
        res = fp.parse_frame(wrecked, lay)
        assert not res.ok and res.reason in (
            fp.ParseResult.RS_FAILURE,
            fp.ParseResult.CHECKSUM_MISMATCH,
        )

    def test_length_mismatch(self):
        lay = fp.FrameLayout(10, 10, 50)
        with pytest.raises(ValueError):
            fp.parse_frame([0] * 99, lay)
        with pytest.raises(ValueError):
            fp.assemble_frame([0] * 39, 0, lay)


class TestDedup:
    def test_first_frame_accepted(self):
        st = fp.DedupState(sep=4)
        assert fp.dedup_accept(st, 17, 1000)

    def test_duplicate_rejected(self):
        st = fp.DedupState(sep=4)
        fp.dedup_accept(st, 5, 100)
        assert not fp.dedup_accept(st, 5, 102)

    def test_boundary_gap_accepted(self):
        st = fp.DedupState(sep=4)
        fp.dedup_accept(st, 5, 100)
        assert fp.dedup_accept(st, 6, 104)

    def test_insufficient_gap_for_skip(self):
        st = fp.DedupState(sep=4)
        fp.dedup_accept(st, 1, 100)
        assert not fp.dedup_accept(st, 4, 108)  # x=3 needs >= 12
        assert fp.dedup_accept(st, 4, 112)

    def test_wraparound(self):
        st = fp.DedupState(sep=4)
        fp.dedup_accept(st, 31, 100)
        assert fp.dedup_accept(st, 0, 104)

    def test_stale_seq_rejected(self):
        st = fp.DedupState(sep=4)
        fp.dedup_accept(st, 10, 100)
        assert not fp.dedup_accept(st, 9, 200)  # x = 31 > window

    def test_separation_helper(self):
        assert fp.separation(120, 60) == 4
        assert fp.separation(120, 30) == 8

    def test_accepted_sequence_unwraps_increasing(self):
        rng = random.Random(10)
        st = fp.DedupState(sep=4)
        unwrapped = []
        base = 0
        last = None
        idx = 0
        for _ in range(500):
            idx += rng.randint(1, 10)
            seq = rng.randrange(32)
            if fp.dedup_accept(st, seq, idx):
                if last is not None:
                    base += (seq - last) % 32
                unwrapped.append(base)
                last = seq
        assert unwrapped == sorted(unwrapped)
        assert all(b < a for b, a in zip(unwrapped, unwrapped[1:]))
