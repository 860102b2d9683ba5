import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from rdfl.baselines import (
    BaselineConfig,
    baseline_encode,
    decode_any,
    drive_decode,
    drive_encode,
    drive_scale,
    drive_signs,
    no_compression,
    pack_trits,
    qsgd_decode,
    qsgd_encode,
    tlc_decode,
    tlc_encode,
    tlc_packed_bits,
    topk_count,
    topk_decode,
    topk_encode,
    unpack_trits,
)
from rdfl.bitcode import BitString, BitstreamError
from rdfl.codec import EncodedUpdate, rate_of
from rdfl.transforms import inverse_hadamard, next_pow2, randomized_hadamard
from rdfl.updates import make_rng

vectors = hnp.arrays(np.float64, st.integers(0, 200), elements=st.floats(-1e3, 1e3, width=32))


def through_bytes(e):
    return EncodedUpdate.from_bytes(e.to_bytes())


class TestTopK:
    def test_hand_count(self):
        e = topk_encode([5.0, -1.0, 0.5, 0.0], 0.25)
        assert topk_decode(e).tolist() == [5, 0, 0, 0]
        assert len(e.payload) == 36 and len(e.payload) / 4 == 9

    def test_keep_all(self):
        u = np.float32(make_rng(0).normal(size=50)).astype(np.float64)
        assert np.array_equal(topk_decode(topk_encode(u, 1.0)), u)

    def test_ties_lower_index_first(self):
        assert topk_decode(topk_encode([1.0, -1.0, 1.0, 0.5], 0.5)).tolist() == [1, -1, 0, 0]

    def test_count(self):
        assert topk_count(1000, 0.1) == 100 and topk_count(7, 0.1) == 1 and topk_count(3, 1.0) == 3

    @given(vectors, st.floats(0.01, 1.0))
    def test_error_is_dropped_energy(self, u, f):
        e = topk_encode(u, f)
        out = topk_decode(through_bytes(e))
        k = topk_count(u.size, f)
        assert len(e.payload) == u.size + 32 * k
        dropped = out == 0
        assert out.size == u.size
        assert math.isclose(np.sum((u - out) ** 2), np.sum(u[dropped] ** 2), rel_tol=1e-12, abs_tol=1e-12)


class TestQSGD:
    def test_exact(self):
        e = qsgd_encode([5.0, 0.0, 0.0], 1, make_rng(0))
        assert qsgd_decode(e).tolist() == [5, 0, 0]

    def test_zero_norm(self):
        e = qsgd_encode([0.0, 0.0], 4, make_rng(0))
        assert len(e.payload) == 0 and qsgd_decode(through_bytes(e)).tolist() == [0, 0]

    def test_unbiased(self):
        u = np.array([0.6, -0.8])
        rng = make_rng(1)
        n = 10**5
        outs = np.array([qsgd_decode(qsgd_encode(u, 2, rng)) for _ in range(n)])
        se = outs.std(axis=0) / math.sqrt(n)
        assert np.all(np.abs(outs.mean(axis=0) - u) <= 4 * se)

    @given(vectors, st.integers(1, 64), st.integers(0, 2**32))
    def test_levels_bounded(self, u, s, seed):
        out = qsgd_decode(through_bytes(qsgd_encode(u, s, make_rng(seed))))
        norm = np.linalg.norm(u)
        assert out.size == u.size
        assert np.all(np.abs(out) <= np.float32(norm) * (1 + 1e-6) + 1e-30)
        assert np.all(np.sign(out) * np.sign(u) >= 0)


class TestDrive:
    @staticmethod
    def identity_rotation_roundtrip(u):
        # DRIVE with the sign diagonal fixed to the identity
        y = randomized_hadamard(u, None)
        return inverse_hadamard(drive_scale(y) * drive_signs(y), None, len(u))

    def test_hand_trace(self):
        y = randomized_hadamard([1.0, 1.0], None)
        assert math.isclose(drive_scale(y), math.sqrt(2) / 2)
        out = self.identity_rotation_roundtrip([1.0, 1.0])
        assert np.allclose(out, [1.0, 0.0])
        assert math.isclose(np.sum((out - 1.0) ** 2), 1.0)

    def test_equal_magnitudes_are_exact(self):
        u = randomized_hadamard([0.5, -0.5, 0.5, 0.5], None)  # H is self-inverse
        assert np.allclose(self.identity_rotation_roundtrip(u), u)
        assert np.allclose(drive_decode(drive_encode(u, 0)), drive_decode(drive_encode(u, 0)))

    def test_scale_optimality(self):
        rng = make_rng(2)
        for _ in range(100):
            y = randomized_hadamard(rng.normal(size=int(rng.integers(1, 300))), int(rng.integers(2**32)))
            s, sg = drive_scale(y), drive_signs(y)
            base = np.sum((y - s * sg) ** 2)
            for f in (0.99, 1.01):
                assert np.sum((y - f * s * sg) ** 2) >= base

    def test_sign_of_zero_is_positive(self):
        assert drive_signs(np.array([0.0, -0.0, -1.0])).tolist() == [1, 1, -1]

    @given(vectors, st.integers(0, 2**63))
    def test_fixed_rate(self, u, seed):
        e = drive_encode(u, seed)
        assert len(e.payload) == next_pow2(u.size) + 32
        assert decode_any(through_bytes(e)).size == u.size


class TestTLC:
    def test_extremes_exact(self):
        e = tlc_encode([4.0, 0.0, -4.0], 1.0, make_rng(0))
        assert tlc_decode(e).tolist() == [4, 0, -4]

    def test_unbiased(self):
        u = np.array([2.0, 0.0, -4.0])
        rng = make_rng(3)
        n = 2 * 10**4
        outs = np.array([tlc_decode(tlc_encode(u, 1.0, rng)) for _ in range(n)])
        se = np.maximum(outs.std(axis=0) / math.sqrt(n), 1e-12)
        assert np.all(np.abs(outs.mean(axis=0) - u) <= 4 * se)

    def test_unbiased_with_larger_multiplier(self):
        u = np.array([1.0, -0.5, 3.0])
        rng = make_rng(4)
        n = 2 * 10**4
        outs = np.array([tlc_decode(tlc_encode(u, 1.9, rng)) for _ in range(n)])
        se = outs.std(axis=0) / math.sqrt(n)
        assert np.all(np.abs(outs.mean(axis=0) - u) <= 4 * se)

    def test_pack_five_ones(self):
        assert pack_trits([1, 1, 1, 1, 1]) == bytes([242])

    @given(st.lists(st.integers(-1, 1), max_size=60))
    def test_trit_roundtrip(self, t):
        data = pack_trits(t)
        assert len(data) == math.ceil(len(t) / 5)
        assert unpack_trits(data, len(t)).tolist() == t

    def test_zero_vector(self):
        e = tlc_encode(np.zeros(4), 1.0, make_rng(0))
        assert tlc_decode(through_bytes(e)).tolist() == [0, 0, 0, 0]

    def test_packed_size(self):
        assert tlc_packed_bits(10) == 32 + 16


class TestNone:
    def test_rate(self):
        assert len(no_compression(np.ones(10)).payload) == 320

    def test_identity(self):
        u = np.float32(make_rng(0).normal(size=100)).astype(np.float64)
        e = through_bytes(no_compression(u))
        assert np.array_equal(decode_any(e), u)
        assert rate_of(e).payload_bits == 3200


class TestDispatch:
    @pytest.mark.parametrize("cfg", [
        BaselineConfig("topk", topk_fraction=0.3),
        BaselineConfig("qsgd", qsgd_levels=4),
        BaselineConfig("drive", seed=9),
        BaselineConfig("tlc", tlc_sparsity=1.5),
        BaselineConfig("none"),
    ])
    def test_all_methods_roundtrip_bytes(self, cfg):
        u = make_rng(0).normal(size=37)
        e = baseline_encode(u, cfg, make_rng(1))
        assert decode_any(through_bytes(e)).size == 37
        assert np.array_equal(decode_any(through_bytes(e)), decode_any(e))

    def test_validation(self):
        with pytest.raises(ValueError):
            BaselineConfig("bogus")
        with pytest.raises(ValueError):
            BaselineConfig("topk", topk_fraction=0)
        with pytest.raises(ValueError):
            BaselineConfig("qsgd", qsgd_levels=0)
        with pytest.raises(ValueError):
            BaselineConfig("tlc", tlc_sparsity=0.5)
        assert BaselineConfig("topk").label == "topk:0.1"

    def test_truncated_payloads(self):
        u = make_rng(0).normal(size=20)
        for cfg in (BaselineConfig("topk"), BaselineConfig("drive"), BaselineConfig("none")):
            e = baseline_encode(u, cfg, make_rng(1))
            cut = EncodedUpdate(e.quantizer, e.code, e.d, e.step, BitString(str(e.payload)[:-9]), e.dither_seed)
            with pytest.raises(BitstreamError):
                decode_any(cut)
