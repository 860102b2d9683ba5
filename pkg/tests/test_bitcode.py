import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import delta_str, gamma_str
from rdfl.bitcode import (
    MAX_VALUE,
    BitReader,
    BitString,
    BitstreamError,
    BitWriter,
    delta_decode,
    delta_encode,
    delta_lengths,
    delta_tokens,
    floor_log2,
    gamma_decode,
    gamma_encode,
    gamma_lengths,
    gamma_tokens,
    pack_tokens,
)

bitstrings = st.text("01", max_size=80).map(BitString)


class TestBitString:
    @given(bitstrings, bitstrings, bitstrings)
    def test_concat_associative(self, a, b, c):
        assert (a + b) + c == a + (b + c)

    @given(bitstrings)
    def test_empty_identity(self, a):
        assert a + BitString() == a == BitString() + a

    @given(bitstrings)
    def test_serialize_roundtrip(self, a):
        data = a.serialize()
        assert int.from_bytes(data[:8], "little") == len(a)
        assert len(data) == 8 + (len(a) + 7) // 8
        assert BitString.deserialize(data) == a

    def test_msb_first_zero_padded(self):
        assert BitString("1").to_bytes() == b"\x80"
        assert BitString("0110011111010").to_bytes() == bytes([0x67, 0xD0])

    def test_deserialize_wrong_size(self):
        with pytest.raises(BitstreamError):
            BitString.deserialize(b"\x10" + b"\x00" * 7 + b"\x00")
        with pytest.raises(BitstreamError):
            BitString.deserialize(b"\x00")

    def test_rejects_non_bits(self):
        with pytest.raises(ValueError):
            BitString("012")
        with pytest.raises(ValueError):
            BitString([0, 2])

    def test_str_and_startswith(self):
        b = BitString("10110")
        assert str(b) == "10110" and b.startswith(BitString("101")) and not b.startswith(BitString("11"))
        assert BitString.concat([BitString("1"), BitString("0")]) == BitString("10")
        assert BitString.concat([]) == BitString()


class TestReaderWriter:
    def test_writer(self):
        w = BitWriter()
        w.write_bit(1)
        w.write_uint(5, 4)
        w.write(BitString("11"))
        assert str(w.getvalue()) == "1010111"

    def test_writer_overflow(self):
        with pytest.raises(ValueError):
            BitWriter().write_uint(16, 4)

    def test_reader_never_passes_end(self):
        r = BitReader(BitString("10"))
        assert r.read_bit() == 1 and r.read_bit() == 0
        with pytest.raises(BitstreamError):
            r.read_bit()
        assert r.cursor == 2
        with pytest.raises(BitstreamError):
            BitReader(BitString("1")).read_uint(2)


class TestGamma:
    @pytest.mark.parametrize("n, bits", [(1, "1"), (4, "00100"), (17, "000010001")])
    def test_examples(self, n, bits):
        assert str(gamma_encode(n)) == bits

    @pytest.mark.parametrize("bits, n", [("1", 1), ("00100", 4)])
    def test_decode_examples(self, bits, n):
        r = BitReader(BitString(bits))
        assert gamma_decode(r) == n and r.remaining == 0

    def test_concatenated(self):
        r = BitReader(BitString("011") + BitString("1"))
        assert gamma_decode(r) == 3 and gamma_decode(r) == 1

    @pytest.mark.parametrize("n", [0, -3])
    def test_nonpositive(self, n):
        with pytest.raises(ValueError):
            gamma_encode(n)

    def test_limit(self):
        assert len(gamma_encode(MAX_VALUE)) == 2 * 61 + 1
        with pytest.raises(OverflowError):
            gamma_encode(MAX_VALUE + 1)

    def test_truncated(self):
        with pytest.raises(BitstreamError):
            gamma_decode(BitReader(BitString("0010")))
        with pytest.raises(BitstreamError):
            gamma_decode(BitReader(BitString("000")))

    def test_too_many_leading_zeros(self):
        with pytest.raises(BitstreamError, match="leading zeros"):
            gamma_decode(BitReader(BitString("0" * 70 + "1" * 71)))

    @given(st.integers(1, MAX_VALUE))
    def test_matches_oracle(self, n):
        assert str(gamma_encode(n)) == gamma_str(n)
        assert gamma_decode(BitReader(gamma_encode(n))) == n


class TestDelta:
    @pytest.mark.parametrize("n, bits", [(1, "1"), (2, "0100"), (4, "01100")])
    def test_examples(self, n, bits):
        assert str(delta_encode(n)) == bits

    @given(st.integers(1, MAX_VALUE))
    def test_matches_oracle(self, n):
        assert str(delta_encode(n)) == delta_str(n)
        assert delta_decode(BitReader(delta_encode(n))) == n

    def test_shorter_than_gamma_from_32(self):
        n = np.arange(32, 2**16)
        assert np.all(delta_lengths(n) <= gamma_lengths(n))

    def test_truncated(self):
        with pytest.raises(BitstreamError):
            delta_decode(BitReader(BitString("0110")))


class TestVectorized:
    @given(st.lists(st.integers(1, MAX_VALUE), min_size=1, max_size=40))
    def test_tokens_match_scalar_codes(self, ns):
        n = np.array(ns, dtype=np.int64)
        for tokens, lengths, ref in ((gamma_tokens, gamma_lengths, gamma_str), (delta_tokens, delta_lengths, delta_str)):
            v, w = tokens(n)
            assert "".join(map(str, pack_tokens(v.ravel(), w.ravel()))) == "".join(ref(x) for x in ns)
            assert lengths(n).tolist() == [len(ref(x)) for x in ns]

    @given(st.integers(1, MAX_VALUE))
    def test_floor_log2_exact(self, n):
        assert floor_log2(np.array([n]))[0] == n.bit_length() - 1

    def test_floor_log2_rejects_zero(self):
        with pytest.raises(ValueError):
            floor_log2(np.array([0]))

    def test_pack_tokens_empty(self):
        assert pack_tokens(np.array([], dtype=np.uint64), np.array([], dtype=np.int64)).size == 0
