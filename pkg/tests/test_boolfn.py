import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boolnl.boolfn import (
    AnfCoefficients, TruthTable, TruthTableError, affine_functions, anf_to_truth_table,
    degree, function_from_index, function_to_index, hamming_distance, indices_from_tables,
    is_affine, mobius_transform, sign_decode, sign_encode, tables_from_indices, weight,
)

from conftest import affine_oracle, anf_eval_oracle


def tables(max_n=6):
    return st.integers(1, max_n).flatmap(
        lambda n: st.integers(0, (1 << (1 << n)) - 1).map(lambda v: TruthTable(n, v)))


def test_truth_table_validation():
    with pytest.raises(TruthTableError):
        TruthTable(0, 0)
    with pytest.raises(TruthTableError):
        TruthTable(21, 0)
    with pytest.raises(TruthTableError):
        TruthTable(2, 16)
    with pytest.raises(TruthTableError):
        TruthTable.from_string("011")
    with pytest.raises(TruthTableError):
        TruthTable.from_string("0120")
    with pytest.raises(TruthTableError):
        TruthTable.from_string("")


def test_bits_are_lexicographic():
    f = TruthTable.from_string("0110")
    assert f.bits.tolist() == [0, 1, 1, 0]
    assert f.to_string() == "0110"
    # x1 is the high bit: f = x1 is 0011
    assert TruthTable.from_string("0011").bits[2] == 1


def test_hex_form():
    f = TruthTable.from_string("01101001")
    assert f.to_hex() == "69"
    assert TruthTable.from_hex("69") == f
    assert TruthTable.from_hex("0x69") == f
    assert TruthTable.parse("0x69") == f
    assert TruthTable.parse("01101001") == f
    assert TruthTable.from_hex("6", n=2) == TruthTable.from_string("0110")
    # tables shorter than one digit sit in the high bits
    assert TruthTable.from_string("01").to_hex() == "4"
    assert TruthTable.from_hex("4", n=1) == TruthTable.from_string("01")
    with pytest.raises(TruthTableError):
        TruthTable.from_hex("5", n=1)
    with pytest.raises(TruthTableError):
        TruthTable.from_hex("abc")


@pytest.mark.parametrize("text,expected", [("000", None), ("00000000", 0), ("11111111", 8), ("0110", 2)])
def test_weight(text, expected):
    if expected is None:
        with pytest.raises(TruthTableError):
            TruthTable.from_string(text)
    else:
        assert weight(TruthTable.from_string(text)) == expected


def test_hamming_distance_examples():
    f = TruthTable.from_string("01101100")
    assert hamming_distance(f, f) == 0
    assert hamming_distance(f, ~f) == 8
    assert hamming_distance(TruthTable.from_string("0110"), TruthTable.from_string("0000")) == 2
    with pytest.raises(TruthTableError):
        hamming_distance(TruthTable.from_string("01"), TruthTable.from_string("0110"))


@settings(max_examples=200)
@given(st.integers(1, 6).flatmap(lambda n: st.tuples(
    st.integers(0, (1 << (1 << n)) - 1), st.integers(0, (1 << (1 << n)) - 1), st.just(n))))
def test_hamming_is_weight_of_xor(t):
    a, b, n = t
    f, g = TruthTable(n, a), TruthTable(n, b)
    d = hamming_distance(f, g)
    assert d == weight(f ^ g) == hamming_distance(g, f)
    assert d == int(np.sum(f.bits != g.bits))
    assert (d == 0) == (f == g)


def test_mobius_examples():
    assert not mobius_transform(TruthTable(3, 0)).coeffs.any()
    anf = mobius_transform(TruthTable.from_string("0110"))
    # monomial index 1 is x2, 2 is x1 (x1 is the high bit)
    assert anf.coeffs.tolist() == [0, 1, 1, 0]
    assert sorted(anf.monomials()) == [(1,), (2,)]
    assert str(mobius_transform(TruthTable.from_string("0001"))) == "x1x2"
    assert str(anf) == "x1 + x2"
    assert str(mobius_transform(TruthTable.from_string("1001"))) == "1 + x1 + x2"


def test_mobius_reproduces_function_via_anf_evaluation(rng):
    for _ in range(30):
        f = TruthTable.from_bits(rng.integers(0, 2, 16))
        c = mobius_transform(f).coeffs
        assert [anf_eval_oracle(c, x) for x in range(16)] == f.bits.tolist()


def test_mobius_involution_random_n5(rng):
    for _ in range(100):
        f = TruthTable.from_bits(rng.integers(0, 2, 32))
        anf = mobius_transform(f)
        assert anf_to_truth_table(anf) == f
        assert np.array_equal(mobius_transform(anf_to_truth_table(anf)).coeffs, anf.coeffs)


def test_degree_examples():
    assert degree(TruthTable(3, 0)) == 0
    assert degree(~TruthTable(3, 0)) == 0
    assert degree(TruthTable.from_string("0001")) == 2
    assert degree(TruthTable.from_string("0110")) == 1
    assert degree(TruthTable.from_string("00000001")) == 3


def test_affine_functions_n1():
    assert [str(f) for f in affine_functions(1)] == ["00", "01", "11", "10"]


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_affine_functions_structure(n):
    fs = affine_functions(n)
    size = 1 << n
    assert len(fs) == 2 * size == len(set(fs))
    assert all(degree(f) <= 1 for f in fs)
    for w in range(size):
        assert (fs[w] ^ fs[w + size]) == ~TruthTable(n, 0)
    # same set as the direct a0 + sum a_i x_i enumeration
    assert {f.to_string() for f in fs} == {"".join(map(str, r)) for r in affine_oracle(n)}


def test_degree_le_one_iff_affine_n3():
    affine = set(affine_functions(3))
    for v in range(256):
        f = TruthTable(3, v)
        assert (degree(f) <= 1) == (f in affine) == is_affine(f)


def test_sign_encode():
    assert sign_encode(TruthTable.from_string("0000")).tolist() == [1, 1, 1, 1]
    assert sign_encode(TruthTable.from_string("0110")).tolist() == [1, -1, -1, 1]
    assert sign_encode(TruthTable.from_string("1111")).tolist() == [-1, -1, -1, -1]
    with pytest.raises(TruthTableError):
        sign_decode([1, 0, 1, 1])


@given(tables())
def test_sign_roundtrip(f):
    v = sign_encode(f)
    assert np.array_equal(v, 1 - 2 * f.bits.astype(int))
    assert sign_decode(v) == f


def test_function_index():
    assert str(function_from_index(2, 0)) == "0000"
    assert str(function_from_index(2, 6)) == "0110"
    with pytest.raises(TruthTableError):
        function_from_index(2, 16)
    with pytest.raises(TruthTableError):
        function_from_index(2, -1)


def test_function_index_roundtrip_n5(rng):
    for idx in rng.integers(0, 1 << 32, size=1000, dtype=np.uint64):
        f = function_from_index(5, int(idx))
        assert function_to_index(f) == int(idx)
        assert all(f.bits[i] == (int(idx) >> i) & 1 for i in range(32))


def test_batch_index_helpers(rng):
    idx = rng.integers(0, 1 << 32, size=50, dtype=np.uint64)
    bits = tables_from_indices(5, idx)
    assert np.array_equal(indices_from_tables(bits), idx)
    assert np.array_equal(bits[3], function_from_index(5, int(idx[3])).bits)


def test_anf_string_constant():
    assert str(AnfCoefficients(2, np.array([1, 0, 0, 0]))) == "1"
    assert str(AnfCoefficients(2, np.zeros(4, dtype=np.uint8))) == "0"
