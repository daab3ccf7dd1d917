import numpy as np
import pytest

from boolnl import dataset as ds
from boolnl.transform import hadamard, nonlinearities_bruteforce, walsh_naive
from boolnl.boolfn import TruthTable


def test_generate_full_space_n4():
    d = ds.generate(4, "nonlinearity", 65536, seed=7)
    assert len(d) == 65536
    idx = d.bits.astype(np.int64) @ (1 << np.arange(16))
    assert np.array_equal(np.sort(idx), np.arange(65536))
    assert d.targets.min() == 0 and d.targets.max() == 6
    sample = np.arange(0, 65536, 97)
    assert np.array_equal(d.targets[sample, 0], nonlinearities_bruteforce(d.bits[sample]))


def test_generate_walsh_n2_full():
    d = ds.generate(2, "walsh_spectrum", 16, seed=3)
    assert len({r.tobytes() for r in d.bits}) == 16
    for i in range(16):
        assert d.targets[i].tolist() == walsh_naive(d.function(i)).tolist()


def test_generate_deterministic_and_seed_sensitive():
    a = ds.dumps(ds.generate(5, "nonlinearity", 500, seed=11))
    b = ds.dumps(ds.generate(5, "nonlinearity", 500, seed=11))
    c = ds.dumps(ds.generate(5, "nonlinearity", 500, seed=12))
    assert a == b != c


def test_generate_prefix_stability_n5():
    # record i depends only on (seed, i): a shorter request is a prefix of a longer one
    small = ds.generate(5, "nonlinearity", 100, seed=2)
    large = ds.generate(5, "nonlinearity", 3000, seed=2)
    assert np.array_equal(small.bits, large.bits[:100])


def test_generate_no_duplicates_n6():
    d = ds.generate(6, "nonlinearity", 2000, seed=1)
    assert len({r.tobytes() for r in d.bits}) == 2000


def test_generate_rejects_oversize():
    with pytest.raises(ds.DatasetError):
        ds.generate(2, "nonlinearity", 17, seed=0)
    with pytest.raises(ds.DatasetError):
        ds.generate(2, "bogus", 4, seed=0)


def test_sample_tables_exclude():
    first = ds.sample_tables(3, 100, seed=1)
    rest = ds.sample_tables(3, 156, seed=1, tag="other", exclude=first)
    keys = {r.tobytes() for r in first} | {r.tobytes() for r in rest}
    assert len(keys) == 256


def test_rank_examples():
    assert ds.rank(np.ones((4, 4))) == 1
    assert ds.rank(hadamard(8)) == 8
    assert ds.rank([[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]]) == 4


def test_rank_matches_bareiss_and_numpy(rng):
    for _ in range(30):
        k, n = rng.integers(1, 9, size=2)
        m = rng.choice([-1, 1], size=(k, n))
        m[rng.integers(0, k)] = m[0]
        r = ds.rank(m)
        assert r == ds._rank_bareiss(m.tolist()) == np.linalg.matrix_rank(m)


def test_rank_deficient_large():
    m = np.vstack([hadamard(16)[:10], hadamard(16)[:3].sum(axis=0)])
    assert ds.rank(m) == 10


@pytest.mark.parametrize("n,k", [(2, 4), (3, 1), (5, 32), (6, 40)])
def test_independent_set(n, k):
    d = ds.independent_set(n, k, seed=5)
    assert len(d) == k
    x = d.inputs()
    assert set(np.unique(x)) <= {-1.0, 1.0}
    assert ds.rank(x) == k
    assert ds._rank_bareiss(x.astype(int).tolist()) == k or n > 5
    for i in range(min(k, 5)):
        assert d.targets[i].tolist() == walsh_naive(d.function(i)).tolist()


def test_independent_set_errors():
    with pytest.raises(ds.DatasetError):
        ds.independent_set(2, 5, seed=0)
    with pytest.raises(ds.DatasetError):
        ds.independent_set(3, 8, seed=0, max_draws=3)


def test_split_sizes_and_partition():
    d = ds.generate(4, "nonlinearity", 65536, seed=7)
    tr, te = ds.split(d, 30000 / 65536, seed=1)
    assert (len(tr), len(te)) == (30000, 35536)
    assert tr.split == "train" and te.split == "test"
    keys_tr = {r.tobytes() for r in tr.bits}
    keys_te = {r.tobytes() for r in te.bits}
    assert not keys_tr & keys_te
    assert keys_tr | keys_te == {r.tobytes() for r in d.bits}
    tr2, _ = ds.split(d, 30000 / 65536, seed=1)
    assert tr2 == tr
    tr3, _ = ds.split(d, 30000 / 65536, seed=2)
    assert tr3 != tr


def test_split_degenerate():
    d = ds.generate(2, "nonlinearity", 4, seed=0)
    with pytest.raises(ds.DatasetError):
        ds.split(d, 0.0, seed=0)
    with pytest.raises(ds.DatasetError):
        ds.split(d, 0.1, seed=0)


def test_save_load_roundtrip(tmp_path):
    for n, task, k in [(1, "nonlinearity", 4), (3, "walsh_spectrum", 20), (5, "nonlinearity", 20),
                       (8, "walsh_spectrum", 20)]:
        d = ds.generate(n, task, k, seed=n)
        p = tmp_path / f"d{n}.bnl"
        ds.save(d, p)
        assert ds.load(p, verify="full") == d
        text = p.read_bytes()
        assert text.startswith(f"BNLDS v1 n={n} task={task} size={k} seed={n} split=all\n".encode())
        assert b"\r" not in text


def test_empty_dataset(tmp_path):
    p = tmp_path / "e.bnl"
    p.write_text("BNLDS v1 n=4 task=nonlinearity size=0 seed=0 split=all\n")
    d = ds.load(p)
    assert len(d) == 0 and d.bits.shape == (0, 16)


def test_load_errors(tmp_path):
    good = ds.dumps(ds.generate(3, "nonlinearity", 5, seed=0))
    lines = good.splitlines(keepends=True)
    cases = {
        "badmagic": "XXX" + good,
        "count": good.replace("size=5", "size=6"),
        "arity": good.replace("n=3", "n=4", 1),
        "hex": lines[0] + "zz\t1\n" + "".join(lines[2:]),
        "tab": lines[0] + lines[1].replace("\t", " ") + "".join(lines[2:]),
        "target": lines[0] + lines[1].split("\t")[0] + "\t9\n" + "".join(lines[2:]),
    }
    for name, text in cases.items():
        p = tmp_path / f"{name}.bnl"
        p.write_text(text)
        with pytest.raises(ds.DatasetFormatError, match="line"):
            ds.load(p, verify="full")


def test_spot_check_catches_corrupted_first_record(tmp_path):
    d = ds.generate(4, "nonlinearity", 300, seed=0)
    t = d.targets.copy()
    t[0, 0] = (t[0, 0] + 1) % 7
    bad = ds.Dataset(4, "nonlinearity", d.bits, t, seed=0)
    with pytest.raises(ds.DatasetFormatError):
        ds.loads(ds.dumps(bad))
    ds.loads(ds.dumps(bad), verify="none")


def test_example_view():
    d = ds.generate(2, "nonlinearity", 4, seed=0)
    ex = list(d.examples())
    assert len(ex) == 4
    assert set(ex[0].input.tolist()) <= {-1.0, 1.0}
    f = d.function(0)
    assert ex[0].target[0] == d.targets[0, 0]
    assert isinstance(f, TruthTable)
