import numpy as np
import pytest

from boolnl import dataset as ds
from boolnl import experiments as ex
from boolnl import neural as nn
from boolnl.boolfn import affine_functions, sign_encode
from boolnl.transform import affine_distances, hadamard, nonlinearities


def test_learn_walsh_n2_recovers_h4():
    r = ex.learn_walsh(2, seed=1)
    assert r.metrics["hadamard_recovered"] is True
    assert r.metrics["max_weight_deviation"] < 0.1
    assert r.metrics["rank"] == 4
    assert r.config["num_examples"] == 4


def test_learn_walsh_n4():
    r = ex.learn_walsh(4, seed=0)
    assert r.metrics["hadamard_recovered"] and r.metrics["within_tolerance_0.1"]


def test_learn_walsh_with_bias_is_underdetermined_at_n_examples():
    r = ex.learn_walsh(3, config=ex.WalshConfig(bias=True, max_epochs=3000), seed=0)
    assert r.metrics["max_weight_deviation"] > 0.1


def test_extra_epochs_at_optimum_keep_hadamard():
    d = ds.independent_set(2, 4, seed=0)
    net = nn.Network(4, [nn.LayerSpec.dense(4, bias=False)], [(hadamard(4), np.zeros(4))])
    nn.train_on(net, d, nn.TrainConfig(optimizer="sgd", learning_rate=0.01, batch_size=4, epochs=50))
    assert np.array_equal(net.params[0][0], hadamard(4))


def test_learn_walsh_range():
    with pytest.raises(ValueError):
        ex.learn_walsh(1)


def test_sweep_grid():
    assert ex.sweep_grid(3) == [1, 2, 4, 6, 7, 8, 16]
    assert ex.sweep_grid(4) == [2, 4, 8, 12, 14, 15, 16, 32]


def test_min_examples_sweep_small():
    r = ex.min_examples_sweep(3, counts=[1, 4, 8], seed=0)
    curve = {k: acc for k, acc, *_ in r.tables["curve"][1]}
    assert curve[8] == 1.0
    assert curve[1] < 0.05
    assert r.metrics["accuracy_at_N"] == 1.0
    with pytest.raises(ValueError):
        ex.min_examples_sweep(3, counts=[17])


def test_affine_min_exhaustive_n4():
    d = ds.generate(4, "nonlinearity", 65536, seed=0)
    out = ex.affine_min_network(4).predict(d.inputs())
    assert np.array_equal(out[:, 0], d.targets[:, 0])


def test_affine_min_affine_inputs_zero():
    net = ex.affine_min_network(5)
    X = np.stack([sign_encode(f) for f in affine_functions(5)]).astype(float)
    assert not net.predict(X).any()


def test_affine_min_hidden_equals_distances(rng):
    net = ex.affine_min_network(5)
    bits = rng.integers(0, 2, size=(100, 32)).astype(np.uint8)
    hidden = net.hidden(1.0 - 2.0 * bits, 1)
    from boolnl.boolfn import TruthTable
    for row, b in zip(hidden, bits):
        assert row.tolist() == affine_distances(TruthTable.from_bits(b)).tolist()


def test_affine_min_warm_start_keeps_accuracy():
    d = ds.generate(4, "nonlinearity", 2000, seed=3)
    cfg = nn.TrainConfig(optimizer="sgd", learning_rate=1e-4, batch_size=64, epochs=3, seed=0)
    r = ex.affine_min_training_attempt(4, d, None, cfg, warm_start=True)
    assert r.metrics["train_accuracy"] == 1.0
    assert r.metrics["row_match_max_linf"] < 0.1
    assert len(r.tables["loss"][1]) == 3


def test_affine_min_random_init_reports():
    d = ds.generate(3, "nonlinearity", 256, seed=0)
    cfg = nn.TrainConfig(epochs=2, seed=0)
    r = ex.affine_min_training_attempt(3, d, d, cfg)
    assert r.expected_negative
    assert 0.0 <= r.metrics["test_accuracy"] <= 1.0


def test_encoder_parameter_counts():
    assert ex.encoder_for(4).parameter_count() == 3881
    assert ex.encoder_for(5).parameter_count() == 192169
    with pytest.raises(ValueError):
        ex.encoder_for(7)


def test_end_to_end_data_split():
    cfg = ex.EndToEndConfig().resolved(4)
    tr, te = ex.end_to_end_data(4, cfg, seed=0)
    assert (len(tr), len(te)) == (30000, 35536)


def test_end_to_end_small_run_is_reproducible(tmp_path):
    cfg = ex.EndToEndConfig(train_size=100, test_size=28, epochs=3)
    a = ex.end_to_end(3, cfg, seed=4)
    b = ex.end_to_end(3, cfg, seed=4)
    assert a.render() == b.render()
    assert a.expected_negative
    assert "confusion_test" in a.tables
    paths = a.write(tmp_path)
    assert paths[0].name == "end_to_end_3_4.report"
    assert (tmp_path / "end_to_end_3_4_loss.csv").exists()


def test_cost_benchmark_n4():
    rep, timings = ex.cost_benchmark(4, ex.encoder_for(4), batch=64, min_seconds=0.01)
    methods = {m for m, _, _ in timings}
    assert methods == {"fwt", "naive", "network"}
    assert rep.metrics["network_params_exceed_N"]
    again, _ = ex.cost_benchmark(4, ex.encoder_for(4), batch=64, min_seconds=0.01)
    assert rep.render() == again.render()
    s = ex.timing_summary(4, timings)
    assert s["ordering_asserted"] is False and "network_over_fwt_ratio" in s


def test_cost_benchmark_arity_check():
    with pytest.raises(nn.ShapeError):
        ex.cost_benchmark(5, ex.encoder_for(4))


def test_report_render_format():
    r = ex.ExperimentReport("demo", 2, 0, config={"a": 1.5}, metrics={"ok": True})
    r.tables["t"] = (["x", "y"], [(1, 2.0)])
    text = r.render()
    assert "ok = true" in text and "[table t]\nx,y\n1,2.0" in text


def test_nonlinearity_oracle_matches_network_n6(rng):
    bits = rng.integers(0, 2, size=(500, 64)).astype(np.uint8)
    out = ex.affine_min_network(6).predict(1.0 - 2.0 * bits)[:, 0]
    assert np.array_equal(out, nonlinearities(bits))


def test_end_to_end_config_resolution():
    c5 = ex.EndToEndConfig().resolved(5)
    assert (c5.weight_init, c5.learning_rate, c5.weight_decay, c5.epochs) == ("he_uniform", 1e-4, 0.05, 160)
    c4 = ex.EndToEndConfig().resolved(4)
    assert (c4.weight_init, c4.learning_rate, c4.weight_decay) == ("uniform_scaled", 1e-3, 0.0)
    assert ex.EndToEndConfig(learning_rate=5e-4, epochs=7).resolved(5).learning_rate == 5e-4
    assert ex.EndToEndConfig(epochs=7).resolved(5).epochs == 7


def test_walsh_training_set_is_well_conditioned():
    r = ex.learn_walsh(7, seed=1)
    m = r.metrics
    assert m["rank"] == 128 and m["gram_condition"] <= ex.WALSH_MAX_CONDITION
    assert m["set_redraws"] >= 1  # the first draw for this seed is nearly singular
    assert m["hadamard_recovered"]
