"""Reproducible runs of the learnability experiments and the cost comparison.

Each experiment returns an :class:`ExperimentReport`; ``report.write(dir)``
emits ``<experiment>_<n>_<seed>.report`` plus one CSV per table.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import neural as nn
from .seeding import derive_seed
from .transform import hadamard, nonlinearities, spectra

# Table-1 hidden widths; n=3 and n=6 follow the same halving rule from our own base width.
ENCODER_HIDDEN = {
    3: [32, 16, 8, 4, 2],
    4: [64, 32, 16, 8, 4, 2],
    5: [512, 256, 128, 64, 32, 16, 8, 4, 2],
    6: [2048, 1024, 512, 256, 128, 64, 32, 16, 8, 4, 2],
}
PUBLISHED_PARAMS = {4: 3881, 5: 192196}


@dataclass
class ExperimentReport:
    experiment: str
    n: int
    seed: int
    config: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    notes: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    expected_negative: bool = False

    @property
    def stem(self) -> str:
        return f"{self.experiment}_{self.n}_{self.seed}"

    def render(self) -> str:
        out = [f"experiment = {self.experiment}", f"n = {self.n}", f"seed = {self.seed}",
               f"expected_negative = {str(self.expected_negative).lower()}", "", "[config]"]
        out += [f"{k} = {_fmt(v)}" for k, v in sorted(self.config.items())]
        out += ["", "[metrics]"]
        out += [f"{k} = {_fmt(v)}" for k, v in sorted(self.metrics.items())]
        for name, (header, rows) in self.tables.items():
            out += ["", f"[table {name}]", ",".join(header)]
            out += [",".join(_fmt(v) for v in row) for row in rows]
        if self.notes:
            out += ["", "[notes]"] + list(self.notes)
        if self.artifacts:
            out += ["", "[artifacts]"] + list(self.artifacts)
        return "\n".join(out) + "\n"

    def write(self, out_dir) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, (header, rows) in self.tables.items():
            p = out_dir / f"{self.stem}_{name}.csv"
            p.write_text(",".join(header) + "\n"
                         + "".join(",".join(_fmt(v) for v in row) + "\n" for row in rows))
            paths.append(p)
        self.artifacts = sorted(set(self.artifacts) | {p.name for p in paths})
        p = out_dir / f"{self.stem}.report"
        p.write_text(self.render())
        return [p] + paths


def _fmt(v) -> str:
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (list, tuple)):
        return "[" + " ".join(_fmt(x) for x in v) + "]"
    return str(v)


# -- learning the Walsh spectrum with a linear layer ------------------------------------


@dataclass
class WalshConfig:
    """Full-batch SGD with heavy-ball momentum on a single dense layer.

    ``learning_rate``/``momentum`` left as None are set from the extreme
    nonzero eigenvalues of the loss Hessian (Polyak's optimal heavy-ball
    parameters), which is what makes the ill-conditioned k = N case tractable.
    """

    bias: bool = False
    learning_rate: float | None = None
    momentum: float | None = None
    max_epochs: int = 100_000
    target_loss: float = 1e-12
    weight_init: str = "uniform_scaled"
    test_size: int = 1000


def _heavy_ball(X: np.ndarray, bias: bool) -> tuple[float, float]:
    Z = np.hstack([X, np.ones((X.shape[0], 1))]) if bias else X
    k = Z.shape[0]
    gram = Z @ Z.T if k <= Z.shape[1] else Z.T @ Z
    ev = np.linalg.eigvalsh(gram) * (2.0 / k)
    ev = ev[ev > ev.max() * 1e-10]
    L, mu = float(ev.max()), float(ev.min())
    sk = math.sqrt(L / mu)
    lr = 4.0 / (math.sqrt(L) + math.sqrt(mu)) ** 2
    return lr, ((sk - 1.0) / (sk + 1.0)) ** 2


def fit_linear(X: np.ndarray, T: np.ndarray, cfg: WalshConfig, seed: int):
    """Train a fresh N->N dense layer on (X, T); returns (network, TrainReport)."""
    width = X.shape[1]
    net = nn.init_params(nn.linear_network(width, bias=cfg.bias), cfg.weight_init,
                         derive_seed(seed, "walsh-init"))
    lr, mom = _heavy_ball(X, cfg.bias)
    tc = nn.TrainConfig(optimizer="sgd",
                        learning_rate=cfg.learning_rate or lr,
                        momentum=mom if cfg.momentum is None else cfg.momentum,
                        batch_size=X.shape[0], epochs=cfg.max_epochs, seed=seed,
                        weight_init=cfg.weight_init, shuffle_each_epoch=False,
                        target_loss=cfg.target_loss)
    return net, nn.train(net, X, T, tc)


# Independent sets whose Gram matrix is worse conditioned than this are redrawn:
# gradient descent needs about sqrt(condition) epochs per digit of accuracy, and
# a few random draws per thousand are nearly singular.
WALSH_MAX_CONDITION = 1e5
WALSH_MAX_REDRAWS = 100


def gram_condition(X: np.ndarray) -> float:
    sv = np.linalg.svd(X, compute_uv=False)
    return float((sv[0] / sv[-1]) ** 2) if sv[-1] > 0 else float("inf")


def _walsh_pool(n: int, k: int, seed: int) -> tuple[np.ndarray, int, float]:
    """k training tables: a well-conditioned independent set of min(k, N), then distinct extras.

    Returns (tables, redraws, condition of the independent part).
    """
    size = 1 << n
    for redraw in range(WALSH_MAX_REDRAWS + 1):
        s = seed if redraw == 0 else derive_seed(seed, f"walsh-redraw-{redraw}")
        base = ds.independent_set(n, min(k, size), s).bits
        cond = gram_condition(1.0 - 2.0 * base)
        if cond <= WALSH_MAX_CONDITION:
            break
    else:
        raise RuntimeError(f"no independent set with condition <= {WALSH_MAX_CONDITION:g} "
                           f"in {WALSH_MAX_REDRAWS} redraws")
    if k <= size:
        return base, redraw, cond
    extra = ds.sample_tables(n, k - size, seed, tag="walsh-extra", exclude=base)
    return np.concatenate([base, extra]), redraw, cond


def learn_walsh(n: int, num_examples: int | None = None, config: WalshConfig | None = None,
                seed: int = 0, probe_speedup: bool = False) -> ExperimentReport:
    if not 2 <= n <= 10:
        raise ValueError("learn_walsh supports 2 <= n <= 10")
    cfg = config or WalshConfig()
    size = 1 << n
    k = num_examples or size
    bits, redraws, cond = _walsh_pool(n, k, seed)
    X = 1.0 - 2.0 * bits
    T = spectra(bits).astype(np.float64)
    net, rep = fit_linear(X, T, cfg, seed)
    W, b = net.params[0]
    H = hadamard(size)
    dev = float(np.abs(W - H).max())
    bmax = float(np.abs(b).max())
    recovered = bool(np.array_equal(np.rint(W), H) and not np.rint(b).any())
    report = ExperimentReport("learn_walsh", n, seed)
    report.config = {**asdict(cfg), "num_examples": k,
                     "learning_rate_used": rep.config["learning_rate"],
                     "momentum_used": rep.config["momentum"], "optimizer": "sgd"}
    report.metrics = {
        "max_weight_deviation": dev,
        "max_abs_bias": bmax,
        "hadamard_recovered": recovered,
        "within_tolerance_0.1": bool(dev < 0.1 and bmax < 0.1),
        "epochs": rep.epochs_run,
        "stop_reason": rep.stop_reason,
        "final_loss": rep.losses[-1] if rep.losses else float("nan"),
        "rank": ds.rank(X[:min(k, size)]),
        "set_redraws": redraws,
        "gram_condition": cond,
    }
    report.tables["loss"] = (["epoch", "loss"], _thin_curve(rep.losses))
    if probe_speedup:
        bits4, _, _ = _walsh_pool(n, min(4 * size, 1 << size), seed)
        X4 = 1.0 - 2.0 * bits4
        _, rep4 = fit_linear(X4, spectra(bits4).astype(np.float64), cfg, seed)
        report.metrics["epochs_at_4N"] = rep4.epochs_run
        report.metrics["speedup_N_vs_4N"] = rep.epochs_run / max(1, rep4.epochs_run)
    return report


def _thin_curve(losses: list[float], points: int = 200) -> list[tuple[int, float]]:
    if not losses:
        return []
    step = max(1, len(losses) // points)
    idx = list(range(0, len(losses), step))
    if idx[-1] != len(losses) - 1:
        idx.append(len(losses) - 1)
    return [(i + 1, losses[i]) for i in idx]


def sweep_grid(n: int) -> list[int]:
    size = 1 << n
    raw = [size / 8, size / 4, size / 2, 3 * size / 4, 7 * size / 8, size - 1, size, 2 * size]
    return sorted({max(1, int(v)) for v in raw})


def min_examples_sweep(n: int, counts: list[int] | None = None, config: WalshConfig | None = None,
                       seed: int = 0) -> ExperimentReport:
    """Spectrum exact-match accuracy on a disjoint test set versus number of training functions.

    Smaller training sets are prefixes of larger ones, so each curve is nested.
    """
    cfg = config or WalshConfig()
    size = 1 << n
    counts = sorted(counts or sweep_grid(n))
    if counts[0] < 1 or counts[-1] > 2 * size:
        raise ValueError("counts must lie in [1, 2N]")
    pool, redraws, cond = _walsh_pool(n, counts[-1], seed)
    space = 1 << size
    n_test = min(cfg.test_size, space - len(pool))
    test_bits = ds.sample_tables(n, n_test, seed, tag="sweep-test", exclude=pool)
    test = ds.Dataset(n, "walsh_spectrum", test_bits, spectra(test_bits), seed=seed, split="test")
    rows = []
    for k in counts:
        bits = pool[:k]
        X = 1.0 - 2.0 * bits
        net, rep = fit_linear(X, spectra(bits).astype(np.float64), cfg, seed)
        acc = nn.evaluate_accuracy(net, test)
        rows.append((k, acc, rep.epochs_run, rep.losses[-1]))
    report = ExperimentReport("min_examples", n, seed)
    report.config = {**asdict(cfg), "counts": counts, "test_size": n_test}
    report.metrics = {
        "accuracy_at_N": next(a for k, a, *_ in rows if k == size) if size in counts else float("nan"),
        "accuracy_definition": "full-spectrum exact match after rounding",
        "set_redraws": redraws,
        "gram_condition": cond,
    }
    if size // 2 in counts:
        report.metrics["accuracy_at_N_over_2"] = next(a for k, a, *_ in rows if k == size // 2)
    report.tables["curve"] = (["k", "test_accuracy", "epochs", "final_loss"], rows)
    return report


# -- analytic affine + min network ---------------------------------------------------


def affine_min_layers(n: int) -> list[nn.LayerSpec]:
    two_n = 2 << n
    return [nn.LayerSpec.dense(two_n), nn.LayerSpec.negate(),
            nn.LayerSpec.maxpool(two_n), nn.LayerSpec.negate()]


def affine_min_network(n: int) -> nn.Network:
    """Dense layer giving the distance to each affine function, then min = -maxpool(-x)."""
    if not 1 <= n <= 10:
        raise ValueError("affine_min_network supports 1 <= n <= 10")
    size = 1 << n
    H = hadamard(size).astype(np.float64)
    W = np.concatenate([-0.5 * H, 0.5 * H])
    b = np.full(2 * size, float(size // 2))
    return nn.Network(size, affine_min_layers(n), [(W, b)])


def _greedy_row_match(W: np.ndarray, b: np.ndarray, n: int) -> tuple[float, float]:
    """Heuristic distance from learned rows to the analytic row set (any order).

    Pairs are taken greedily by smallest L-infinity distance over [row, bias].
    Returns (mean, max) matched distance.
    """
    ref = affine_min_network(n).params[0]
    A = np.hstack([W, b[:, None]])
    R = np.hstack([ref[0], ref[1][:, None]])
    D = np.abs(A[:, None, :] - R[None, :, :]).max(axis=2)
    flat = np.argsort(D, axis=None, kind="stable")
    used_a, used_r, picked = set(), set(), []
    for f in flat:
        i, j = divmod(int(f), D.shape[1])
        if i in used_a or j in used_r:
            continue
        used_a.add(i)
        used_r.add(j)
        picked.append(D[i, j])
        if len(picked) == D.shape[0]:
            break
    return float(np.mean(picked)), float(np.max(picked))


def affine_min_training_attempt(n: int, train: ds.Dataset, test: ds.Dataset | None,
                                config: nn.TrainConfig, warm_start: bool = False) -> ExperimentReport:
    if train.task != "nonlinearity":
        raise ValueError("affine_min_training_attempt needs a nonlinearity dataset")
    if warm_start:
        net = affine_min_network(n)
    else:
        net = nn.init_params(nn.Network(1 << n, affine_min_layers(n)), config.weight_init,
                             derive_seed(config.seed, "affine-min-init"))
    rep = nn.train_on(net, train, config)
    mean_d, max_d = _greedy_row_match(*net.params[0], n)
    report = ExperimentReport("affine_min", n, config.seed, expected_negative=True)
    report.config = {**asdict(config), "warm_start": warm_start, "train_size": len(train),
                     "test_size": 0 if test is None else len(test)}
    report.metrics = {
        "train_accuracy": nn.evaluate_accuracy(net, train),
        "final_loss": rep.losses[-1] if rep.losses else float("nan"),
        "row_match_mean_linf": mean_d,
        "row_match_max_linf": max_d,
        "row_match_metric": "heuristic greedy matching over row permutations",
    }
    if test is not None and len(test):
        report.metrics["test_accuracy"] = nn.evaluate_accuracy(net, test)
    report.tables["loss"] = (["epoch", "loss"], [(i + 1, v) for i, v in enumerate(rep.losses)])
    report.network = net  # type: ignore[attr-defined]
    return report


# -- end-to-end encoder networks -------------------------------------------------------


@dataclass
class EndToEndConfig:
    train_size: int | None = None
    test_size: int | None = None
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int | None = None
    lr_schedule: str = "cosine"
    weight_init: str = "uniform_scaled"
    weight_decay: float = 0.0
    # Output bias starts at the mean training target (see README, "Training notes").
    output_bias_from_mean: bool = True
    max_restarts: int = 5
    dead_check_epochs: int = 3
    # Also restart when, after this many epochs, the probe loss is still above
    # stall_fraction * var(targets): the run sits on the constant-output plateau.
    stall_check_epoch: int = 10
    stall_fraction: float = 0.75
    eval_every_epoch: bool = False

    DEFAULTS = {
        3: dict(train_size=128, test_size=128, epochs=300),
        4: dict(train_size=30000, test_size=35536, epochs=150),
        # The deep n=5 and n=6 stacks lose their signal under uniform_scaled
        # init; they start from he_uniform and need decay against overfitting.
        5: dict(train_size=200000, test_size=50000, epochs=160, batch_size=128,
                weight_init="he_uniform", learning_rate=1e-4, weight_decay=0.05,
                stall_fraction=0.95),
        6: dict(train_size=200000, test_size=50000, epochs=5, batch_size=256,
                weight_init="he_uniform", learning_rate=1e-4, weight_decay=0.05,
                stall_fraction=0.95),
    }

    def resolved(self, n: int) -> EndToEndConfig:
        """Fill fields left at None or at their class default from the per-n table."""
        out = replace(self)
        for f in fields(self):
            if f.name not in self.DEFAULTS[n]:
                continue
            if getattr(self, f.name) is None or getattr(self, f.name) == f.default:
                setattr(out, f.name, self.DEFAULTS[n][f.name])
        return out


def encoder_for(n: int) -> nn.Network:
    if n not in ENCODER_HIDDEN:
        raise ValueError(f"no encoder architecture for n={n}")
    return nn.encoder_network(1 << n, ENCODER_HIDDEN[n])


def end_to_end_data(n: int, cfg: EndToEndConfig, seed: int) -> tuple[ds.Dataset, ds.Dataset]:
    total = cfg.train_size + cfg.test_size
    full = ds.generate(n, "nonlinearity", total, derive_seed(seed, "e2e-data"))
    full = replace(full, seed=seed)
    return ds.split(full, seed=seed, train_size=cfg.train_size)


def end_to_end(n: int, config: EndToEndConfig | None = None, seed: int = 0,
               data: tuple[ds.Dataset, ds.Dataset] | None = None, log=None) -> ExperimentReport:
    """Train the encoder network for ``n`` on nonlinearity targets.

    A run whose network goes dead (some ReLU layer silent on a probe batch
    after an epoch, hence a constant output) or stalls near the
    constant-predictor loss is restarted from a fresh initialization drawn
    with the next sub-seed, at most ``max_restarts`` times.
    """
    if n not in ENCODER_HIDDEN:
        raise ValueError("end_to_end supports n in {3, 4, 5, 6}")
    cfg = (config or EndToEndConfig()).resolved(n)
    train_set, test_set = data or end_to_end_data(n, cfg, seed)
    tc = nn.TrainConfig(optimizer=cfg.optimizer, learning_rate=cfg.learning_rate,
                        batch_size=cfg.batch_size, epochs=cfg.epochs, seed=derive_seed(seed, "e2e-train"),
                        weight_init=cfg.weight_init, lr_schedule=cfg.lr_schedule,
                        weight_decay=cfg.weight_decay)
    eval_fn = (lambda m: nn.evaluate_accuracy(m, test_set)) if cfg.eval_every_epoch else None
    probe = train_set.inputs()[:2048]
    probe_t = train_set.float_targets()[:2048]
    plateau = cfg.stall_fraction * float(probe_t.var()) if len(probe_t) else 0.0

    def dead(net, epoch):
        if epoch < cfg.dead_check_epochs and nn.dead_relu_layers(net, probe):
            return "dead"
        if epoch + 1 == cfg.stall_check_epoch and net.loss(probe, probe_t) > plateau:
            return "dead"
        return None

    restarts = []
    for attempt in range(cfg.max_restarts + 1):
        net = nn.init_params(encoder_for(n), cfg.weight_init, derive_seed(seed, f"e2e-init-{attempt}"))
        if cfg.output_bias_from_mean and len(train_set):
            net.params[-1][1][...] = float(train_set.targets.mean())
        rep = nn.train_on(net, train_set, tc, eval_fn=eval_fn, log=log,
                          abort_if=dead if attempt < cfg.max_restarts else None)
        if rep.stop_reason != "dead":
            break
        restarts.append(rep.epochs_run)
        if log is not None:
            log(f"dead or stalled network after epoch {rep.epochs_run}; re-initializing (attempt {attempt + 1})")
    report = ExperimentReport("end_to_end", n, seed, expected_negative=n in (3, 6))
    report.config = {**{k: v for k, v in asdict(cfg).items()}, "hidden": ENCODER_HIDDEN[n],
                     "train_seed": tc.seed}
    test_acc = nn.evaluate_accuracy(net, test_set)
    report.metrics = {
        "restarts": len(restarts),
        "parameter_count": net.parameter_count(),
        "published_parameter_count": PUBLISHED_PARAMS.get(n, "n/a"),
        "train_accuracy": nn.evaluate_accuracy(net, train_set),
        "test_accuracy": test_acc,
        "test_within_0.5": nn.accuracy_within(net, test_set, 0.5),
        "test_within_1.0": nn.accuracy_within(net, test_set, 1.0),
        "final_loss": rep.losses[-1] if rep.losses else float("nan"),
        "epochs": rep.epochs_run,
    }
    if n == 5:
        report.notes.append("test-set size 50000 is our choice; the source does not state it")
    curve = [(i + 1, v, rep.eval_metric[i] if rep.eval_metric else "")
             for i, v in enumerate(rep.losses)]
    report.tables["loss"] = (["epoch", "train_loss", "test_accuracy"], curve)
    classes = list(range((1 << (n - 1)) + 1))
    for name, d in (("confusion_train", train_set), ("confusion_test", test_set)):
        cm = nn.confusion_matrix(net, d)
        report.tables[name] = (["true\\pred"] + [str(c) for c in classes],
                               [(c, *cm[c].tolist()) for c in classes])
    report.network = net  # type: ignore[attr-defined]
    return report


# -- cost comparison -----------------------------------------------------------------


def _time_per_item(fn, items: int, min_seconds: float = 0.2) -> float:
    fn()
    reps, elapsed = 0, 0.0
    start = time.perf_counter()
    while elapsed < min_seconds:
        fn()
        reps += 1
        elapsed = time.perf_counter() - start
    return elapsed / (reps * items)


def cost_benchmark(n: int, model: nn.Network | None = None, seed: int = 0,
                   batch: int = 1024, min_seconds: float = 0.2) -> tuple[ExperimentReport, list]:
    """Time nonlinearity via fast transform, via the explicit matrix, and via a network.

    Returns the deterministic report (sizes and memory) and a separate list of
    timing rows, which are measurements and therefore not reproducible byte for byte.
    """
    size = 1 << n
    if model is not None and model.input_width != size:
        raise nn.ShapeError(f"model expects {model.input_width} inputs, n={n} needs {size}")
    k = min(batch, 1 << size) if n <= 4 else batch
    bits = ds.sample_tables(n, k, seed, tag="bench")
    H = hadamard(size)
    S = 1 - 2 * bits.astype(np.int64)

    def naive():
        spec = S @ H.T
        return size // 2 - np.abs(spec).max(axis=1) // 2

    assert np.array_equal(naive(), nonlinearities(bits))
    timings = [("fwt", "batched", _time_per_item(lambda: nonlinearities(bits), k, min_seconds)),
               ("naive", "batched", _time_per_item(naive, k, min_seconds))]
    one = bits[:1]
    s_one = S[0]
    timings.append(("fwt", "single", _time_per_item(lambda: nonlinearities(one), 1, min_seconds)))
    timings.append(("naive", "single",
                    _time_per_item(lambda: size // 2 - np.abs(H @ s_one).max() // 2, 1, min_seconds)))
    X = 1.0 - 2.0 * bits
    if model is not None:
        timings.append(("network", "batched", _time_per_item(lambda: model.predict(X), k, min_seconds)))
        timings.append(("network", "single",
                        _time_per_item(lambda: model.forward(X[0]), 1, min_seconds)))

    report = ExperimentReport("bench", n, seed)
    report.config = {"batch": k, "min_seconds": min_seconds}
    mem = [("fwt", size, 8 * size), ("naive", size * size + size, 8 * (size * size + size))]
    if model is not None:
        pc = model.parameter_count()
        mem.append(("network", pc, len(nn.model_bytes(model))))
        report.metrics["network_parameters"] = pc
        report.metrics["network_params_exceed_N"] = bool(pc > size)
    report.tables["memory"] = (["method", "numbers_of_state", "bytes"], mem)
    report.metrics["N"] = size
    report.notes.append("wall-time measurements are written to the _timing.csv companion file")
    return report, timings


def timing_summary(n: int, timings: list) -> dict:
    t = {(m, mode): v for m, mode, v in timings}
    out = {"fwt_faster_than_naive_single": t[("fwt", "single")] < t[("naive", "single")],
           "fwt_faster_than_naive_batched": t[("fwt", "batched")] < t[("naive", "batched")],
           "ordering_asserted": n >= 8}
    if ("network", "batched") in t:
        out["network_over_fwt_ratio"] = t[("network", "batched")] / t[("fwt", "batched")]
    return out


def write_timings(out_dir, n: int, seed: int, timings: list) -> Path:
    p = Path(out_dir) / f"bench_{n}_{seed}_timing.csv"
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text("method,mode,seconds_per_function\n"
                 + "".join(f"{m},{mode},{v!r}\n" for m, mode, v in timings))
    return p
