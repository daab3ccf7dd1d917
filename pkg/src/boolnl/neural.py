"""A small feed-forward network engine: dense, ReLU, 1-D max-pool and negate
layers, mean-squared-error loss, SGD (with optional momentum) and Adam.

Everything is float64.  Batches are rows: a dense layer maps ``X`` of shape
``(B, in)`` to ``X @ W.T + b`` with ``W`` of shape ``(out, in)``.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .seeding import generator

LAYER_KINDS = ("dense", "relu", "maxpool1d", "negate")
INIT_SCHEMES = ("uniform_scaled", "he_uniform", "zeros")


class ShapeError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch: int):
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    width: int = 0
    pool_window: int = 0
    bias: bool = True

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ShapeError(f"unknown layer kind {self.kind!r}")
        if self.kind == "dense" and self.width < 1:
            raise ShapeError("dense layer width must be >= 1")
        if self.kind == "maxpool1d" and self.pool_window < 1:
            raise ShapeError("maxpool1d needs a window >= 1")

    @classmethod
    def dense(cls, width: int, bias: bool = True) -> LayerSpec:
        return cls("dense", width=width, bias=bias)

    @classmethod
    def relu(cls) -> LayerSpec:
        return cls("relu")

    @classmethod
    def maxpool(cls, window: int) -> LayerSpec:
        return cls("maxpool1d", pool_window=window)

    @classmethod
    def negate(cls) -> LayerSpec:
        return cls("negate")


class Network:
    """Layer specs plus one ``(W, b)`` pair per dense layer."""

    def __init__(self, input_width: int, layers, params=None):
        self.input_width = int(input_width)
        self.layers = tuple(layers)
        self.shapes = self._infer_shapes()
        if params is None:
            params = [(np.zeros((o, i)), np.zeros(o)) for i, o in self.dense_shapes()]
        self.params = [(np.array(W, dtype=np.float64), np.array(b, dtype=np.float64))
                       for W, b in params]
        for (W, b), (i, o) in zip(self.params, self.dense_shapes()):
            if W.shape != (o, i) or b.shape != (o,):
                raise ShapeError(f"parameter shapes {W.shape}/{b.shape} do not match dense {i}->{o}")
        if len(self.params) != len(self.dense_shapes()):
            raise ShapeError("one (W, b) pair is required per dense layer")

    def _infer_shapes(self) -> list[int]:
        width = self.input_width
        if width < 1:
            raise ShapeError("input width must be >= 1")
        shapes = [width]
        for spec in self.layers:
            if spec.kind == "dense":
                width = spec.width
            elif spec.kind == "maxpool1d":
                if width % spec.pool_window:
                    raise ShapeError(f"pool window {spec.pool_window} does not divide width {width}")
                width //= spec.pool_window
            shapes.append(width)
        return shapes

    def dense_shapes(self) -> list[tuple[int, int]]:
        return [(self.shapes[i], spec.width) for i, spec in enumerate(self.layers)
                if spec.kind == "dense"]

    @property
    def output_width(self) -> int:
        return self.shapes[-1]

    def parameter_count(self) -> int:
        """Dense weights plus biases (bias-free layers contribute weights only)."""
        total = 0
        dense = [s for s in self.layers if s.kind == "dense"]
        for spec, (i, o) in zip(dense, self.dense_shapes()):
            total += i * o + (o if spec.bias else 0)
        return total

    def copy(self) -> Network:
        return Network(self.input_width, self.layers, [(W.copy(), b.copy()) for W, b in self.params])

    # -- evaluation -----------------------------------------------------------

    def _check_input(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.input_width:
            raise ShapeError(f"input width {X.shape[-1]} != network input width {self.input_width}")
        return X

    def forward(self, x) -> np.ndarray:
        """Output for one vector or a batch of row vectors."""
        X = self._check_input(x)
        single = X.ndim == 1
        out = self._forward(X[None, :] if single else X, trace=None)
        return out[0] if single else out

    def predict(self, X, chunk: int = 8192) -> np.ndarray:
        X = self._check_input(X)
        if X.shape[0] == 0:
            return np.zeros((0, self.output_width))
        return np.concatenate([self._forward(X[i:i + chunk], None)
                               for i in range(0, X.shape[0], chunk)])

    def _forward(self, X: np.ndarray, trace: list | None) -> np.ndarray:
        p = 0
        for spec in self.layers:
            if trace is not None:
                trace.append(X)
            if spec.kind == "dense":
                W, b = self.params[p]
                p += 1
                X = X @ W.T
                if spec.bias:
                    X = X + b
            elif spec.kind == "relu":
                X = np.maximum(X, 0.0)
            elif spec.kind == "negate":
                X = -X
            else:
                B, L = X.shape
                X = X.reshape(B, L // spec.pool_window, spec.pool_window).max(axis=2)
        return X

    def hidden(self, X, upto: int) -> np.ndarray:
        """Activations after the first ``upto`` layers."""
        X = self._check_input(X)
        sub = Network(self.input_width, self.layers[:upto],
                      self.params[:sum(s.kind == "dense" for s in self.layers[:upto])])
        return sub._forward(np.atleast_2d(X), None)

    # -- gradients ------------------------------------------------------------

    def loss_and_gradients(self, X, T) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
        """MSE loss ``mean_batch sum_out (y - t)^2`` and its parameter gradients.

        Max-pool sends the gradient to the first maximal entry of each window;
        ReLU has zero gradient at 0.
        """
        X = np.atleast_2d(self._check_input(X))
        T = np.atleast_2d(np.asarray(T, dtype=np.float64))
        trace: list[np.ndarray] = []
        Y = self._forward(X, trace)
        if T.shape != Y.shape:
            raise ShapeError(f"target shape {T.shape} != output shape {Y.shape}")
        B = X.shape[0]
        diff = Y - T
        loss = float(np.einsum("ij,ij->", diff, diff) / B)
        G = (2.0 / B) * diff
        grads: list[tuple[np.ndarray, np.ndarray]] = []
        p = len(self.params)
        for spec, A in zip(reversed(self.layers), reversed(trace)):
            if spec.kind == "dense":
                p -= 1
                W, _ = self.params[p]
                gW = G.T @ A
                gb = G.sum(axis=0) if spec.bias else np.zeros(W.shape[0])
                grads.append((gW, gb))
                G = G @ W
            elif spec.kind == "relu":
                G = G * (A > 0.0)
            elif spec.kind == "negate":
                G = -G
            else:
                w = spec.pool_window
                Bn, L = A.shape
                windows = A.reshape(Bn, L // w, w)
                arg = windows.argmax(axis=2)
                G_in = np.zeros_like(windows)
                np.put_along_axis(G_in, arg[:, :, None], G[:, :, None], axis=2)
                G = G_in.reshape(Bn, L)
        grads.reverse()
        return loss, grads

    def backward(self, X, T):
        return self.loss_and_gradients(X, T)[1]

    def loss(self, X, T) -> float:
        Y = self.predict(X)
        d = Y - np.atleast_2d(np.asarray(T, dtype=np.float64))
        return float(np.einsum("ij,ij->", d, d) / max(1, Y.shape[0]))


def encoder_network(input_width: int, hidden: list[int]) -> Network:
    """Dense layers of the given widths with ReLU between them, then one output neuron."""
    layers = []
    for w in hidden:
        layers += [LayerSpec.dense(w), LayerSpec.relu()]
    layers.append(LayerSpec.dense(1))
    return Network(input_width, layers)


def linear_network(width: int, bias: bool = True) -> Network:
    return Network(width, [LayerSpec.dense(width, bias=bias)])


def init_params(net: Network, scheme: str, seed: int) -> Network:
    """Re-initialize weights in place.

    'uniform_scaled' draws weights and biases from U(+-sqrt(1/fan_in));
    'he_uniform' draws weights from U(+-sqrt(6/fan_in)) with zero biases, which
    keeps the activation scale through deep ReLU stacks; 'zeros' clears everything.
    """
    if scheme == "zeros":
        for W, b in net.params:
            W[...] = 0.0
            b[...] = 0.0
        return net
    if scheme not in INIT_SCHEMES:
        raise ValueError(f"unknown weight init {scheme!r}")
    rng = generator(seed, "init")
    dense = [s for s in net.layers if s.kind == "dense"]
    for spec, (W, b) in zip(dense, net.params):
        if scheme == "he_uniform":
            lim = math.sqrt(6.0 / W.shape[1])
            W[...] = rng.uniform(-lim, lim, size=W.shape)
            b[...] = 0.0
            continue
        lim = math.sqrt(1.0 / W.shape[1])
        W[...] = rng.uniform(-lim, lim, size=W.shape)
        b[...] = rng.uniform(-lim, lim, size=b.shape) if spec.bias else 0.0
    return net


# -- optimizers -----------------------------------------------------------------


def _decay(params: list[np.ndarray], rate: float) -> None:
    """Decoupled weight decay on weight matrices; bias vectors are left alone."""
    if rate:
        for p in params:
            if p.ndim > 1:
                p *= 1.0 - rate


class SGD:
    def __init__(self, lr: float, momentum: float = 0.0, nesterov: bool = False,
                 weight_decay: float = 0.0):
        self.lr, self.momentum, self.nesterov = lr, momentum, nesterov
        self.weight_decay = weight_decay
        self.velocity: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        _decay(params, self.lr * self.weight_decay)
        if self.momentum == 0.0:
            for p, g in zip(params, grads):
                p -= self.lr * g
            return
        if self.velocity is None:
            self.velocity = [np.zeros_like(p) for p in params]
        for p, g, v in zip(params, grads, self.velocity):
            v *= self.momentum
            v -= self.lr * g
            if self.nesterov:
                p += self.momentum * v - self.lr * g
            else:
                p += v


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        _decay(params, self.lr * self.weight_decay)
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# -- training -------------------------------------------------------------------


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    weight_init: str = "uniform_scaled"
    shuffle_each_epoch: bool = True
    loss: str = "mse"
    momentum: float = 0.0
    nesterov: bool = False
    # 'constant' or 'cosine' (decays to lr * final_lr_fraction at the last epoch)
    lr_schedule: str = "constant"
    final_lr_fraction: float = 0.01
    # Stop as soon as an epoch's training loss is at or below this value.
    target_loss: float | None = None
    # Decoupled: weight matrices shrink by lr * weight_decay per step.
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.loss != "mse":
            raise ValueError("only the mse loss is supported")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.weight_init not in INIT_SCHEMES:
            raise ValueError(f"unknown weight init {self.weight_init!r}")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr schedule {self.lr_schedule!r}")

    def make_optimizer(self):
        if self.optimizer == "sgd":
            return SGD(self.learning_rate, self.momentum, self.nesterov, self.weight_decay)
        return Adam(self.learning_rate, weight_decay=self.weight_decay)

    def lr_at(self, epoch: int) -> float:
        if self.lr_schedule == "constant" or self.epochs <= 1:
            return self.learning_rate
        lo = self.learning_rate * self.final_lr_fraction
        frac = epoch / (self.epochs - 1)
        return lo + 0.5 * (self.learning_rate - lo) * (1.0 + math.cos(math.pi * frac))


@dataclass
class TrainReport:
    config: dict
    losses: list[float] = field(default_factory=list)
    eval_metric: list[float] = field(default_factory=list)
    epochs_run: int = 0
    stop_reason: str = "epochs"


def _trainable(net: Network) -> tuple[list[np.ndarray], list[bool]]:
    params, mask = [], []
    dense = [s for s in net.layers if s.kind == "dense"]
    for spec, (W, b) in zip(dense, net.params):
        params += [W, b]
        mask += [True, spec.bias]
    return params, mask


def train(net: Network, X, T, config: TrainConfig, eval_fn=None, log=None,
          abort_if=None) -> TrainReport:
    """Minibatch training of ``net`` in place; deterministic for a given config.seed.

    ``eval_fn(net) -> float`` is called after each epoch when given.
    ``abort_if(net, epoch) -> str | None`` may end training early; a returned
    string becomes the report's ``stop_reason``.
    """
    X = np.atleast_2d(net._check_input(X))
    T = np.atleast_2d(np.asarray(T, dtype=np.float64))
    if T.shape != (X.shape[0], net.output_width):
        raise ShapeError(f"targets {T.shape} do not match ({X.shape[0]}, {net.output_width})")
    report = TrainReport(config=asdict(config))
    if config.epochs == 0 or X.shape[0] == 0:
        report.stop_reason = "no-op"
        return report
    rng = generator(config.seed, "shuffle")
    opt = config.make_optimizer()
    params, mask = _trainable(net)
    k = X.shape[0]
    bs = min(config.batch_size, k)
    for epoch in range(config.epochs):
        opt.lr = config.lr_at(epoch)
        order = rng.permutation(k) if config.shuffle_each_epoch else np.arange(k)
        total = 0.0
        for start in range(0, k, bs):
            rows = order[start:start + bs]
            loss, grads = net.loss_and_gradients(X[rows], T[rows])
            total += loss * len(rows)
            flat = []
            for gW, gb in grads:
                flat += [gW, gb]
            opt.step([p for p, m in zip(params, mask) if m], [g for g, m in zip(flat, mask) if m])
        epoch_loss = total / k
        if not math.isfinite(epoch_loss):
            raise TrainingDiverged(epoch)
        report.losses.append(epoch_loss)
        report.epochs_run = epoch + 1
        if eval_fn is not None:
            report.eval_metric.append(float(eval_fn(net)))
        if log is not None:
            extra = f" eval={report.eval_metric[-1]:.4f}" if eval_fn is not None else ""
            log(f"epoch {epoch + 1}/{config.epochs} loss={epoch_loss:.6g}{extra}")
        if config.target_loss is not None and epoch_loss <= config.target_loss:
            report.stop_reason = "target_loss"
            break
        if abort_if is not None:
            reason = abort_if(net, epoch)
            if reason:
                report.stop_reason = reason
                break
    return report


def train_on(net: Network, dataset, config: TrainConfig, eval_fn=None, log=None,
             abort_if=None) -> TrainReport:
    _check_fit(net, dataset)
    return train(net, dataset.inputs(), dataset.float_targets(), config, eval_fn, log, abort_if)


def dead_relu_layers(net: Network, X) -> list[int]:
    """Indexes of ReLU layers with no unit active on any row of ``X``.

    Such a layer makes the network output constant and blocks all gradient
    below it.
    """
    X = np.atleast_2d(net._check_input(X))
    dead = []
    for i, spec in enumerate(net.layers):
        if spec.kind == "relu" and not (net.hidden(X, i + 1) > 0).any():
            dead.append(i)
    return dead


# -- metrics ----------------------------------------------------------------------


def _check_fit(net: Network, dataset) -> None:
    if net.input_width != 1 << dataset.n:
        raise ShapeError(f"network expects {net.input_width} inputs; dataset n={dataset.n} "
                         f"has {1 << dataset.n}")
    if net.output_width != dataset.target_width:
        raise ShapeError(f"network has {net.output_width} outputs; task {dataset.task} "
                         f"needs {dataset.target_width}")


def rounded_predictions(net: Network, dataset) -> np.ndarray:
    """Round half to even; nonlinearity predictions are clamped to [0, 2^(n-1)]."""
    _check_fit(net, dataset)
    Y = net.predict(dataset.inputs()) / dataset.target_scale
    R = np.rint(Y)
    if dataset.task == "nonlinearity":
        R = np.clip(R, 0, 1 << (dataset.n - 1))
    else:
        R = np.clip(R, -(1 << dataset.n), 1 << dataset.n)
    return R.astype(np.int64)


def evaluate_accuracy(net: Network, dataset) -> float:
    if len(dataset) == 0:
        return 0.0
    R = rounded_predictions(net, dataset)
    return float((R == dataset.targets).all(axis=1).mean())


def accuracy_within(net: Network, dataset, tol: float) -> float:
    """Fraction of examples whose raw outputs all lie within ``tol`` of the targets."""
    _check_fit(net, dataset)
    if len(dataset) == 0:
        return 0.0
    Y = net.predict(dataset.inputs()) / dataset.target_scale
    return float((np.abs(Y - dataset.targets) <= tol).all(axis=1).mean())


def confusion_matrix(net: Network, dataset) -> np.ndarray:
    """Counts indexed by (true nonlinearity, rounded clamped prediction)."""
    if dataset.task != "nonlinearity":
        raise ShapeError("confusion matrix needs a nonlinearity dataset")
    classes = (1 << (dataset.n - 1)) + 1
    pred = rounded_predictions(net, dataset)[:, 0] if len(dataset) else np.zeros(0, np.int64)
    cm = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(cm, (dataset.targets[:, 0], pred), 1)
    return cm


# -- persistence ------------------------------------------------------------------

MODEL_MAGIC = b"BNLM"
MODEL_VERSION = 1


def model_bytes(net: Network) -> bytes:
    """``BNLM``, u32 version, u32 header length, JSON header, float64 LE params, CRC-32."""
    header = json.dumps({"input_width": net.input_width,
                         "layers": [asdict(s) for s in net.layers]},
                        sort_keys=True, separators=(",", ":")).encode()
    body = [MODEL_MAGIC, struct.pack("<II", MODEL_VERSION, len(header)), header]
    for W, b in net.params:
        body.append(W.astype("<f8").tobytes())
        body.append(b.astype("<f8").tobytes())
    blob = b"".join(body)
    return blob + struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF)


def model_from_bytes(blob: bytes) -> Network:
    if len(blob) < 16 or blob[:4] != MODEL_MAGIC:
        raise ModelFormatError("not a model file (bad magic or too short)")
    (crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != crc:
        raise ModelFormatError("CRC mismatch: file truncated or corrupted")
    version, hlen = struct.unpack("<II", blob[4:12])
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    try:
        header = json.loads(blob[12:12 + hlen])
        layers = [LayerSpec(**s) for s in header["layers"]]
        shell = Network(header["input_width"], layers)
    except (ValueError, KeyError, TypeError) as e:
        raise ModelFormatError(f"bad model header: {e}") from None
    pos = 12 + hlen
    params = []
    for i, o in shell.dense_shapes():
        nW, nb = 8 * i * o, 8 * o
        if pos + nW + nb > len(blob) - 4:
            raise ModelFormatError("parameter section truncated")
        W = np.frombuffer(blob, dtype="<f8", count=i * o, offset=pos).reshape(o, i)
        b = np.frombuffer(blob, dtype="<f8", count=o, offset=pos + nW)
        params.append((W.copy(), b.copy()))
        pos += nW + nb
    if pos != len(blob) - 4:
        raise ModelFormatError("trailing bytes after parameters")
    return Network(shell.input_width, layers, params)


def save_model(net: Network, path) -> None:
    Path(path).write_bytes(model_bytes(net))


def load_model(path) -> Network:
    return model_from_bytes(Path(path).read_bytes())
