"""Late-fusion MLP classifier over concatenated per-modality embeddings.

The fused feature is [text block | image block | text flag, image flag];
an absent modality contributes a zero block and a zero flag, so a genuine
all-zero embedding stays distinguishable from a missing one. The model is
a plain MLP with rectifier hidden layers and a softmax head, trained with
mini-batch Adam on cross-entropy plus an L2 penalty. All numerics are
float64 and deterministic given the seed.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingStore, EmbeddingVector
from .errors import (
    BadClassIndexError,
    BothAbsentError,
    DimMismatchError,
    FormatError,
    NonFiniteLossError,
    VersionMismatchError,
)
from .kernels import BACKEND

_MAGIC = b"SADSMLP\n"
_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class FusedFeature:
    values: np.ndarray
    dim_text: int
    dim_image: int

    @property
    def text_present(self) -> bool:
        return bool(self.values[-2] != 0.0)

    @property
    def image_present(self) -> bool:
        return bool(self.values[-1] != 0.0)


def fused_dim(dim_text: int, dim_image: int) -> int:
    return dim_text + dim_image + 2


def fuse(
    text: EmbeddingVector | None,
    image: EmbeddingVector | None,
    dims: tuple[int, int],
) -> FusedFeature:
    """Concatenate modality blocks plus presence flags; zero-fill absences."""
    dim_text, dim_image = dims
    if text is None and image is None:
        raise BothAbsentError("ad has neither a text nor an image embedding")
    values = np.zeros(fused_dim(dim_text, dim_image), dtype=np.float64)
    if text is not None:
        if text.dim != dim_text:
            raise DimMismatchError(f"text vector has dim {text.dim}, expected {dim_text}")
        values[:dim_text] = text.values
        values[-2] = 1.0
    if image is not None:
        if image.dim != dim_image:
            raise DimMismatchError(f"image vector has dim {image.dim}, expected {dim_image}")
        values[dim_text : dim_text + dim_image] = image.values
        values[-1] = 1.0
    return FusedFeature(values, dim_text, dim_image)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 20
    seed: int = 0
    l2: float = 1e-5
    hidden_sizes: tuple[int, ...] = (256, 64)

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0 or self.l2 < 0:
            raise ValueError("invalid training configuration")


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    final_train_accuracy: float = 0.0

    def to_json(self) -> dict:
        return {
            "epoch_losses": self.epoch_losses,
            "final_train_accuracy": self.final_train_accuracy,
        }


class MlpModel:
    """MLP parameters in one flat float64 vector with per-layer views."""

    def __init__(
        self,
        layer_sizes,
        params: np.ndarray,
        seed: int,
        embed_model_id: str = "",
        classes: tuple[str, ...] = (),
    ):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        if len(self.layer_sizes) < 2 or self.layer_sizes[-1] < 2:
            raise ValueError("need at least an input size and >= 2 classes")
        if params.shape != (param_count(self.layer_sizes),):
            raise ValueError("parameter vector does not match layer sizes")
        if classes and len(classes) != self.layer_sizes[-1]:
            raise ValueError("class list does not match the output layer")
        self.params = params
        self.seed = seed
        self.embed_model_id = embed_model_id
        self.classes = tuple(classes)
        self._offsets = _layer_offsets(self.layer_sizes)

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    def layer(self, i: int, source: np.ndarray | None = None):
        """(weights, biases) views of layer i inside the flat vector."""
        flat = self.params if source is None else source
        w_off, b_off, fan_in, fan_out = self._offsets[i]
        weights = flat[w_off : w_off + fan_in * fan_out].reshape(fan_in, fan_out)
        biases = flat[b_off : b_off + fan_out]
        return weights, biases

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1


def param_count(layer_sizes) -> int:
    return sum(
        layer_sizes[i] * layer_sizes[i + 1] + layer_sizes[i + 1]
        for i in range(len(layer_sizes) - 1)
    )


def _layer_offsets(layer_sizes):
    offsets = []
    cursor = 0
    for i in range(len(layer_sizes) - 1):
        fan_in, fan_out = layer_sizes[i], layer_sizes[i + 1]
        w_off = cursor
        b_off = cursor + fan_in * fan_out
        cursor = b_off + fan_out
        offsets.append((w_off, b_off, fan_in, fan_out))
    return offsets


def init_model(layer_sizes, seed: int, embed_model_id: str = "", classes=()) -> MlpModel:
    """Uniform fan-scaled weight init (biases zero), seeded."""
    rng = np.random.default_rng(seed)
    params = np.zeros(param_count(layer_sizes), dtype=np.float64)
    model = MlpModel(layer_sizes, params, seed, embed_model_id, classes)
    for i in range(model.n_layers):
        weights, _ = model.layer(i)
        fan_in, fan_out = weights.shape
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights[:] = rng.uniform(-bound, bound, size=weights.shape)
    return model


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs


def forward(model: MlpModel, features) -> np.ndarray:
    """Class probabilities; accepts one feature vector or a (n, d) batch."""
    arr = np.asarray(features, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.shape[1] != model.input_dim:
        raise DimMismatchError(f"feature dim {arr.shape[1]} != model input {model.input_dim}")
    for i in range(model.n_layers):
        weights, biases = model.layer(i)
        arr = arr @ weights + biases
        if i < model.n_layers - 1:
            arr = BACKEND.relu(arr)
    probs = _softmax(arr)
    return probs[0] if single else probs


def predict(model: MlpModel, features) -> list[tuple[int, float]]:
    """Argmax class and its probability per feature; ties go to the lowest index."""
    probs = np.atleast_2d(forward(model, features))
    picks = probs.argmax(axis=1)
    return [(int(c), float(probs[i, c])) for i, c in enumerate(picks)]


def _loss_and_grad(model: MlpModel, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean cross-entropy + 0.5*l2*||W||^2 and its flat gradient."""
    batch = X.shape[0]
    activations = [X]
    pre_acts = []
    out = X
    for i in range(model.n_layers):
        weights, biases = model.layer(i)
        z = out @ weights + biases
        if i < model.n_layers - 1:
            pre_acts.append(z)
            out = BACKEND.relu(z)
            activations.append(out)
        else:
            logits = z
    probs, loss_sum = BACKEND.softmax_xent(logits, y)
    loss = loss_sum / batch
    grads = np.zeros_like(model.params)
    delta = probs
    delta[np.arange(batch), y] -= 1.0
    delta /= batch
    for i in range(model.n_layers - 1, -1, -1):
        weights, _ = model.layer(i)
        grad_w, grad_b = model.layer(i, grads)
        grad_w[:] = activations[i].T @ delta
        grad_b[:] = delta.sum(axis=0)
        if l2:
            grad_w += l2 * weights
            loss += 0.5 * l2 * float(np.sum(weights * weights))
        if i > 0:
            delta = BACKEND.relu_backward(delta @ weights.T, pre_acts[i - 1])
    return loss, grads


def train(
    features,
    labels,
    n_classes: int,
    config: TrainConfig = TrainConfig(),
    embed_model_id: str = "",
    classes: tuple[str, ...] = (),
) -> tuple[MlpModel, TrainReport]:
    """Mini-batch Adam training; deterministic given the config seed.

    Raises BadClassIndexError on out-of-range labels and NonFiniteLossError
    the moment a batch loss leaves the finite range.
    """
    X = _feature_matrix(features)
    y = np.asarray(labels, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("training data is empty")
    if y.min(initial=0) < 0 or y.max(initial=0) >= n_classes:
        raise BadClassIndexError(f"labels must lie in [0, {n_classes})")
    layer_sizes = (X.shape[1], *config.hidden_sizes, n_classes)
    model = init_model(layer_sizes, config.seed, embed_model_id, classes)
    report = TrainReport()
    m = np.zeros_like(model.params)
    v = np.zeros_like(model.params)
    shuffle_rng = np.random.default_rng([config.seed, 0x5EED])
    step = 0
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(X.shape[0])
        batch_losses = []
        for start in range(0, X.shape[0], config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = _loss_and_grad(model, X[idx], y[idx], config.l2)
            if not np.isfinite(loss):
                raise NonFiniteLossError(
                    f"non-finite loss {loss} at epoch {epoch}, step {step}; "
                    "lower the learning rate or check the inputs"
                )
            step += 1
            BACKEND.adam_update(
                model.params, grads, m, v, step,
                config.learning_rate, ADAM_BETA1, ADAM_BETA2, ADAM_EPS,
            )
            batch_losses.append(loss)
        report.epoch_losses.append(float(np.mean(batch_losses)))
    picks = np.array([c for c, _ in predict(model, X)])
    report.final_train_accuracy = float(np.mean(picks == y)) if len(y) else 0.0
    return model, report


def gradient_check(model: MlpModel, features, labels, l2: float = 0.0, h: float = 1e-5) -> float:
    """Max discrepancy between analytic and central-difference gradients.

    Per-parameter error is |analytic - numeric| / max(1, |analytic|,
    |numeric|), i.e. relative for large gradients with an absolute floor
    for vanishing ones. Intended for small nets only.
    """
    X = _feature_matrix(features)
    y = np.asarray(labels, dtype=np.int64)
    _, analytic = _loss_and_grad(model, X, y, l2)
    worst = 0.0
    params = model.params
    for i in range(params.size):
        original = params[i]
        params[i] = original + h
        up, _ = _loss_and_grad(model, X, y, l2)
        params[i] = original - h
        down, _ = _loss_and_grad(model, X, y, l2)
        params[i] = original
        numeric = (up - down) / (2.0 * h)
        err = abs(analytic[i] - numeric) / max(1.0, abs(analytic[i]), abs(numeric))
        if err > worst:
            worst = err
    return worst


def _feature_matrix(features) -> np.ndarray:
    if isinstance(features, np.ndarray):
        return np.ascontiguousarray(features, dtype=np.float64)
    rows = [f.values if isinstance(f, FusedFeature) else np.asarray(f, float) for f in features]
    return np.ascontiguousarray(np.vstack(rows), dtype=np.float64)


def assemble_features(
    pairs,
    store: EmbeddingStore,
    classes: list[str],
    zero_modality: str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Fused feature matrix and class-index labels for (ad_id, event_id) pairs.

    ``zero_modality`` blanks one modality block and its flag at assembly
    time, which is how modality ablations are expressed.
    """
    dim_text = store.dim("text") or 0
    dim_image = store.dim("image") or 0
    class_index = {c: i for i, c in enumerate(classes)}
    X = np.zeros((len(pairs), fused_dim(dim_text, dim_image)), dtype=np.float64)
    y = np.zeros(len(pairs), dtype=np.int64)
    for row, (ad_id, event_id) in enumerate(pairs):
        text = store.get(ad_id, "text") if zero_modality != "text" else None
        image = store.get(ad_id, "image") if zero_modality != "image" else None
        fused = fuse(text, image, (dim_text, dim_image))
        X[row] = fused.values
        try:
            y[row] = class_index[event_id]
        except KeyError:
            raise BadClassIndexError(f"event {event_id!r} not in class list") from None
    return X, y


def save_model(model: MlpModel, path) -> None:
    """Versioned header plus raw little-endian float64 parameter payload."""
    header = json.dumps(
        {
            "layer_sizes": list(model.layer_sizes),
            "seed": model.seed,
            "embed_model_id": model.embed_model_id,
            "classes": list(model.classes),
            "dtype": "<f8",
            "param_count": int(model.params.size),
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(model.params, dtype="<f8").tobytes())


def load_model(path) -> MlpModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(_MAGIC)] != _MAGIC:
        raise FormatError("not a model file (bad magic)", path=str(path))
    try:
        version, header_len = struct.unpack_from("<II", blob, len(_MAGIC))
    except struct.error:
        raise FormatError("truncated model header", path=str(path)) from None
    if version > _VERSION:
        raise VersionMismatchError(
            f"model format version {version} is newer than supported {_VERSION}", path=str(path)
        )
    start = len(_MAGIC) + 8
    try:
        header = json.loads(blob[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise FormatError("corrupt model header", path=str(path)) from None
    payload = blob[start + header_len :]
    count = int(header["param_count"])
    if len(payload) != count * 8:
        raise FormatError(
            f"payload holds {len(payload)} bytes, header promises {count * 8}", path=str(path)
        )
    params = np.frombuffer(payload, dtype="<f8").astype(np.float64, copy=True)
    return MlpModel(
        header["layer_sizes"],
        params,
        int(header["seed"]),
        header.get("embed_model_id", ""),
        tuple(header.get("classes", ())),
    )
