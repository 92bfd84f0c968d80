"""Desk-scale flow matching with strength-scaled low-rank adapters.

The latent codec is an 8x block mean (mirroring the spatial compression of
a full autoencoder while staying exactly invertible on block-constant
inputs).  The velocity network is a per-latent-position two-layer MLP whose
dense layers carry low-rank adapters scaled at runtime by the enhancement
strength s: effective weight = base + s * A @ B.  Training runs in two
phases: the base is pretrained on the identity flow (s = 0 reproduces the
input), then frozen while only the adapter factors learn the strength-
conditioned enhancement.  Everything is float64 numpy with hand-derived
gradients, fully deterministic under a fixed seed.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imgcore import ColorSpace, ImageBuffer, srgb_to_linear
from .retinex import StrengthGroup
from .weights import WeightMap, to_latent

LATENT_DOWNSCALE = 8
LATENT_CHANNELS = 3

# Condition neighborhood side length: 1 keeps the net per-position (center
# cell only), which converges markedly faster at toy scale than feeding a
# wider window.
COND_NEIGHBORHOOD = 1

# features per latent position: z_t + condition neighborhood + t + s
FEATURE_DIM = LATENT_CHANNELS + COND_NEIGHBORHOOD**2 * LATENT_CHANNELS + 2

MODEL_MAGIC = b"CLFM"
MODEL_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""


class LatentOrigin(enum.Enum):
    ENCODED = "encoded"
    NOISE = "noise"
    INTERPOLATED = "interpolated"


@dataclass(frozen=True)
class Latent:
    """h_lat x w_lat x C grid of latent values."""

    grid: np.ndarray
    origin: LatentOrigin

    def __post_init__(self):
        arr = np.ascontiguousarray(self.grid, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != LATENT_CHANNELS:
            raise ValueError(f"latent grid must be HxWx{LATENT_CHANNELS}")
        if not np.isfinite(arr).all():
            raise ValueError("latent contains non-finite values")
        object.__setattr__(self, "grid", arr)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.grid.shape


@dataclass(frozen=True)
class VelocityField:
    grid: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.grid, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise ValueError("velocity field contains non-finite values")
        object.__setattr__(self, "grid", arr)


@dataclass(frozen=True)
class LowRankAdapter:
    """Frozen base matrix plus trainable factors: effective(s) = base + s*A@B."""

    base: np.ndarray  # (n, m)
    a: np.ndarray  # (n, r)
    b: np.ndarray  # (r, m)

    def __post_init__(self):
        for name in ("base", "a", "b"):
            object.__setattr__(
                self, name, np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            )
        n, m = self.base.shape
        if self.a.shape[0] != n or self.b.shape[1] != m or self.a.shape[1] != self.b.shape[0]:
            raise ValueError("adapter factor shapes do not match base")

    @property
    def rank(self) -> int:
        return self.a.shape[1]


def adapter_effective(adapter: LowRankAdapter, s: float) -> np.ndarray:
    """base + s * A @ B; at s=0 the adapter term is skipped so the result is
    the frozen base bit-exactly."""
    if s == 0.0:
        return adapter.base
    return adapter.base + s * (adapter.a @ adapter.b)


@dataclass(frozen=True)
class VelocityNet:
    """Two dense layers (tanh between) applied independently at every latent
    position; both layers carry a low-rank adapter."""

    layer1: LowRankAdapter
    bias1: np.ndarray
    layer2: LowRankAdapter
    bias2: np.ndarray
    latent_h: int = 8
    latent_w: int = 8

    def __post_init__(self):
        object.__setattr__(self, "bias1", np.ascontiguousarray(self.bias1, np.float64))
        object.__setattr__(self, "bias2", np.ascontiguousarray(self.bias2, np.float64))

    @property
    def hidden_width(self) -> int:
        return self.layer1.base.shape[0]

    @property
    def rank(self) -> int:
        return self.layer1.rank


def init_velocity_net(
    seed: int, hidden: int = 64, rank: int = 4, latent_h: int = 8, latent_w: int = 8
) -> VelocityNet:
    """Gaussian fan-in init for the base; A random at 1/sqrt(rank) scale and
    B zero, so adapters start as an exact no-op at every strength but still
    receive usable gradients."""
    rng = np.random.default_rng(seed)
    w1 = rng.standard_normal((hidden, FEATURE_DIM)) / np.sqrt(FEATURE_DIM)
    w2 = rng.standard_normal((LATENT_CHANNELS, hidden)) / np.sqrt(hidden)
    a1 = rng.standard_normal((hidden, rank)) / np.sqrt(rank)
    a2 = rng.standard_normal((LATENT_CHANNELS, rank)) / np.sqrt(rank)
    return VelocityNet(
        layer1=LowRankAdapter(w1, a1, np.zeros((rank, FEATURE_DIM))),
        bias1=np.zeros(hidden),
        layer2=LowRankAdapter(w2, a2, np.zeros((rank, hidden))),
        bias2=np.zeros(LATENT_CHANNELS),
        latent_h=latent_h,
        latent_w=latent_w,
    )


# ---------------------------------------------------------------------------
# Toy latent codec
# ---------------------------------------------------------------------------


def encode(img: ImageBuffer) -> Latent:
    """Per-channel 8x8 block mean in linear RGB."""
    if img.space is ColorSpace.SRGB:
        img = srgb_to_linear(img)
    h, w = img.height, img.width
    if h % LATENT_DOWNSCALE or w % LATENT_DOWNSCALE:
        raise ValueError(f"image size {h}x{w} not divisible by {LATENT_DOWNSCALE}")
    if img.channels != LATENT_CHANNELS:
        raise ValueError("encode requires a 3-channel image")
    hl, wl = h // LATENT_DOWNSCALE, w // LATENT_DOWNSCALE
    blocks = img.data.astype(np.float64).reshape(
        hl, LATENT_DOWNSCALE, wl, LATENT_DOWNSCALE, LATENT_CHANNELS
    )
    return Latent(blocks.mean(axis=(1, 3)), LatentOrigin.ENCODED)


def decode(z: Latent) -> ImageBuffer:
    """Nearest-neighbor 8x upsample, clipped to [0, 1], in linear space."""
    up = np.repeat(np.repeat(z.grid, LATENT_DOWNSCALE, axis=0), LATENT_DOWNSCALE, axis=1)
    return ImageBuffer(np.clip(up, 0.0, 1.0).astype(np.float32), ColorSpace.LINEAR)


def noise_latent(latent_h: int, latent_w: int, rng: np.random.Generator) -> Latent:
    return Latent(
        rng.standard_normal((latent_h, latent_w, LATENT_CHANNELS)), LatentOrigin.NOISE
    )


def interpolate_latent(z0: Latent, z1: Latent, t: float) -> Latent:
    """Straight-line interpolant (1-t) z0 + t z1."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if z0.shape != z1.shape:
        raise ValueError("latent shapes differ")
    return Latent((1.0 - t) * z0.grid + t * z1.grid, LatentOrigin.INTERPOLATED)


def velocity_target(z0: Latent, z1: Latent) -> VelocityField:
    """Straight-line velocity z1 - z0."""
    if z0.shape != z1.shape:
        raise ValueError("latent shapes differ")
    return VelocityField(z1.grid - z0.grid)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def fm_loss(v_pred: VelocityField, v_star: VelocityField) -> float:
    """Mean squared error over all latent elements.

    The mean (rather than sum) reduction makes the weighted loss with
    uniform weights reduce to this one exactly.
    """
    if v_pred.grid.shape != v_star.grid.shape:
        raise ValueError("velocity field shapes differ")
    diff = v_pred.grid - v_star.grid
    return float(np.mean(diff * diff))


def _weights_array(w_lat: WeightMap | np.ndarray) -> np.ndarray:
    if isinstance(w_lat, WeightMap):
        return w_lat.data.astype(np.float64)
    return np.asarray(w_lat, dtype=np.float64)


def wfm_loss(
    v_pred: VelocityField, v_star: VelocityField, w_lat: WeightMap | np.ndarray
) -> float:
    """Weighted spatial mean of per-location channel-mean squared errors:
    sum_u W(u) * mse(u) / sum_u W(u).  Invariant to scaling all weights."""
    if v_pred.grid.shape != v_star.grid.shape:
        raise ValueError("velocity field shapes differ")
    w = _weights_array(w_lat)
    if w.shape != v_pred.grid.shape[:2]:
        raise ValueError(
            f"weight shape {w.shape} does not match latent grid {v_pred.grid.shape[:2]}"
        )
    wsum = float(w.sum())
    if wsum <= 0.0:
        raise ValueError("cannot normalize: weights sum to zero")
    diff = v_pred.grid - v_star.grid
    per_location = np.mean(diff * diff, axis=2)
    return float(np.sum(w * per_location) / wsum)


# ---------------------------------------------------------------------------
# Forward pass and hand-derived gradients
# ---------------------------------------------------------------------------


def _features(z_t: np.ndarray, cond: np.ndarray, t: float, s: float) -> np.ndarray:
    h, w = z_t.shape[:2]
    n = h * w
    x = np.empty((n, FEATURE_DIM), dtype=np.float64)
    x[:, :LATENT_CHANNELS] = z_t.reshape(n, LATENT_CHANNELS)
    pad = COND_NEIGHBORHOOD // 2
    padded = np.pad(cond, ((pad, pad), (pad, pad), (0, 0)), mode="edge")
    col = LATENT_CHANNELS
    for dy in range(COND_NEIGHBORHOOD):
        for dx in range(COND_NEIGHBORHOOD):
            window = padded[dy : dy + h, dx : dx + w]
            x[:, col : col + LATENT_CHANNELS] = window.reshape(n, LATENT_CHANNELS)
            col += LATENT_CHANNELS
    x[:, col] = t
    x[:, col + 1] = s
    return x


def _forward_arrays(
    net: VelocityNet, z_t: np.ndarray, cond: np.ndarray, t: float, s: float
):
    x = _features(z_t, cond, t, s)
    w1 = adapter_effective(net.layer1, s)
    w2 = adapter_effective(net.layer2, s)
    hidden = np.tanh(x @ w1.T + net.bias1)
    out = hidden @ w2.T + net.bias2
    return out, x, hidden, w2


def forward(net: VelocityNet, z_t: Latent, cond: Latent, t: float, s: float) -> VelocityField:
    """Evaluate the net at every latent position with adapter-effective
    weights at scale s."""
    if z_t.shape != cond.shape:
        raise ValueError("z_t and condition latents must share a shape")
    out, _, _, _ = _forward_arrays(net, z_t.grid, cond.grid, t, s)
    return VelocityField(out.reshape(z_t.shape))


@dataclass(frozen=True)
class TrainSample:
    """One flow matching supervision point at a fixed (t, s)."""

    z_t: np.ndarray
    cond: np.ndarray
    t: float
    s: float
    v_star: np.ndarray
    w_lat: np.ndarray | None = None  # latent-resolution weights, None = uniform


def loss_and_gradients(
    net: VelocityNet, samples: list[TrainSample], weighted: bool, trainable: str
) -> tuple[float, dict[str, np.ndarray]]:
    """Batch-mean loss and its analytic gradients.

    trainable = "base" gives gradients for layer weights and biases,
    "adapters" for the low-rank factors only (base frozen).
    """
    if trainable not in ("base", "adapters"):
        raise ValueError("trainable must be 'base' or 'adapters'")
    grads = {
        key: np.zeros_like(val)
        for key, val in (
            {
                "layer1.base": net.layer1.base,
                "layer1.bias": net.bias1,
                "layer2.base": net.layer2.base,
                "layer2.bias": net.bias2,
            }
            if trainable == "base"
            else {
                "layer1.a": net.layer1.a,
                "layer1.b": net.layer1.b,
                "layer2.a": net.layer2.a,
                "layer2.b": net.layer2.b,
            }
        ).items()
    }
    total_loss = 0.0
    batch = len(samples)
    for sample in samples:
        out, x, hidden, w2 = _forward_arrays(net, sample.z_t, sample.cond, sample.t, sample.s)
        n = out.shape[0]
        star = sample.v_star.reshape(n, LATENT_CHANNELS)
        diff = out - star
        if not weighted or sample.w_lat is None:
            total_loss += float(np.mean(diff * diff))
            d_out = (2.0 / (n * LATENT_CHANNELS)) * diff
        else:
            w = sample.w_lat.reshape(n).astype(np.float64)
            wsum = float(w.sum())
            if wsum <= 0.0:
                raise ValueError("cannot normalize: weights sum to zero")
            per_location = np.mean(diff * diff, axis=1)
            total_loss += float(np.sum(w * per_location) / wsum)
            d_out = (2.0 / (LATENT_CHANNELS * wsum)) * w[:, None] * diff

        d_w2e = d_out.T @ hidden
        d_b2 = d_out.sum(axis=0)
        d_hidden = d_out @ w2
        d_pre = d_hidden * (1.0 - hidden * hidden)
        d_w1e = d_pre.T @ x
        d_b1 = d_pre.sum(axis=0)

        if trainable == "base":
            grads["layer1.base"] += d_w1e
            grads["layer1.bias"] += d_b1
            grads["layer2.base"] += d_w2e
            grads["layer2.bias"] += d_b2
        else:
            s = sample.s
            grads["layer1.a"] += s * (d_w1e @ net.layer1.b.T)
            grads["layer1.b"] += s * (net.layer1.a.T @ d_w1e)
            grads["layer2.a"] += s * (d_w2e @ net.layer2.b.T)
            grads["layer2.b"] += s * (net.layer2.a.T @ d_w2e)

    for key in grads:
        grads[key] /= batch
    return total_loss / batch, grads


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


class LossKind(enum.Enum):
    FM = "fm"
    WFM = "wfm"


@dataclass(frozen=True)
class TrainConfig:
    steps: int
    seed: int
    learning_rate: float = 1e-3
    batch_size: int = 8
    loss: LossKind = LossKind.FM
    strengths: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8, 1.0)
    pretrain_steps: int = 500
    hidden: int = 64
    rank: int = 4
    # average the adapter factors over the final K steps (0 = return the
    # last iterate); plain SGD wobbles around its stationary point, and the
    # tail mean is a far less noisy estimate of the learned map
    average_tail: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.steps < 0 or self.pretrain_steps < 0:
            raise ValueError("step counts must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.average_tail < 0 or self.average_tail > max(self.steps, 0):
            raise ValueError("average_tail must lie in [0, steps]")


@dataclass(frozen=True)
class TrainingPair:
    """One input image with its pseudo-target group and per-strength weight
    maps (image resolution; resampled to the latent grid here)."""

    image: ImageBuffer
    group: StrengthGroup
    weight_maps: dict[float, WeightMap]


def _apply_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float):
    for key, grad in grads.items():
        params[key] -= lr * grad


def _net_from_params(params: dict[str, np.ndarray], latent_h: int, latent_w: int) -> VelocityNet:
    return VelocityNet(
        layer1=LowRankAdapter(params["layer1.base"], params["layer1.a"], params["layer1.b"]),
        bias1=params["layer1.bias"],
        layer2=LowRankAdapter(params["layer2.base"], params["layer2.a"], params["layer2.b"]),
        bias2=params["layer2.bias"],
        latent_h=latent_h,
        latent_w=latent_w,
    )


def train(pairs: list[TrainingPair], cfg: TrainConfig) -> VelocityNet:
    """Two-phase training.

    Phase 1 pretrains the full net with adapters disabled on the identity
    flow (input -> input, s = 0), so zero strength means no enhancement.
    Phase 2 freezes the base and trains only the adapter factors on
    strength-conditioned pseudo targets, with latent weight maps applied
    when the weighted loss is selected.  Deterministic given the seed.
    """
    if not pairs:
        raise ValueError("training dataset is empty")
    net = init_velocity_net(cfg.seed, hidden=cfg.hidden, rank=cfg.rank)
    if cfg.steps == 0 and cfg.pretrain_steps == 0:
        return net

    rng = np.random.default_rng(cfg.seed)
    conds = [encode(p.image).grid for p in pairs]
    latent_h, latent_w = conds[0].shape[:2]
    targets: list[dict[float, np.ndarray]] = []
    latent_weights: list[dict[float, np.ndarray]] = []
    for pair, cond in zip(pairs, conds):
        if cond.shape[:2] != (latent_h, latent_w):
            raise ValueError("all training images must share dimensions")
        per_strength: dict[float, np.ndarray] = {}
        per_weight: dict[float, np.ndarray] = {}
        for s in cfg.strengths:
            per_strength[s] = encode(pair.group.image_at(s)).grid
            if cfg.loss is LossKind.WFM:
                if s not in pair.weight_maps:
                    raise ValueError(f"missing weight map for strength {s}")
                per_weight[s] = to_latent(pair.weight_maps[s], latent_h, latent_w).data
        targets.append(per_strength)
        latent_weights.append(per_weight)

    params = {
        "layer1.base": net.layer1.base.copy(),
        "layer1.bias": net.bias1.copy(),
        "layer2.base": net.layer2.base.copy(),
        "layer2.bias": net.bias2.copy(),
        "layer1.a": net.layer1.a.copy(),
        "layer1.b": net.layer1.b.copy(),
        "layer2.a": net.layer2.a.copy(),
        "layer2.b": net.layer2.b.copy(),
    }

    def draw_samples(phase: str) -> list[TrainSample]:
        batch = []
        for _ in range(cfg.batch_size):
            idx = int(rng.integers(len(pairs)))
            if phase == "pretrain":
                s = 0.0
                z1 = conds[idx]
                w_lat = None
            else:
                s = cfg.strengths[int(rng.integers(len(cfg.strengths)))]
                z1 = targets[idx][s]
                w_lat = latent_weights[idx].get(s)
            t = float(rng.uniform())
            z0 = rng.standard_normal(z1.shape)
            z_t = (1.0 - t) * z0 + t * z1
            batch.append(TrainSample(z_t, conds[idx], t, s, z1 - z0, w_lat))
        return batch

    current = _net_from_params(params, latent_h, latent_w)
    for step in range(cfg.pretrain_steps):
        loss, grads = loss_and_gradients(current, draw_samples("pretrain"), False, "base")
        if not np.isfinite(loss):
            raise TrainingDiverged(f"pretrain loss non-finite at step {step}")
        _apply_step(params, grads, cfg.learning_rate)
        current = _net_from_params(params, latent_h, latent_w)

    weighted = cfg.loss is LossKind.WFM
    adapter_keys = ("layer1.a", "layer1.b", "layer2.a", "layer2.b")
    tail_sums = {key: np.zeros_like(params[key]) for key in adapter_keys}
    for step in range(cfg.steps):
        loss, grads = loss_and_gradients(current, draw_samples("adapt"), weighted, "adapters")
        if not np.isfinite(loss):
            raise TrainingDiverged(f"adapter loss non-finite at step {step}")
        _apply_step(params, grads, cfg.learning_rate)
        current = _net_from_params(params, latent_h, latent_w)
        if cfg.average_tail and step >= cfg.steps - cfg.average_tail:
            for key in adapter_keys:
                tail_sums[key] += params[key]
    if cfg.average_tail:
        for key in adapter_keys:
            params[key] = tail_sums[key] / cfg.average_tail
        current = _net_from_params(params, latent_h, latent_w)
    return current


def sample(net: VelocityNet, i0: ImageBuffer, s: float, steps: int, seed: int) -> ImageBuffer:
    """Euler integration of the learned field from seeded noise; returns the
    decoded linear image."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"strength must lie in [0, 1], got {s}")
    cond = encode(i0)
    rng = np.random.default_rng(seed)
    z = noise_latent(cond.shape[0], cond.shape[1], rng)
    dt = 1.0 / steps
    for k in range(steps):
        v = forward(net, z, cond, k * dt, s)
        z = Latent(z.grid + dt * v.grid, LatentOrigin.INTERPOLATED)
    return decode(z)


# ---------------------------------------------------------------------------
# Model persistence: magic "CLFM", u16 version, dims header, then all
# parameter tensors as little-endian float32 in declared order
# ---------------------------------------------------------------------------

_TENSOR_ORDER = (
    "layer1.base",
    "layer1.bias",
    "layer2.base",
    "layer2.bias",
    "layer1.a",
    "layer1.b",
    "layer2.a",
    "layer2.b",
)


def _net_tensors(net: VelocityNet) -> dict[str, np.ndarray]:
    return {
        "layer1.base": net.layer1.base,
        "layer1.bias": net.bias1,
        "layer2.base": net.layer2.base,
        "layer2.bias": net.bias2,
        "layer1.a": net.layer1.a,
        "layer1.b": net.layer1.b,
        "layer2.a": net.layer2.a,
        "layer2.b": net.layer2.b,
    }


def save_model(net: VelocityNet, path: str | Path) -> None:
    header = struct.pack(
        "<4sH6I",
        MODEL_MAGIC,
        MODEL_VERSION,
        FEATURE_DIM,
        net.hidden_width,
        LATENT_CHANNELS,
        net.rank,
        net.latent_h,
        net.latent_w,
    )
    tensors = _net_tensors(net)
    with open(path, "wb") as fh:
        fh.write(header)
        for key in _TENSOR_ORDER:
            fh.write(np.ascontiguousarray(tensors[key], dtype="<f4").tobytes())


def load_model(path: str | Path) -> VelocityNet:
    with open(path, "rb") as fh:
        blob = fh.read()
    head = struct.calcsize("<4sH6I")
    if len(blob) < head:
        raise IOError("model file truncated")
    magic, version, feat, hidden, channels, rank, lat_h, lat_w = struct.unpack(
        "<4sH6I", blob[:head]
    )
    if magic != MODEL_MAGIC:
        raise IOError(f"bad model magic {magic!r}")
    if version != MODEL_VERSION:
        raise IOError(f"unsupported model version {version}")
    if feat != FEATURE_DIM or channels != LATENT_CHANNELS:
        raise IOError("model dimensions do not match this build")

    shapes = {
        "layer1.base": (hidden, feat),
        "layer1.bias": (hidden,),
        "layer2.base": (channels, hidden),
        "layer2.bias": (channels,),
        "layer1.a": (hidden, rank),
        "layer1.b": (rank, feat),
        "layer2.a": (channels, rank),
        "layer2.b": (rank, hidden),
    }
    expected = head + 4 * sum(int(np.prod(shape)) for shape in shapes.values())
    if len(blob) != expected:
        raise IOError(f"model file size {len(blob)} != expected {expected}")

    offset = head
    tensors = {}
    for key in _TENSOR_ORDER:
        shape = shapes[key]
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        tensors[key] = arr.astype(np.float64).reshape(shape)
        offset += 4 * count
    return VelocityNet(
        layer1=LowRankAdapter(tensors["layer1.base"], tensors["layer1.a"], tensors["layer1.b"]),
        bias1=tensors["layer1.bias"],
        layer2=LowRankAdapter(tensors["layer2.base"], tensors["layer2.a"], tensors["layer2.b"]),
        bias2=tensors["layer2.bias"],
        latent_h=lat_h,
        latent_w=lat_w,
    )
