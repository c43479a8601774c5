"""Residual dense network (1-D convolutional) mapping a nodal state to its
nodal time derivative.

Layout, for a single-channel input of length ``K * N_p``::

    f1 = conv(u)                 shallow features (kept for the global skip)
    x  = conv(f1)
    b_i = RDB_i(b_{i-1})         D residual dense blocks, b_0 = x
    g  = conv3(conv1x1(cat(b_1..b_D)))    global feature fusion
    out = conv(g + f1)           one output channel

Each RDB stacks L conv+ReLU layers on the running concatenation of its input
and all previous layer outputs, fuses back with a 1x1 conv and adds its input.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from dgshock import autodiff as ad
from dgshock.autodiff import Tensor, concat, conv1d, relu


@dataclass(frozen=True)
class RDNConfig:
    D: int = 4
    L: int = 8
    g: int = 32
    features: int = 32
    kernel_size: int = 3
    in_channels: int = 1
    out_channels: int = 1
    input_scale: float = 1.0
    input_shift: float = 0.0
    zero_output_init: bool = False

    def __post_init__(self):
        for key in ("D", "L", "g", "features", "kernel_size", "in_channels", "out_channels"):
            if getattr(self, key) < 1:
                raise ValueError(f"{key} must be positive")
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")


def _conv_shapes(cfg: RDNConfig):
    F, k, g = cfg.features, cfg.kernel_size, cfg.g
    yield "sfe1", (F, cfg.in_channels, k)
    yield "sfe2", (F, F, k)
    for d in range(cfg.D):
        for l in range(cfg.L):
            yield f"rdb{d}.conv{l}", (g, F + l * g, k)
        yield f"rdb{d}.fuse", (F, F + cfg.L * g, 1)
    yield "gff1", (F, cfg.D * F, 1)
    yield "gff2", (F, F, k)
    yield "out", (cfg.out_channels, F, k)


def parameter_count(cfg: RDNConfig) -> int:
    """Closed form of the number of scalar weights and biases."""
    F, k, g, L, D = cfg.features, cfg.kernel_size, cfg.g, cfg.L, cfg.D
    shallow = (cfg.in_channels * F * k + F) + (F * F * k + F)
    dense = sum((F + l * g) * g * k + g for l in range(L))
    block = dense + (F + L * g) * F + F
    fusion = (D * F * F + F) + (F * F * k + F)
    output = F * cfg.out_channels * k + cfg.out_channels
    return shallow + D * block + fusion + output


def init_params(cfg: RDNConfig, seed: int = 0, zero_output: bool | None = None) -> dict[str, Tensor]:
    """Uniform fan-in scaled weights and zero biases.

    The output conv starts at zero when ``zero_output`` is set (falls back to
    ``cfg.zero_output_init``); a zero output pins every residual of a
    piecewise-constant state to exactly zero, where the L1 loss has a kink.
    """
    if zero_output is None:
        zero_output = cfg.zero_output_init
    rng = np.random.default_rng(seed)
    params: dict[str, Tensor] = {}
    for name, shape in _conv_shapes(cfg):
        c_out, c_in, k = shape
        bound = np.sqrt(1.0 / (c_in * k))
        w = rng.uniform(-bound, bound, size=shape)
        if name == "out" and zero_output:
            w = np.zeros(shape)
        params[f"{name}.weight"] = Tensor(w, requires_grad=True, name=f"{name}.weight")
        params[f"{name}.bias"] = Tensor(np.zeros(c_out), requires_grad=True, name=f"{name}.bias")
    return params


def count_params(params: dict[str, Tensor]) -> int:
    return sum(p.size for p in params.values())


def _conv(params, name, x):
    return conv1d(x, params[f"{name}.weight"], params[f"{name}.bias"])


def rdb_forward(x, params: dict[str, Tensor], block: int, L: int):
    """One residual dense block as a single tape node.

    All layer outputs live in one zero-padded feature buffer, so layer ``l``
    reads the dense concatenation as a view instead of a copy.
    """
    x = ad.as_tensor(x)
    convs = [(params[f"rdb{block}.conv{l}.weight"], params[f"rdb{block}.conv{l}.bias"]) for l in range(L)]
    fw, fb = params[f"rdb{block}.fuse.weight"], params[f"rdb{block}.fuse.bias"]
    F, n = x.shape
    k = convs[0][0].shape[2]
    g = convs[0][0].shape[0]
    pad = (k - 1) // 2
    C = F + L * g
    if fw.shape[1] != C:
        raise ValueError(f"block {block}: fusion expects {fw.shape[1]} channels, got {C}")
    buf = np.zeros((C, n + 2 * pad))
    buf[:F, pad:pad + n] = x.data
    taps, active = [], []
    for l, (w, b) in enumerate(convs):
        c_in = F + l * g
        wt = [np.ascontiguousarray(w.data[:, :, j]) for j in range(k)]
        z = wt[0] @ buf[:c_in, 0:n]
        for j in range(1, k):
            z += wt[j] @ buf[:c_in, j:j + n]
        z += b.data[:, None]
        mask = z > 0
        buf[c_in:c_in + g, pad:pad + n] = np.where(mask, z, 0.0)
        taps.append(wt)
        active.append(mask)
    feats = buf[:, pad:pad + n]
    fw2 = fw.data[:, :, 0]
    out = fw2 @ feats + fb.data[:, None] + x.data

    def back(G):
        grads = [None] * (1 + 2 * L + 2)
        grads[-2] = (G @ feats.T)[:, :, None]
        grads[-1] = G.sum(axis=1)
        gbuf = np.zeros((C, n + 2 * pad))
        gbuf[:, pad:pad + n] = fw2.T @ G
        for l in reversed(range(L)):
            c_in = F + l * g
            gz = np.where(active[l], gbuf[c_in:c_in + g, pad:pad + n], 0.0)
            gw = np.empty((g, c_in, k))
            for j in range(k):
                gw[:, :, j] = gz @ buf[:c_in, j:j + n].T
                gbuf[:c_in, j:j + n] += taps[l][j].T @ gz
            grads[1 + 2 * l] = gw
            grads[2 + 2 * l] = gz.sum(axis=1)
        grads[0] = G + gbuf[:F, pad:pad + n]
        return tuple(grads)

    parents = (x,) + tuple(t for pair in convs for t in pair) + (fw, fb)
    return Tensor(out, _parents=parents, _backward=back)


def rdb_forward_reference(x, params: dict[str, Tensor], block: int, L: int):
    """Same block built from elementary ops; used to validate the fused node."""
    features = [x]
    for l in range(L):
        inp = features[0] if l == 0 else concat(features, axis=0)
        features.append(relu(_conv(params, f"rdb{block}.conv{l}", inp)))
    return _conv(params, f"rdb{block}.fuse", concat(features, axis=0)) + x


def rdn_forward(u, params: dict[str, Tensor], cfg: RDNConfig, shape: tuple[int, int] | None = None):
    """Network output for a nodal field ``u`` of shape (K, N_p), same shape back."""
    shape = tuple(ad.value(u).shape) if shape is None else shape
    if ad.value(u).shape != shape:
        raise ValueError(f"input shape {ad.value(u).shape} does not match mesh shape {shape}")
    x = u.reshape(1, -1)
    if cfg.input_scale != 1.0 or cfg.input_shift != 0.0:
        x = (x - cfg.input_shift) * cfg.input_scale
    f1 = _conv(params, "sfe1", x)
    h = _conv(params, "sfe2", f1)
    blocks = []
    for d in range(cfg.D):
        h = rdb_forward(h, params, d, cfg.L)
        blocks.append(h)
    fused = _conv(params, "gff2", _conv(params, "gff1", concat(blocks, axis=0)))
    out = _conv(params, "out", fused + f1)
    return out.reshape(*shape)


def predict(u: np.ndarray, params: dict[str, Tensor], cfg: RDNConfig) -> np.ndarray:
    """Forward pass without recording gradients."""
    frozen = {k: Tensor(p.data) for k, p in params.items()}
    return rdn_forward(Tensor(u), frozen, cfg).data


def save_checkpoint(path, params: dict[str, Tensor], cfg: RDNConfig, extra: dict | None = None):
    """Write a ``.npz`` holding every parameter plus a JSON echo of the config."""
    meta = {"config": asdict(cfg), "extra": extra or {}}
    arrays = {k: p.data for k, p in params.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_checkpoint(path) -> tuple[dict[str, Tensor], RDNConfig, dict]:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        params = {k: Tensor(data[k].copy(), requires_grad=True, name=k)
                  for k in data.files if k != "__meta__"}
    cfg = RDNConfig(**meta["config"])
    expected = [f"{n}.{kind}" for n, _ in _conv_shapes(cfg) for kind in ("weight", "bias")]
    if sorted(expected) != sorted(params):
        raise ValueError("checkpoint parameters do not match the stored configuration")
    return {k: params[k] for k in expected}, cfg, meta["extra"]
