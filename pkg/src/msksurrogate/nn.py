"""Network construction, forward passes, and exact analytic gradients.

Covers three architectures behind one parameter-dict representation:

- linear: y = W x + b (a zero-hidden-layer feed-forward net)
- ffnn:   N hidden layers of k nodes, activation on hidden layers only
- rnn:    stacked vanilla/LSTM/GRU cells, unidirectional or bidirectional,
          many-to-one readout into a linear dense head

Recurrent gate activations are fixed sigmoid; the spec'd activation applies
to the cell candidate/output nonlinearity (and to hidden layers for the
FFNN). Dropout, when enabled, is inverted dropout applied to FFNN hidden
activations, between stacked recurrent layers, and to the readout before the
dense head; never inside a recurrent step, so backpropagation through time
stays exact.

All gradients are analytic, computed from a cached forward pass, and are
validated against central finite differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import (
    InvalidProbability,
    InvalidSpec,
    ShapeMismatch,
    StaleCache,
    WrongArch,
)
from .numerics import RngStream

ARCHS = ("linear", "ffnn", "rnn")
ACTIVATIONS = ("relu", "tanh", "sigmoid", "none")
INIT_SCHEMES = ("xavier_normal", "random_normal", "he_normal")
CELL_KINDS = ("vanilla", "lstm", "gru")

RANDOM_NORMAL_SD = 0.05
WEIGHTS_FORMAT_VERSION = 1

# gates per cell kind packed along the last weight axis
# lstm blocks: [input, forget, candidate, output]; gru blocks: [update, reset, candidate]
_GATE_COUNT = {"vanilla": 1, "lstm": 4, "gru": 3}


def act_apply(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "sigmoid":
        return expit(z)
    if kind == "none":
        return z
    raise InvalidSpec(f"unknown activation {kind!r}")


def act_deriv(kind: str, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Derivative w.r.t. the pre-activation z, given z and the output y."""
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    if kind == "tanh":
        return 1.0 - y * y
    if kind == "sigmoid":
        return y * (1.0 - y)
    if kind == "none":
        return np.ones_like(z)
    raise InvalidSpec(f"unknown activation {kind!r}")


@dataclass(frozen=True)
class NetworkSpec:
    """One point of the architecture/hyperparameter space."""

    arch: str
    input_dim: int
    output_dim: int
    hidden_layers: int = 0
    nodes: int = 0
    activation: str = "tanh"
    cell: str = "lstm"
    bidirectional: bool = False
    dropout: float = 0.0
    init: str = "xavier_normal"
    window: int = 10


def validate_spec(spec: NetworkSpec) -> None:
    if spec.arch not in ARCHS:
        raise InvalidSpec(f"unknown arch {spec.arch!r}")
    if spec.input_dim < 1 or spec.output_dim < 1:
        raise InvalidSpec("input_dim and output_dim must be >= 1")
    if not 0.0 <= spec.dropout < 1.0:
        raise InvalidSpec(f"dropout must be in [0, 1), got {spec.dropout}")
    if spec.init not in INIT_SCHEMES:
        raise InvalidSpec(f"unknown init scheme {spec.init!r}")
    if spec.arch == "linear":
        if spec.hidden_layers != 0:
            raise InvalidSpec("linear networks have no hidden layers")
        return
    if spec.activation not in ("relu", "tanh", "sigmoid"):
        raise InvalidSpec(f"hidden activation must be nonlinear, got {spec.activation!r}")
    if spec.hidden_layers < 1 or spec.nodes < 1:
        raise InvalidSpec("ffnn/rnn need hidden_layers >= 1 and nodes >= 1")
    if spec.arch == "rnn":
        if spec.cell not in CELL_KINDS:
            raise InvalidSpec(f"unknown cell kind {spec.cell!r}")
        if spec.window < 1:
            raise InvalidSpec("rnn window must be >= 1")


def param_shapes(spec: NetworkSpec) -> dict[str, tuple[int, ...]]:
    """Ordered parameter name -> shape map for one spec."""
    validate_spec(spec)
    shapes: dict[str, tuple[int, ...]] = {}
    if spec.arch == "linear":
        shapes["out.W"] = (spec.input_dim, spec.output_dim)
        shapes["out.b"] = (spec.output_dim,)
        return shapes
    if spec.arch == "ffnn":
        d = spec.input_dim
        for i in range(1, spec.hidden_layers + 1):
            shapes[f"h{i}.W"] = (d, spec.nodes)
            shapes[f"h{i}.b"] = (spec.nodes,)
            d = spec.nodes
        shapes["out.W"] = (d, spec.output_dim)
        shapes["out.b"] = (spec.output_dim,)
        return shapes
    # rnn
    k = spec.nodes
    gk = _GATE_COUNT[spec.cell] * k
    dirs = ("fwd", "bwd") if spec.bidirectional else ("fwd",)
    d = spec.input_dim
    for layer in range(spec.hidden_layers):
        for direction in dirs:
            shapes[f"r{layer}.{direction}.Wx"] = (d, gk)
            shapes[f"r{layer}.{direction}.Wh"] = (k, gk)
            shapes[f"r{layer}.{direction}.b"] = (gk,)
        d = k * len(dirs)
    shapes["out.W"] = (d, spec.output_dim)
    shapes["out.b"] = (spec.output_dim,)
    return shapes


def count_params(spec: NetworkSpec) -> int:
    """Exact trainable-parameter count (weights + biases)."""
    return sum(int(np.prod(shape)) for shape in param_shapes(spec).values())


@dataclass
class Network:
    """Spec plus its parameter arrays.

    `version` increments whenever training updates the parameters; backward
    passes refuse caches recorded under an older version.
    """

    spec: NetworkSpec
    params: dict[str, np.ndarray] = field(repr=False)
    version: int = 0


def _init_sd(scheme: str, shape: tuple[int, ...]) -> float:
    fan_in, fan_out = shape
    if scheme == "xavier_normal":
        return float(np.sqrt(2.0 / (fan_in + fan_out)))
    if scheme == "he_normal":
        return float(np.sqrt(2.0 / fan_in))
    if scheme == "random_normal":
        return RANDOM_NORMAL_SD
    raise InvalidSpec(f"unknown init scheme {scheme!r}")


def init_network(spec: NetworkSpec, rng: RngStream) -> Network:
    """Draw weights from the spec's init scheme; biases start at zero."""
    params: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(spec).items():
        if len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.normal(shape, sd=_init_sd(spec.init, shape))
    return Network(spec=spec, params=params)


def dropout_mask(rng: RngStream, shape, p: float) -> np.ndarray:
    """Inverted-dropout mask: 0 with probability p, else 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise InvalidProbability(f"dropout probability must be in [0, 1), got {p}")
    if p == 0.0:
        return np.ones(shape)
    keep = rng.uniform(shape=shape) >= p
    return keep.astype(np.float64) / (1.0 - p)


def draw_masks(net: Network, n_batch: int, rng: RngStream) -> dict[str, np.ndarray] | None:
    """Draw the dropout masks one training forward pass needs, in a fixed order."""
    spec = net.spec
    if spec.dropout == 0.0:
        return None
    masks: dict[str, np.ndarray] = {}
    if spec.arch == "ffnn":
        for i in range(1, spec.hidden_layers + 1):
            masks[f"h{i}"] = dropout_mask(rng, (n_batch, spec.nodes), spec.dropout)
    elif spec.arch == "rnn":
        width = spec.nodes * (2 if spec.bidirectional else 1)
        for layer in range(spec.hidden_layers - 1):
            masks[f"seq{layer}"] = dropout_mask(
                rng, (n_batch, spec.window, width), spec.dropout
            )
        masks["head"] = dropout_mask(rng, (n_batch, width), spec.dropout)
    # linear: dropout has no hidden activations to act on
    return masks or None


# ---------------------------------------------------------------------------
# recurrent cells: forward returns every hidden state plus what backward needs
# ---------------------------------------------------------------------------


def _cell_forward(kind, act, seq, wx, wh, b):
    n, t, _ = seq.shape
    k = wh.shape[0]
    zx = seq.reshape(n * t, -1) @ wx
    zx = zx.reshape(n, t, -1)
    if kind == "vanilla":
        zs = np.empty((n, t, k))
        hs = np.empty((n, t, k))
        h = np.zeros((n, k))
        for s in range(t):
            z = zx[:, s] + h @ wh + b
            h = act_apply(act, z)
            zs[:, s] = z
            hs[:, s] = h
        return hs, {"kind": kind, "act": act, "seq": seq, "Z": zs, "H": hs}
    if kind == "lstm":
        gates = np.empty((n, t, 4 * k))  # activated [i, f, g, o]
        ag = np.empty((n, t, k))  # candidate pre-activation, for relu derivative
        cs = np.empty((n, t, k))
        tcs = np.empty((n, t, k))  # act(c)
        hs = np.empty((n, t, k))
        h = np.zeros((n, k))
        c = np.zeros((n, k))
        for s in range(t):
            a = zx[:, s] + h @ wh + b
            i = expit(a[:, :k])
            f = expit(a[:, k : 2 * k])
            g = act_apply(act, a[:, 2 * k : 3 * k])
            o = expit(a[:, 3 * k :])
            c = f * c + i * g
            tc = act_apply(act, c)
            h = o * tc
            gates[:, s, :k] = i
            gates[:, s, k : 2 * k] = f
            gates[:, s, 2 * k : 3 * k] = g
            gates[:, s, 3 * k :] = o
            ag[:, s] = a[:, 2 * k : 3 * k]
            cs[:, s] = c
            tcs[:, s] = tc
            hs[:, s] = h
        return hs, {
            "kind": kind, "act": act, "seq": seq,
            "G": gates, "AG": ag, "C": cs, "TC": tcs, "H": hs,
        }
    if kind == "gru":
        zg = np.empty((n, t, k))  # update gate
        rg = np.empty((n, t, k))  # reset gate
        hc = np.empty((n, t, k))  # candidate
        ac = np.empty((n, t, k))  # candidate pre-activation
        rh = np.empty((n, t, k))  # reset * previous state
        hs = np.empty((n, t, k))
        h = np.zeros((n, k))
        for s in range(t):
            azr = zx[:, s, : 2 * k] + h @ wh[:, : 2 * k] + b[: 2 * k]
            z = expit(azr[:, :k])
            r = expit(azr[:, k:])
            rhp = r * h
            a_c = zx[:, s, 2 * k :] + rhp @ wh[:, 2 * k :] + b[2 * k :]
            cand = act_apply(act, a_c)
            h = (1.0 - z) * h + z * cand
            zg[:, s] = z
            rg[:, s] = r
            hc[:, s] = cand
            ac[:, s] = a_c
            rh[:, s] = rhp
            hs[:, s] = h
        return hs, {
            "kind": kind, "act": act, "seq": seq,
            "ZG": zg, "RG": rg, "HC": hc, "AC": ac, "RH": rh, "H": hs,
        }
    raise InvalidSpec(f"unknown cell kind {kind!r}")


def _cell_backward(cache, wx, wh, dhs):
    """Backpropagation through time for one cell direction.

    `dhs` holds the direct gradient flowing into each emitted hidden state;
    the recursion through h_{t-1} (and c_{t-1}) is added internally. Returns
    (dWx, dWh, db, dseq).
    """
    kind, act, seq = cache["kind"], cache["act"], cache["seq"]
    n, t, d_in = seq.shape
    k = wh.shape[0]
    hs = cache["H"]
    dwh = np.zeros_like(wh)
    db = np.zeros_like(wh[0])
    dzx = np.empty((n, t, wh.shape[1]))

    if kind == "vanilla":
        zs = cache["Z"]
        dh_next = np.zeros((n, k))
        for s in reversed(range(t)):
            dh = dhs[:, s] + dh_next
            dz = dh * act_deriv(act, zs[:, s], hs[:, s])
            h_prev = hs[:, s - 1] if s > 0 else None
            if h_prev is not None:
                dwh += h_prev.T @ dz
            db += dz.sum(axis=0)
            dzx[:, s] = dz
            dh_next = dz @ wh.T
    elif kind == "lstm":
        gates, ag, cs, tcs = cache["G"], cache["AG"], cache["C"], cache["TC"]
        dh_next = np.zeros((n, k))
        dc_next = np.zeros((n, k))
        for s in reversed(range(t)):
            i = gates[:, s, :k]
            f = gates[:, s, k : 2 * k]
            g = gates[:, s, 2 * k : 3 * k]
            o = gates[:, s, 3 * k :]
            c_prev = cs[:, s - 1] if s > 0 else np.zeros((n, k))
            dh = dhs[:, s] + dh_next
            do = dh * tcs[:, s]
            dc = dh * o * act_deriv(act, cs[:, s], tcs[:, s]) + dc_next
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dc_next = dc * f
            da = np.concatenate(
                [
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    dg * act_deriv(act, ag[:, s], g),
                    do * o * (1.0 - o),
                ],
                axis=1,
            )
            if s > 0:
                dwh += hs[:, s - 1].T @ da
            db += da.sum(axis=0)
            dzx[:, s] = da
            dh_next = da @ wh.T
    elif kind == "gru":
        zg, rg, hc, ac, rh = cache["ZG"], cache["RG"], cache["HC"], cache["AC"], cache["RH"]
        dh_next = np.zeros((n, k))
        for s in reversed(range(t)):
            z = zg[:, s]
            r = rg[:, s]
            cand = hc[:, s]
            h_prev = hs[:, s - 1] if s > 0 else np.zeros((n, k))
            dh = dhs[:, s] + dh_next
            dz = dh * (cand - h_prev)
            dcand = dh * z
            dh_prev = dh * (1.0 - z)
            da_c = dcand * act_deriv(act, ac[:, s], cand)
            dwh[:, 2 * k :] += rh[:, s].T @ da_c
            drh = da_c @ wh[:, 2 * k :].T
            dr = drh * h_prev
            dh_prev = dh_prev + drh * r
            da_z = dz * z * (1.0 - z)
            da_r = dr * r * (1.0 - r)
            if s > 0:
                dwh[:, :k] += h_prev.T @ da_z
                dwh[:, k : 2 * k] += h_prev.T @ da_r
            db[:k] += da_z.sum(axis=0)
            db[k : 2 * k] += da_r.sum(axis=0)
            db[2 * k :] += da_c.sum(axis=0)
            dzx[:, s, :k] = da_z
            dzx[:, s, k : 2 * k] = da_r
            dzx[:, s, 2 * k :] = da_c
            dh_next = dh_prev + da_z @ wh[:, :k].T + da_r @ wh[:, k : 2 * k].T
    else:
        raise InvalidSpec(f"unknown cell kind {kind!r}")

    dzx_flat = dzx.reshape(n * t, -1)
    dwx = seq.reshape(n * t, d_in).T @ dzx_flat
    dseq = (dzx_flat @ wx.T).reshape(n, t, d_in)
    return dwx, dwh, db, dseq


# ---------------------------------------------------------------------------
# whole-network forward/backward
# ---------------------------------------------------------------------------


class ForwardCache:
    """Everything one backward pass needs from the matching forward pass."""

    def __init__(self, net, masks, payload):
        self.net = net
        self.version = net.version
        self.masks = masks
        self.payload = payload


def _ffnn_forward(net, x, masks):
    spec = net.spec
    hs = [x]  # layer inputs (post-dropout)
    zs = []
    pre = []  # pre-dropout activations
    h = x
    for i in range(1, spec.hidden_layers + 1):
        z = h @ net.params[f"h{i}.W"] + net.params[f"h{i}.b"]
        a = act_apply(spec.activation, z)
        mask = masks.get(f"h{i}") if masks else None
        h = a * mask if mask is not None else a
        zs.append(z)
        pre.append(a)
        hs.append(h)
    y = h @ net.params["out.W"] + net.params["out.b"]
    return y, {"hs": hs, "zs": zs, "pre": pre}


def _ffnn_backward(net, payload, masks, dy):
    spec = net.spec
    hs, zs, pre = payload["hs"], payload["zs"], payload["pre"]
    grads = {}
    grads["out.W"] = hs[-1].T @ dy
    grads["out.b"] = dy.sum(axis=0)
    dh = dy @ net.params["out.W"].T
    for i in range(spec.hidden_layers, 0, -1):
        mask = masks.get(f"h{i}") if masks else None
        if mask is not None:
            dh = dh * mask
        dz = dh * act_deriv(spec.activation, zs[i - 1], pre[i - 1])
        grads[f"h{i}.W"] = hs[i - 1].T @ dz
        grads[f"h{i}.b"] = dz.sum(axis=0)
        dh = dz @ net.params[f"h{i}.W"].T
    return grads


def _rnn_forward(net, x, masks):
    spec = net.spec
    k = spec.nodes
    bi = spec.bidirectional
    seq = x
    layers = []
    for layer in range(spec.hidden_layers):
        pf = {nm: net.params[f"r{layer}.fwd.{nm}"] for nm in ("Wx", "Wh", "b")}
        hs_f, cache_f = _cell_forward(
            spec.cell, spec.activation, seq, pf["Wx"], pf["Wh"], pf["b"]
        )
        if bi:
            rev = np.ascontiguousarray(seq[:, ::-1, :])
            pb = {nm: net.params[f"r{layer}.bwd.{nm}"] for nm in ("Wx", "Wh", "b")}
            hs_b, cache_b = _cell_forward(
                spec.cell, spec.activation, rev, pb["Wx"], pb["Wh"], pb["b"]
            )
            out = np.concatenate([hs_f, hs_b[:, ::-1, :]], axis=2)
        else:
            hs_b, cache_b = None, None
            out = hs_f
        mask = masks.get(f"seq{layer}") if masks else None
        fed = out * mask if mask is not None else out
        layers.append(
            {"cache_f": cache_f, "cache_b": cache_b, "hs_f": hs_f, "hs_b": hs_b, "mask": mask}
        )
        seq = fed
    # many-to-one readout: final forward state (+ final backward state)
    last = layers[-1]
    readout = last["hs_f"][:, -1]
    if bi:
        readout = np.concatenate([readout, last["hs_b"][:, -1]], axis=1)
    hmask = masks.get("head") if masks else None
    fed_read = readout * hmask if hmask is not None else readout
    y = fed_read @ net.params["out.W"] + net.params["out.b"]
    return y, {"layers": layers, "fed_read": fed_read, "hmask": hmask}


def _rnn_backward(net, payload, dy):
    spec = net.spec
    k = spec.nodes
    bi = spec.bidirectional
    layers = payload["layers"]
    grads = {}
    grads["out.W"] = payload["fed_read"].T @ dy
    grads["out.b"] = dy.sum(axis=0)
    dread = dy @ net.params["out.W"].T
    if payload["hmask"] is not None:
        dread = dread * payload["hmask"]

    dseq_above = None  # gradient w.r.t. the (masked) output of the layer below
    for layer in reversed(range(spec.hidden_layers)):
        rec = layers[layer]
        n, t, _ = rec["cache_f"]["seq"].shape
        if layer == spec.hidden_layers - 1:
            dhs_f = np.zeros((n, t, k))
            dhs_f[:, -1] = dread[:, :k]
            if bi:
                dhs_b = np.zeros((n, t, k))
                dhs_b[:, -1] = dread[:, k:]
        else:
            dout = dseq_above
            if rec["mask"] is not None:
                dout = dout * rec["mask"]
            dhs_f = dout[:, :, :k]
            if bi:
                dhs_b = np.ascontiguousarray(dout[:, ::-1, k:])
        dwx, dwh, db, dseq = _cell_backward(
            rec["cache_f"],
            net.params[f"r{layer}.fwd.Wx"],
            net.params[f"r{layer}.fwd.Wh"],
            dhs_f,
        )
        grads[f"r{layer}.fwd.Wx"] = dwx
        grads[f"r{layer}.fwd.Wh"] = dwh
        grads[f"r{layer}.fwd.b"] = db
        if bi:
            dwx_b, dwh_b, db_b, dseq_b = _cell_backward(
                rec["cache_b"],
                net.params[f"r{layer}.bwd.Wx"],
                net.params[f"r{layer}.bwd.Wh"],
                dhs_b,
            )
            grads[f"r{layer}.bwd.Wx"] = dwx_b
            grads[f"r{layer}.bwd.Wh"] = dwh_b
            grads[f"r{layer}.bwd.b"] = db_b
            dseq = dseq + dseq_b[:, ::-1, :]
        dseq_above = dseq
    return grads


def _check_rnn_input(spec, window):
    if window.ndim != 3:
        raise ShapeMismatch(f"rnn input must be (n, t, features), got ndim={window.ndim}")
    if window.shape[1] != spec.window:
        raise ShapeMismatch(
            f"window has {window.shape[1]} rows, spec expects {spec.window}"
        )
    if window.shape[2] != spec.input_dim:
        raise ShapeMismatch(
            f"window has {window.shape[2]} features, spec expects {spec.input_dim}"
        )


def forward_ffnn(net: Network, x) -> np.ndarray:
    """Evaluation-mode forward pass for linear and feed-forward networks.

    Accepts a single feature vector or a batch of rows; dropout is never
    applied in evaluation mode.
    """
    if net.spec.arch == "rnn":
        raise WrongArch("forward_ffnn called on a recurrent network")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.spec.input_dim:
        raise ShapeMismatch(
            f"input has shape {x.shape}, spec expects (*, {net.spec.input_dim})"
        )
    y, _ = _ffnn_forward(net, x, None)
    return y[0] if single else y


def forward_rnn(net: Network, window) -> np.ndarray:
    """Evaluation-mode many-to-one forward pass for recurrent networks."""
    if net.spec.arch != "rnn":
        raise WrongArch(f"forward_rnn called on arch {net.spec.arch!r}")
    window = np.asarray(window, dtype=np.float64)
    single = window.ndim == 2
    if single:
        window = window[None, :, :]
    _check_rnn_input(net.spec, window)
    y, _ = _rnn_forward(net, window, None)
    return y[0] if single else y


def forward(net: Network, x) -> np.ndarray:
    """Evaluation-mode forward dispatch on the network architecture."""
    if net.spec.arch == "rnn":
        return forward_rnn(net, x)
    return forward_ffnn(net, x)


def forward_training(
    net: Network,
    x,
    rng: RngStream | None = None,
    masks: dict[str, np.ndarray] | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Training-mode batched forward pass that records a backward cache.

    Dropout masks are drawn from `rng` when the spec enables dropout; a
    caller may instead supply `masks` explicitly (the gradient-check tests
    do, so finite differences see the same masks).
    """
    x = np.asarray(x, dtype=np.float64)
    if net.spec.arch == "rnn":
        _check_rnn_input(net.spec, x)
    elif x.ndim != 2 or x.shape[1] != net.spec.input_dim:
        raise ShapeMismatch(
            f"input has shape {x.shape}, spec expects (*, {net.spec.input_dim})"
        )
    if masks is None and rng is not None:
        masks = draw_masks(net, x.shape[0], rng)
    if net.spec.arch == "rnn":
        y, payload = _rnn_forward(net, x, masks)
    else:
        y, payload = _ffnn_forward(net, x, masks)
    return y, ForwardCache(net, masks, payload)


def backward(net: Network, cache: ForwardCache, dy) -> dict[str, np.ndarray]:
    """Exact gradient of the cached forward pass w.r.t. every parameter.

    `dy` is the loss gradient at the network output; dropout masks recorded
    during the forward pass are reused.
    """
    if cache.net is not net or cache.version != net.version:
        raise StaleCache("forward cache does not match the network's parameters")
    dy = np.asarray(dy, dtype=np.float64)
    if net.spec.arch == "rnn":
        return _rnn_backward(net, cache.payload, dy)
    return _ffnn_backward(net, cache.payload, cache.masks, dy)


# ---------------------------------------------------------------------------
# serialization: versioned JSON, round-trip exact for finite 64-bit values
# ---------------------------------------------------------------------------


def network_to_dict(net: Network) -> dict:
    return {
        "format_version": WEIGHTS_FORMAT_VERSION,
        "spec": asdict(net.spec),
        "layers": [
            {"name": name, "shape": list(arr.shape), "values": arr.ravel().tolist()}
            for name, arr in net.params.items()
        ],
    }


def network_from_dict(payload: dict) -> Network:
    if payload.get("format_version") != WEIGHTS_FORMAT_VERSION:
        raise InvalidSpec(f"unsupported weights format {payload.get('format_version')!r}")
    spec = NetworkSpec(**payload["spec"])
    expected = param_shapes(spec)
    params = {}
    for layer in payload["layers"]:
        name, shape = layer["name"], tuple(layer["shape"])
        if name not in expected or expected[name] != shape:
            raise InvalidSpec(f"layer {name!r} with shape {shape} does not fit the spec")
        params[name] = np.array(layer["values"], dtype=np.float64).reshape(shape)
    if set(params) != set(expected):
        raise InvalidSpec("serialized layers do not cover the spec's parameters")
    # restore the canonical parameter order
    return Network(spec=spec, params={name: params[name] for name in expected})


def save_network(net: Network, path) -> None:
    with open(Path(path), "w") as fh:
        json.dump(network_to_dict(net), fh)


def load_network(path) -> Network:
    with open(Path(path)) as fh:
        return network_from_dict(json.load(fh))
