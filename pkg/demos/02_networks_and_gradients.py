#!/usr/bin/env python3
# Build each network family, run forward passes, and confirm the analytic
# gradients against central finite differences, the same oracle the test
# suite uses.

import numpy as np

from msksurrogate import nn
from msksurrogate.numerics import RngStream

rng = RngStream(2024)

# ---------------------------------------------------------------------------
# 1. A feed-forward net: 2 hidden tanh layers of 16 nodes.
# ---------------------------------------------------------------------------
ffnn = nn.init_network(
    nn.NetworkSpec(arch="ffnn", input_dim=6, output_dim=3,
                   hidden_layers=2, nodes=16, activation="tanh"),
    rng,
)
x = rng.normal((6,))
print("ffnn params:", nn.count_params(ffnn.spec), "output:", nn.forward_ffnn(ffnn, x).round(3))

# ---------------------------------------------------------------------------
# 2. A bidirectional LSTM consuming a 10-frame window; the dense head reads
#    the concatenated final states of both directions.
# ---------------------------------------------------------------------------
blstm = nn.init_network(
    nn.NetworkSpec(arch="rnn", input_dim=6, output_dim=3, hidden_layers=1,
                   nodes=12, cell="lstm", bidirectional=True, window=10),
    rng,
)
window = rng.normal((10, 6))
print("b-lstm params:", nn.count_params(blstm.spec),
      "output:", nn.forward_rnn(blstm, window).round(3))
print("head width doubled by bidirection:", blstm.params["out.W"].shape[0] == 24)

# ---------------------------------------------------------------------------
# 3. Gradient check: analytic backward vs central differences on the batch
#    mean-squared loss, every parameter of a small GRU.
# ---------------------------------------------------------------------------
gru = nn.init_network(
    nn.NetworkSpec(arch="rnn", input_dim=3, output_dim=2, hidden_layers=2,
                   nodes=4, cell="gru", window=5),
    rng,
)
xb = rng.normal((4, 5, 3))
yb = rng.normal((4, 2))

out, cache = nn.forward_training(gru, xb)
analytic = nn.backward(gru, cache, 2.0 * (out - yb) / out.size)


def loss():
    return float(np.mean((nn.forward_training(gru, xb)[0] - yb) ** 2))


eps = 1e-5
worst = 0.0
for name, arr in gru.params.items():
    flat = arr.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        lp = loss()
        flat[i] = orig - eps
        lm = loss()
        flat[i] = orig
        fd = (lp - lm) / (2 * eps)
        a = analytic[name].ravel()[i]
        worst = max(worst, abs(a - fd) / max(abs(a), abs(fd), 1e-6))
print(f"gradient check over {nn.count_params(gru.spec)} parameters: "
      f"worst relative error {worst:.2e}")

# ---------------------------------------------------------------------------
# 4. Dropout is inverted and train-only: evaluation passes are deterministic.
# ---------------------------------------------------------------------------
dropped = nn.init_network(
    nn.NetworkSpec(arch="ffnn", input_dim=6, output_dim=3, hidden_layers=2,
                   nodes=16, activation="relu", dropout=0.2),
    rng,
)
mask = nn.dropout_mask(RngStream(7), 10**5, 0.2)
print(f"mask zero fraction at p=0.2: {np.mean(mask == 0):.3f}, "
      f"kept entries scaled to {mask.max():.3f}")
e1 = nn.forward_ffnn(dropped, x)
e2 = nn.forward_ffnn(dropped, x)
print("eval deterministic:", np.array_equal(e1, e2))
