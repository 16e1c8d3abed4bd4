"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Criterion 7 trains a 12-configuration recurrent smoke grid and is the
long pole (a few minutes on 4 cores); everything else finishes in seconds.
"""

import time
from contextlib import contextmanager

import numpy as np
import numpy.testing as npt
import pytest

from msksurrogate import dataset, metrics, nn, optim, protocol, synth
from msksurrogate.numerics import RngStream, cubic_resample, standardize_fit


@contextmanager
def criterion(number: int, description: str):
    try:
        yield
    except BaseException:
        print(f"[criterion {number:2d}] {description}: FAIL")
        raise
    print(f"[criterion {number:2d}] {description}: PASS")


def test_criterion_1_grid_cardinality():
    with criterion(1, "grid cardinality 43740/23328 under 1 s each"):
        start = time.perf_counter()
        n1 = sum(1 for _ in protocol.enumerate_grid(protocol.table1_grid()))
        t1 = time.perf_counter() - start
        start = time.perf_counter()
        n2 = sum(1 for _ in protocol.enumerate_grid(protocol.table2_grid()))
        t2 = time.perf_counter() - start
        assert n1 == 43740
        assert n2 == 23328
        assert t1 < 1.0 and t2 < 1.0


def _fd_check(net, x, y, tol=1e-4, eps=1e-5):
    out, cache = nn.forward_training(net, x)
    dy = 2.0 * (out - y) / out.size
    analytic = nn.backward(net, cache, dy)
    for name, arr in net.params.items():
        flat = arr.ravel()
        a = analytic[name].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = float(np.mean((nn.forward_training(net, x)[0] - y) ** 2))
            flat[i] = orig - eps
            lm = float(np.mean((nn.forward_training(net, x)[0] - y) ** 2))
            flat[i] = orig
            fd = (lp - lm) / (2 * eps)
            denom = max(abs(a[i]), abs(fd), 1e-6)
            assert abs(a[i] - fd) / denom < tol, (
                f"{net.spec.arch}/{net.spec.cell if net.spec.arch == 'rnn' else net.spec.activation}"
                f" {name}[{i}]: analytic {a[i]:.3e} vs fd {fd:.3e}"
            )


def _random_instance(kind, seed):
    draws = np.random.default_rng(seed)
    f_in = int(draws.integers(2, 5))
    f_out = int(draws.integers(1, 4))
    n_batch = 3
    if kind[0] == "ffnn":
        spec = nn.NetworkSpec(
            arch="ffnn", input_dim=f_in, output_dim=f_out,
            hidden_layers=int(draws.integers(1, 3)), nodes=int(draws.integers(2, 9)),
            activation=kind[1],
        )
        x = draws.normal(size=(n_batch, f_in))
    else:
        t = int(draws.integers(2, 7))
        spec = nn.NetworkSpec(
            arch="rnn", input_dim=f_in, output_dim=f_out,
            hidden_layers=int(draws.integers(1, 3)), nodes=int(draws.integers(2, 9)),
            activation="tanh", cell=kind[1], bidirectional=kind[2], window=t,
        )
        x = draws.normal(size=(n_batch, t, f_in))
    net = nn.init_network(spec, RngStream(seed))
    for name, arr in net.params.items():
        if name.endswith(".b"):  # keep relu pre-activations off the exact kink
            arr += draws.normal(scale=0.1, size=arr.shape)
    y = draws.normal(size=(n_batch, f_out))
    return net, x, y


def test_criterion_2_gradients_match_finite_differences():
    kinds = [("ffnn", act) for act in ("relu", "tanh", "sigmoid")]
    kinds += [("rnn", cell, bi) for cell in ("vanilla", "lstm", "gru") for bi in (False, True)]
    with criterion(2, "all gradients match central differences (rel err < 1e-4)"):
        start = time.perf_counter()
        for k, kind in enumerate(kinds):
            for instance in range(20):
                net, x, y = _random_instance(kind, seed=1000 * k + instance)
                _fd_check(net, x, y)
        assert time.perf_counter() - start < 60.0


def test_criterion_3_metric_identities():
    with criterion(3, "metric identities (mean-predictor, affine, loss bridge)"):
        rng = np.random.default_rng(33)
        truth = rng.normal(size=200) * 3 + 5
        pred = np.full(200, truth.mean())
        assert metrics.nrmse(pred, truth) == pytest.approx(1.0, abs=1e-9)

        x = rng.normal(size=150)
        assert metrics.pearson_r(4.2 * x + 0.7, x) == pytest.approx(1.0, abs=1e-12)

        for trial in range(10):
            t = rng.normal(size=(60, 1)) * rng.uniform(0.5, 4) + rng.normal()
            p = t + rng.normal(size=(60, 1)) * 0.4
            scaler = standardize_fit(t)
            assert metrics.nrmse(p, t) ** 2 == pytest.approx(
                optim.loss_normalized_mse(p, t, scaler), abs=1e-9
            )


def test_criterion_4_split_invariants_over_1000_seeds():
    with criterion(4, "SE/SN split invariants over 1000 seeds in < 5 s"):
        trials = {
            f"S{s}_T{j}": f"S{s}" for s in range(1, 6) for j in range(1, 4)
        }
        subjects = sorted({v for v in trials.values()})
        start = time.perf_counter()
        for seed in range(1000):
            plan = protocol.split_subject_exposed(trials, RngStream(seed))
            test_subjects = {trials[t] for t in plan.test}
            for train, val in plan.folds:
                assert not set(train) & set(val)
                assert not (set(train) | set(val)) & set(plan.test)
                assert test_subjects <= {trials[t] for t in train}
        for seed in range(1000):
            plan = protocol.split_subject_naive(subjects, RngStream(seed))
            assert len(plan.folds) == 4
            for train, val in plan.folds:
                assert not set(train) & set(val)
                assert plan.test[0] not in train + val
        assert time.perf_counter() - start < 5.0


def test_criterion_5_windowing():
    with criterion(5, "window count and last-frame target alignment (200 cases)"):
        draws = np.random.default_rng(55)
        for _ in range(200):
            t = int(draws.integers(1, 30))
            n = int(draws.integers(t, t + 60))
            outputs = np.arange(n, dtype=np.float64)[:, None]  # row k holds k
            bundle = dataset.TrialBundle(
                subject=dataset.SubjectMeta("S1", 70.0, 1.8),
                trial_id="w",
                inputs=draws.normal(size=(n, 2)),
                outputs=outputs,
                input_names=("a", "b"),
                output_names=("y",),
                input_hz=60.0,
                output_hz=60.0,
                category="joint_angles",
            )
            ws = dataset.make_windows(bundle, t=t)
            assert ws.n_windows == n - t + 1
            # target of window k must be output row k+t-1 (the oracle index)
            npt.assert_array_equal(ws.y[:, 0], np.arange(t - 1, n, dtype=np.float64))


def test_criterion_6_linear_recovery_both_settings():
    with criterion(6, "closed-form fit reaches r >= 0.999, NRMSE <= 0.01 (SE and SN)"):
        start = time.perf_counter()
        spec = synth.SynthSpec(
            task="linear", subjects=5, trials_per_subject=3, frames_per_trial=300,
            f_in=12, f_out=4, noise_sd=0.0, seed=66,
        )
        bundles, _ = synth.gen_linear_task(spec)
        for setting in ("se", "sn"):
            if setting == "se":
                plan = protocol.split_subject_exposed(bundles, RngStream(6))
            else:
                plan = protocol.split_subject_naive(bundles, RngStream(6))
            fit_ids = sorted({i for train, val in plan.folds for i in train + val})
            fit = protocol._bundles_for_ids(plan, bundles, fit_ids)
            model = optim.fit_linear(protocol.assemble_frames(fit))
            report = protocol.evaluate_final(
                model, protocol.test_bundles(plan, bundles), plan
            )
            agg = report.aggregates["joint_angles"]
            assert agg["r"].min >= 0.999, f"{setting}: r_min={agg['r'].min}"
            assert agg["nrmse"].max <= 0.01, f"{setting}: nrmse_max={agg['nrmse'].max}"
        assert time.perf_counter() - start < 10.0


def test_criterion_7_temporal_advantage_of_rnn():
    with criterion(7, "best smoke-grid RNN beats linear NRMSE by >= 30% (SN)"):
        start = time.perf_counter()
        spec = synth.SynthSpec(
            task="temporal", subjects=5, trials_per_subject=3, frames_per_trial=300,
            f_in=8, f_out=3, noise_sd=0.05, seed=77,
        )
        bundles, _ = synth.gen_temporal_task(spec, lag=5, window=10)
        plan = protocol.split_subject_naive(bundles, RngStream(7))
        grid = protocol.smoke_grid("rnn")
        assert grid.size == 12
        result = protocol.run_search(
            grid, "rnn", plan, bundles, window=10, jobs=4, seed=7
        )
        rnn_report = protocol.evaluate_final(
            result.model, protocol.test_bundles(plan, bundles), plan
        )
        rnn_nrmse = rnn_report.aggregates["joint_angles"]["nrmse"].mean

        fit_ids = sorted({i for train, val in plan.folds for i in train + val})
        fit = protocol._bundles_for_ids(plan, bundles, fit_ids)
        linear_model = optim.fit_linear(protocol.assemble_frames(fit))
        linear_report = protocol.evaluate_final(
            linear_model, protocol.test_bundles(plan, bundles), plan
        )
        linear_nrmse = linear_report.aggregates["joint_angles"]["nrmse"].mean

        elapsed = time.perf_counter() - start
        print(
            f"    rnn nrmse={rnn_nrmse:.3f} linear nrmse={linear_nrmse:.3f} "
            f"({elapsed:.0f}s, best={result.best_config['cell']})"
        )
        assert rnn_nrmse <= 0.7 * linear_nrmse
        assert elapsed < 300.0


def test_criterion_8_determinism_and_parallel_invariance(tmp_path):
    with criterion(8, "jobs=1 vs jobs=8 bit-identical; same-seed reruns identical"):
        spec = synth.SynthSpec(
            task="linear", subjects=5, trials_per_subject=3, frames_per_trial=60,
            f_in=3, f_out=2, noise_sd=0.05, seed=88,
        )
        bundles, _ = synth.gen_linear_task(spec)
        plan = protocol.split_subject_naive(bundles, RngStream(8))
        grid = protocol.smoke_grid("ffnn")

        def run(jobs, tag):
            return protocol.run_search(
                grid, "ffnn", plan, bundles, jobs=jobs, seed=17,
                checkpoint_path=tmp_path / f"{tag}.jsonl",
            )

        serial = run(1, "jobs1")
        wide = run(8, "jobs8")
        rerun = run(8, "jobs8_rerun")

        assert (tmp_path / "jobs1.jsonl").read_bytes() == (tmp_path / "jobs8.jsonl").read_bytes()
        assert (tmp_path / "jobs8.jsonl").read_bytes() == (tmp_path / "jobs8_rerun.jsonl").read_bytes()
        assert serial.best_index == wide.best_index == rerun.best_index
        for name in serial.model.network.params:
            npt.assert_array_equal(
                serial.model.network.params[name], wide.model.network.params[name]
            )
            npt.assert_array_equal(
                wide.model.network.params[name], rerun.model.network.params[name]
            )


def test_criterion_9_parameter_counting():
    with criterion(9, "count_params matches enumeration (100 specs); linear = 4840"):
        assert nn.count_params(
            nn.NetworkSpec(arch="linear", input_dim=483, output_dim=10)
        ) == 4840
        draws = np.random.default_rng(99)
        rng = RngStream(9)
        for _ in range(100):
            arch = str(draws.choice(["linear", "ffnn", "rnn"]))
            if arch == "linear":
                spec = nn.NetworkSpec(
                    arch="linear",
                    input_dim=int(draws.integers(1, 30)),
                    output_dim=int(draws.integers(1, 12)),
                )
            elif arch == "ffnn":
                spec = nn.NetworkSpec(
                    arch="ffnn",
                    input_dim=int(draws.integers(1, 30)),
                    output_dim=int(draws.integers(1, 12)),
                    hidden_layers=int(draws.integers(1, 5)),
                    nodes=int(draws.integers(1, 20)),
                    activation=str(draws.choice(["relu", "tanh", "sigmoid"])),
                )
            else:
                spec = nn.NetworkSpec(
                    arch="rnn",
                    input_dim=int(draws.integers(1, 12)),
                    output_dim=int(draws.integers(1, 8)),
                    hidden_layers=int(draws.integers(1, 4)),
                    nodes=int(draws.integers(1, 10)),
                    activation=str(draws.choice(["relu", "tanh", "sigmoid"])),
                    cell=str(draws.choice(["vanilla", "lstm", "gru"])),
                    bidirectional=bool(draws.integers(0, 2)),
                    window=int(draws.integers(1, 8)),
                )
            net = nn.init_network(spec, rng)
            assert nn.count_params(spec) == sum(p.size for p in net.params.values())


def test_criterion_10_cubic_resampling_of_cubic():
    with criterion(10, "not-a-knot resampling reproduces t^3 within 1e-9"):
        t = np.arange(101) / 100.0  # 1 s of samples at 100 Hz
        series = np.column_stack([t**3])
        out = cubic_resample(series, 100.0, 60.0)
        t_new = np.arange(out.shape[0]) / 60.0
        npt.assert_allclose(out[:, 0], t_new**3, atol=1e-9)
