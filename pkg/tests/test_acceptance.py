"""Acceptance runs: one test per shipping criterion.

Each test prints a single [PASS]/[FAIL] line directly to the terminal with
the measured quantity, its bound, and the wall time. The heavy end-to-end
criteria (single-target accuracy, multi-target generalization, error trends,
sweep determinism) run real desk-scale trainings and take minutes each.
"""

import itertools
import math
import time

import numpy as np
from numba import njit

from csiloc.chansim import ChannelParams, simulate_batch
from csiloc.config import build_config
from csiloc.experiments import run_experiment
from csiloc.geometry import build_scenario, grid_center
from csiloc.metrics import (confusion_counts, hamming_loss,
                            mean_distance_error, micro_precision_recall_f1,
                            set_distance_error)
from csiloc.mltf import amplitude_dynamic, load_dataset, save_dataset
from csiloc.nn import (Adam, Conv2D, Dense, Flatten, Network, ReLU, Sigmoid,
                       bce_loss, gradient_check, load_checkpoint,
                       make_classifier, save_checkpoint)
from csiloc.pipeline import (DatasetSpec, TrainConfig, evaluate,
                             synthesize_dataset, synthesize_eval_images,
                             train)

DESK = build_scenario(3.0, 3.0, 1.0, 4)


def _verdict(capsys, ok: bool, line: str) -> None:
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {line}", flush=True)
    assert ok, line


def test_01_backprop_matches_finite_differences(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence((0, 1)))
    net = Network([
        Conv2D(2, 2, 3, rng=rng, dtype=np.float64),
        ReLU(),
        Flatten(),
        Dense(8 * 8 * 2, 3, rng=rng, dtype=np.float64),
        Sigmoid(),
    ], dtype=np.float64)
    x = rng.standard_normal((2, 8, 8, 2))
    y = (rng.random((2, 3)) < 0.5).astype(np.float64)
    report = gradient_check(net, x, y, step=1e-5, tol=1e-4)
    dt = time.perf_counter() - t0
    ok = report.passed and report.n_checked == net.n_params() and dt < 30
    _verdict(capsys, ok,
             f"gradient check: max rel err {report.max_rel_error:.2e} over "
             f"{report.n_checked} params (tol 1e-4), {dt:.1f}s")


@njit
def _conv_naive(x, kernels, bias):
    n, h, w, cin = x.shape
    k = kernels.shape[0]
    cout = kernels.shape[3]
    pad = k // 2
    out = np.zeros((n, h, w, cout), dtype=np.float64)
    for s in range(n):
        for i in range(h):
            for j in range(w):
                for co in range(cout):
                    acc = bias[co]
                    for u in range(k):
                        for v in range(k):
                            ii = i + u - pad
                            jj = j + v - pad
                            if 0 <= ii < h and 0 <= jj < w:
                                for ci in range(cin):
                                    acc += x[s, ii, jj, ci] * kernels[u, v, ci, co]
                    out[s, i, j, co] = acc
    return out


def test_02_convolution_against_naive_loops(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence((2, 0)))
    cases = [(1, 90, 90, 9, 16, 5)]
    while len(cases) < 50:
        cases.append((int(rng.integers(1, 3)), int(rng.integers(3, 13)),
                      int(rng.integers(3, 13)), int(rng.integers(1, 5)),
                      int(rng.integers(1, 6)), int(rng.choice([1, 3, 5]))))
    worst = 0.0
    for n, h, w, cin, cout, k in cases:
        layer = Conv2D(cin, cout, k, rng=rng, dtype=np.float64)
        layer.bias[:] = rng.standard_normal(cout)
        x = rng.standard_normal((n, h, w, cin))
        got = layer.forward(x)
        want = _conv_naive(x, layer.kernels, layer.bias)
        rel = float(np.abs(got - want).max() / max(np.abs(want).max(), 1e-30))
        worst = max(worst, rel)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-5 and dt < 60
    _verdict(capsys, ok,
             f"im2col conv vs six-loop reference: worst rel err {worst:.2e} "
             f"over {len(cases)} cases (tol 1e-5), {dt:.1f}s")


def test_03_loss_closed_forms(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    truth = (rng.random((16, 9)) < 0.5).astype(np.float64)
    err_half = abs(bce_loss(np.full_like(truth, 0.5), truth) - math.log(2.0))
    loss_perfect = bce_loss(truth.copy(), truth)
    dt = time.perf_counter() - t0
    ok = err_half <= 1e-9 and loss_perfect <= 1e-6 and dt < 1
    _verdict(capsys, ok,
             f"cross-entropy closed forms: |loss(0.5) - ln 2| = {err_half:.1e} "
             f"(tol 1e-9), loss(perfect) = {loss_perfect:.1e} (tol 1e-6), {dt:.2f}s")


def _brute_counts(pred, truth):
    tp = fp = fn = tn = 0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            if pred[i, j] == 1 and truth[i, j] == 1:
                tp += 1
            elif pred[i, j] == 1:
                fp += 1
            elif truth[i, j] == 1:
                fn += 1
            else:
                tn += 1
    return tp, fp, fn, tn


def _permutation_min(pred_set, true_set, scenario):
    pad = scenario.diagonal
    size = max(len(pred_set), len(true_set))
    if size == 0:
        return 0.0
    preds = sorted(pred_set) + [None] * (size - len(pred_set))
    trues = sorted(true_set) + [None] * (size - len(true_set))
    best = math.inf
    for perm in itertools.permutations(range(size)):
        total = 0.0
        for i, j in enumerate(perm):
            if preds[i] is None or trues[j] is None:
                total += pad
            else:
                total += math.dist(grid_center(scenario, preds[i]),
                                   grid_center(scenario, trues[j]))
        best = min(best, total)
    return best / size


def test_04_metrics_against_brute_force(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    score_exact = True
    for _ in range(1000):
        shape = (int(rng.integers(1, 7)), int(rng.integers(1, 11)))
        pred = rng.integers(0, 2, size=shape)
        truth = rng.integers(0, 2, size=shape)
        tp, fp, fn, tn = _brute_counts(pred, truth)
        want_f1 = 1.0 if 2 * tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn)
        _, _, f1 = micro_precision_recall_f1(pred, truth)
        score_exact &= (confusion_counts(pred, truth) == (tp, fp, fn, tn))
        score_exact &= (f1 == want_f1)
        score_exact &= (hamming_loss(pred, truth) == (fp + fn) / (tp + fp + fn + tn))

    scen = build_scenario(4.0, 5.0, 1.0, 3)
    mde_dev = 0.0
    for _ in range(200):
        pred = set(rng.choice(scen.n_grids, size=int(rng.integers(0, 7)),
                              replace=False).tolist())
        true = set(rng.choice(scen.n_grids, size=int(rng.integers(0, 7)),
                              replace=False).tolist())
        got = set_distance_error(pred, true, scen)
        mde_dev = max(mde_dev, abs(got - _permutation_min(pred, true, scen)))
    dt = time.perf_counter() - t0
    ok = score_exact and mde_dev <= 1e-12 and dt < 30
    _verdict(capsys, ok,
             f"metrics vs brute force: F1/hamming exact on 1000 matrices "
             f"({score_exact}), assignment vs permutation min dev {mde_dev:.1e} "
             f"on 200 instances, {dt:.1f}s")


def test_05_ambient_subtraction_cancels_baseline(capsys):
    t0 = time.perf_counter()
    reference = None
    worst = 0.0
    for taps in range(1, 21):
        params = ChannelParams(baseline_taps=taps, noise_std=0.0, seed=3)
        batch = simulate_batch(params, DESK, link=1, targets=(2, 5),
                               n_packets=6, packet_seed=11)
        dyn = amplitude_dynamic(batch)
        if reference is None:
            reference = dyn
        else:
            worst = max(worst, float(np.abs(dyn - reference).max()))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 10
    _verdict(capsys, ok,
             f"noiseless dynamic invariant across 20 baseline draws: "
             f"max dev {worst:.1e} dB (tol 1e-9), {dt:.1f}s")


def test_06_single_target_desk_localization(capsys):
    t0 = time.perf_counter()
    channel = ChannelParams(seed=0)
    spec = DatasetSpec(scenario=DESK, channel=channel, images_per_location=60,
                       window=30, multi_label_fraction=0.0, seed=0)
    ds = synthesize_dataset(spec)
    net = make_classifier((30, 30, 4), DESK.n_grids, seed=0)
    result = train(ds, net, TrainConfig())
    ev = evaluate(result.net, ds.test, result.norm_stats, 0.5, DESK)
    dt = time.perf_counter() - t0
    ok = ev.exact_match >= 0.95 and ev.f1_micro >= 0.97 and dt < 300
    _verdict(capsys, ok,
             f"single-target desk run: exact-match {ev.exact_match:.3f} "
             f"(>= 0.95), micro-F1 {ev.f1_micro:.3f} (>= 0.97), "
             f"{len(result.log)} epochs, {dt:.0f}s")


def test_07_pairs_only_training_generalizes(capsys):
    t0 = time.perf_counter()
    channel = ChannelParams(seed=0)
    spec = DatasetSpec(scenario=DESK, channel=channel, images_per_location=60,
                       window=30, multi_label_fraction=0.2,
                       max_targets_in_training=2, seed=0)
    ds = synthesize_dataset(spec)
    net = make_classifier((30, 30, 4), DESK.n_grids, seed=0)
    result = train(ds, net, TrainConfig())
    held_out = (synthesize_eval_images(DESK, channel, 2, 60, 30, seed=1)
                + synthesize_eval_images(DESK, channel, 3, 60, 30, seed=1))
    ev = evaluate(result.net, held_out, result.norm_stats, 0.5, DESK)
    dt = time.perf_counter() - t0
    ok = ev.f1_micro >= 0.85 and ev.mde_known_k <= 0.5 and dt < 600
    _verdict(capsys, ok,
             f"pairs-only training on fresh 2- and 3-target images: "
             f"micro-F1 {ev.f1_micro:.3f} (>= 0.85), known-K error "
             f"{ev.mde_known_k:.3f} m (<= 0.5), {dt:.0f}s")


def test_08_error_trends_over_targets_and_links(capsys):
    t0 = time.perf_counter()
    m_curves, k_curves = [], []
    for seed in range(1, 6):
        channel = ChannelParams(noise_std=3.0, seed=seed)
        nets = {}
        for m in (2, 4, 6):
            scen = build_scenario(3.0, 3.0, 1.0, m)
            spec = DatasetSpec(scenario=scen, channel=channel,
                               images_per_location=40, window=30,
                               multi_label_fraction=0.2,
                               max_targets_in_training=3, seed=seed)
            ds = synthesize_dataset(spec)
            net = make_classifier((30, 30, m), scen.n_grids, n_kernels=16,
                                  hidden_units=96, dropout_rate=0.6, seed=seed)
            cfg = TrainConfig(batch_size=32, max_epochs=50,
                              learning_rate=0.001, early_stop_patience=12)
            nets[m] = (train(ds, net, cfg), scen)
        m_curves.append([
            evaluate(nets[m][0].net,
                     synthesize_eval_images(nets[m][1], channel, 2, 80, 30,
                                            seed=seed + 1000),
                     nets[m][0].norm_stats, 0.5, nets[m][1]).mde_known_k
            for m in (2, 4, 6)])
        result, scen = nets[4]
        k_curves.append([
            evaluate(result.net,
                     synthesize_eval_images(scen, channel, k, 80, 30,
                                            seed=seed + 2000),
                     result.norm_stats, 0.5, scen).mde_known_k
            for k in (1, 2, 3, 4)])
    m_avg = np.mean(m_curves, axis=0)
    k_avg = np.mean(k_curves, axis=0)
    m_ok = all(m_avg[i] >= m_avg[i + 1] for i in range(2))
    k_ok = all(k_avg[i] <= k_avg[i + 1] for i in range(3))
    dt = time.perf_counter() - t0
    ok = m_ok and k_ok and dt < 1800
    _verdict(capsys, ok,
             f"5-seed known-K error trends: links 2/4/6 -> "
             f"{np.round(m_avg, 3).tolist()} m nonincreasing ({m_ok}), "
             f"targets 1..4 -> {np.round(k_avg, 3).tolist()} m "
             f"nondecreasing ({k_ok}), {dt:.0f}s")


def test_09_sweep_rerun_is_byte_identical(capsys, tmp_path):
    t0 = time.perf_counter()
    cfg = build_config(None, desk_scale=True, seed=0)
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    same_csv = ((tmp_path / "a" / "results.csv").read_bytes()
                == (tmp_path / "b" / "results.csv").read_bytes())
    same_ckpt = ((tmp_path / "a" / "point_0_default" / "checkpoint.ckpt").read_bytes()
                 == (tmp_path / "b" / "point_0_default" / "checkpoint.ckpt").read_bytes())
    dt = time.perf_counter() - t0
    ok = same_csv and same_ckpt and dt < 600
    _verdict(capsys, ok,
             f"repeated sweep point: results.csv identical ({same_csv}), "
             f"checkpoint identical ({same_ckpt}), {dt:.0f}s")


def test_10_serialization_round_trips(capsys, tmp_path):
    t0 = time.perf_counter()
    tiny = build_scenario(2.0, 1.0, 1.0, 1)
    stable = 0
    for i in range(10):
        channel = ChannelParams(n_subcarriers_per_pair=2, n_antenna_pairs=1,
                                baseline_taps=2, noise_std=0.5, seed=i)
        spec = DatasetSpec(scenario=tiny, channel=channel,
                           images_per_location=3 + i % 3, window=2,
                           multi_label_fraction=0.5,
                           max_targets_in_training=2, seed=i)
        ds = synthesize_dataset(spec)
        first = tmp_path / f"ds_{i}_a"
        second = tmp_path / f"ds_{i}_b"
        save_dataset(ds, first)
        save_dataset(load_dataset(first), second)
        stable += all((first / name).read_bytes() == (second / name).read_bytes()
                      for name in ("manifest.txt", "records.bin"))

    rng = np.random.default_rng(10)
    for i in range(10):
        in_ch = 1 + i % 2
        net = make_classifier((4, 4, in_ch), 2 + i % 3, n_conv_layers=1,
                              n_kernels=1 + i % 3, kernel_size=3,
                              hidden_units=2 + i % 4, dropout_rate=0.5, seed=i)
        opt = None
        if i % 2:
            opt = Adam(learning_rate=0.01)
            x = rng.normal(size=(2, 4, 4, in_ch)).astype(np.float32)
            y = (rng.random((2, 2 + i % 3)) < 0.5).astype(np.float32)
            net.loss_and_grads(x, y)
            opt.step(net.params(), net.grads())
        first = tmp_path / f"net_{i}_a.ckpt"
        second = tmp_path / f"net_{i}_b.ckpt"
        save_checkpoint(net, first, optimizer=opt)
        loaded_net, loaded_opt = load_checkpoint(first)
        save_checkpoint(loaded_net, second, optimizer=loaded_opt)
        stable += first.read_bytes() == second.read_bytes()
    dt = time.perf_counter() - t0
    ok = stable == 20 and dt < 30
    _verdict(capsys, ok,
             f"write/read/write byte-stability: {stable}/20 instances "
             f"(10 datasets, 10 checkpoints), {dt:.1f}s")
