"""Two-stage protocol: synthesize labeled MLTF datasets, train, localize.

Synthesis produces single-target images for every grid cell plus a sampled
batch of multi-target instances, then splits stratified by label pattern.
Training is plain mini-batch descent with seeded shuffling and early stopping
on validation loss. Localization thresholds the per-grid probabilities; a
nearest-fingerprint template matcher serves as the non-learning comparison.

Every random draw is keyed through SeedSequence tuples, so the whole chain
from a (spec, seed) pair to trained parameters is bit-reproducible. Tags 13+
avoid the stream keys used by the channel simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chansim import ChannelParams, simulate_batch
from .geometry import Scenario
from .metrics import micro_precision_recall_f1, set_distance_error
from .mltf import (Dataset, LocationVector, MltfImage, NormStats,
                   amplitude_dynamic, build_images, compute_norm_stats,
                   normalize)
from .nn import Network, make_optimizer

_TAG_PATTERNS = 10
_TAG_SPLIT = 11
_TAG_SHUFFLE = 12
_TAG_CAPTURE = 13
_TAG_EVAL_CAPTURE = 14
_TAG_EVAL_PATTERNS = 15


class InsufficientCombinations(ValueError):
    """The requested multi-target patterns cannot be drawn from this grid."""


class EmptyDataset(ValueError):
    """A split that the operation needs contains no images."""


class MissingGridTemplates(ValueError):
    """Baseline templates require single-target training images for every grid."""


def _stream(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(key))


def _packet_seed(*key: int) -> int:
    # one noise stream per capture session; mixing through SeedSequence keeps
    # sessions distinct without coordinating counter ranges across call sites
    return int(np.random.SeedSequence(key).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class DatasetSpec:
    """Everything needed to synthesize one dataset deterministically."""

    scenario: Scenario
    channel: ChannelParams
    images_per_location: int = 60
    window: int = 30
    multi_label_fraction: float = 0.2
    max_targets_in_training: int = 3
    split_ratio: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0

    def __post_init__(self):
        if self.images_per_location < 1:
            raise ValueError("images_per_location must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not 0.0 <= self.multi_label_fraction <= 1.0:
            raise ValueError(
                f"multi_label_fraction must be in [0, 1], got {self.multi_label_fraction}")
        if len(self.split_ratio) != 3 or any(r <= 0 for r in self.split_ratio):
            raise ValueError(f"split ratios must be three positive numbers, got {self.split_ratio}")
        if abs(sum(self.split_ratio) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1, got {self.split_ratio}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def _capture_images(scenario: Scenario, channel: ChannelParams, targets: tuple[int, ...],
                    n_images: int, window: int, packet_seed: int) -> list[MltfImage]:
    """One capture session: simulate every link, difference, cut into windows."""
    dynamics = []
    for link in range(scenario.n_links):
        batch = simulate_batch(channel, scenario, link, targets,
                               n_images * window, packet_seed)
        dynamics.append(amplitude_dynamic(batch).astype(np.float32))
    label = LocationVector.from_grids(scenario.n_grids, targets)
    return build_images(dynamics, label, window)


def _draw_multi_patterns(spec: DatasetSpec, n_multi: int) -> list[tuple[int, ...]]:
    n = spec.scenario.n_grids
    if spec.max_targets_in_training < 2:
        raise InsufficientCombinations(
            f"multi-target instances need max_targets_in_training >= 2, "
            f"got {spec.max_targets_in_training}")
    if spec.max_targets_in_training > n:
        raise InsufficientCombinations(
            f"cannot place {spec.max_targets_in_training} distinct targets in {n} grids")
    rng = _stream(spec.seed, _TAG_PATTERNS)
    patterns = []
    for _ in range(n_multi):
        k = int(rng.integers(2, spec.max_targets_in_training + 1))
        grids = tuple(sorted(int(g) for g in rng.choice(n, size=k, replace=False)))
        patterns.append(grids)
    return patterns


def _stratified_split(images: list[MltfImage], ratios: tuple[float, float, float],
                      seed: int) -> tuple[list[MltfImage], list[MltfImage], list[MltfImage]]:
    """Split each label-pattern group at the given ratio, counts rounded."""
    groups: dict[tuple[int, ...], list[MltfImage]] = {}
    for im in images:
        groups.setdefault(im.label.bits, []).append(im)
    train: list[MltfImage] = []
    val: list[MltfImage] = []
    test: list[MltfImage] = []
    for bits in sorted(groups):
        members = groups[bits]
        order = _stream(seed, _TAG_SPLIT, *bits).permutation(len(members))
        n = len(members)
        n_train = min(round(ratios[0] * n), n)
        n_val = min(round(ratios[1] * n), n - n_train)
        train.extend(members[i] for i in order[:n_train])
        val.extend(members[i] for i in order[n_train:n_train + n_val])
        test.extend(members[i] for i in order[n_train + n_val:])
    return train, val, test


def synthesize_dataset(spec: DatasetSpec) -> Dataset:
    """Generate, label, and split the full image set for one scenario.

    Every grid gets images_per_location single-target images. On top of that,
    ceil(multi_label_fraction * single total) multi-target instances are
    drawn: per instance, a target count K uniform in
    [2, max_targets_in_training], then K distinct grids uniform without
    replacement. Patterns may repeat across instances; each instance is a
    fresh capture with its own noise stream.
    """
    scenario, channel = spec.scenario, spec.channel
    captures: list[tuple[tuple[int, ...], int]] = [
        ((g,), spec.images_per_location) for g in range(scenario.n_grids)
    ]
    n_single = scenario.n_grids * spec.images_per_location
    n_multi = math.ceil(spec.multi_label_fraction * n_single)
    if n_multi > 0:
        captures.extend((pattern, 1) for pattern in _draw_multi_patterns(spec, n_multi))

    images: list[MltfImage] = []
    for index, (targets, n_images) in enumerate(captures):
        images.extend(_capture_images(
            scenario, channel, targets, n_images, spec.window,
            _packet_seed(spec.seed, _TAG_CAPTURE, index)))

    train, val, test = _stratified_split(images, spec.split_ratio, spec.seed)
    return Dataset(train=train, val=val, test=test, window=spec.window,
                   d=channel.d, n_links=scenario.n_links,
                   n_grids=scenario.n_grids, seed=spec.seed)


def synthesize_eval_images(scenario: Scenario, channel: ChannelParams, n_targets: int,
                           n_images: int, window: int, seed: int) -> list[MltfImage]:
    """Fresh capture sessions with exactly n_targets occupants each.

    Noise streams are keyed apart from any training dataset, so these images
    never collide with training content even under the same seed.
    """
    if not 1 <= n_targets <= scenario.n_grids:
        raise InsufficientCombinations(
            f"cannot place {n_targets} distinct targets in {scenario.n_grids} grids")
    rng = _stream(seed, _TAG_EVAL_PATTERNS, n_targets)
    images = []
    for j in range(n_images):
        grids = tuple(sorted(int(g) for g in
                             rng.choice(scenario.n_grids, size=n_targets, replace=False)))
        images.extend(_capture_images(
            scenario, channel, grids, 1, window,
            _packet_seed(seed, _TAG_EVAL_CAPTURE, n_targets, j)))
    return images


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 200
    optimizer: str = "adam"
    learning_rate: float = 0.001
    early_stop_patience: int = 30
    threshold: float = 0.5

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_f1_micro: float


@dataclass
class TrainResult:
    net: Network
    log: list[EpochRecord]
    norm_stats: NormStats
    best_epoch: int
    best_val_loss: float
    optimizer: object = None


def _stack(images: list[MltfImage]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([im.tensor for im in images])
    y = np.stack([im.label.array() for im in images])
    return x, y


def _forward_chunks(net: Network, x: np.ndarray, batch_size: int) -> np.ndarray:
    parts = [net.forward(x[i:i + batch_size]) for i in range(0, len(x), batch_size)]
    return np.concatenate(parts)


def _loss_and_probs(net: Network, x: np.ndarray, y: np.ndarray,
                    batch_size: int) -> tuple[float, np.ndarray]:
    total = 0.0
    parts = []
    for i in range(0, len(x), batch_size):
        value, probs = net.loss(x[i:i + batch_size], y[i:i + batch_size], train=False)
        total += value * len(probs)
        parts.append(probs)
    return total / len(x), np.concatenate(parts)


def train(dataset: Dataset, net: Network, cfg: TrainConfig) -> TrainResult:
    """Mini-batch training with early stopping on validation loss.

    Inputs are standardized per link channel using training-split statistics
    only. Epoch shuffles are keyed by (net seed, epoch) and dropout masks by
    the global step, so identical seeds give bit-identical parameters. The
    returned network carries the parameters of the best validation epoch.
    """
    if not dataset.train:
        raise EmptyDataset("training split is empty")
    if cfg.max_epochs > 0 and not dataset.val:
        raise EmptyDataset("validation split is empty but early stopping needs it")

    stats = compute_norm_stats(dataset.train)
    x_train, y_train = _stack(normalize(dataset.train, stats))
    log: list[EpochRecord] = []
    best_state = net.get_state()
    best_val = math.inf
    best_epoch = -1
    optimizer = None
    if cfg.max_epochs > 0:
        x_val, y_val = _stack(normalize(dataset.val, stats))
        y_val_int = y_val.astype(np.int64)
        optimizer = make_optimizer(cfg.optimizer, cfg.learning_rate)
        since_best = 0
        step = 0
        for epoch in range(cfg.max_epochs):
            perm = _stream(net.seed, _TAG_SHUFFLE, epoch).permutation(len(x_train))
            running = 0.0
            for i in range(0, len(perm), cfg.batch_size):
                idx = perm[i:i + cfg.batch_size]
                value, _ = net.loss_and_grads(x_train[idx], y_train[idx], mask_seed=step)
                optimizer.step(net.params(), net.grads())
                running += value * len(idx)
                step += 1
            val_loss, val_probs = _loss_and_probs(net, x_val, y_val, cfg.batch_size)
            val_pred = (val_probs > cfg.threshold).astype(np.int64)
            _, _, val_f1 = micro_precision_recall_f1(val_pred, y_val_int)
            log.append(EpochRecord(epoch=epoch, train_loss=running / len(x_train),
                                   val_loss=val_loss, val_f1_micro=val_f1))
            if val_loss < best_val:
                best_val = val_loss
                best_epoch = epoch
                best_state = net.get_state()
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.early_stop_patience:
                    break
    net.set_state(best_state)
    return TrainResult(net=net, log=log, norm_stats=stats,
                       best_epoch=best_epoch, best_val_loss=best_val,
                       optimizer=optimizer)


def localize(net: Network, image: MltfImage, threshold: float,
             stats: NormStats | None = None) -> tuple[LocationVector, np.ndarray]:
    """Threshold the per-grid probabilities for one image.

    A bit is set only when its probability strictly exceeds the threshold, so
    exact ties resolve to absence and the predicted count may be zero. Pass
    the training-split stats to standardize the image the way training did.
    """
    tensor = image.tensor if stats is None else normalize([image], stats)[0].tensor
    probs = net.forward(tensor[np.newaxis])[0]
    bits = tuple(int(p > threshold) for p in probs)
    return LocationVector(bits), probs


def predict_bits(net: Network, images: list[MltfImage], threshold: float,
                 stats: NormStats | None = None, batch_size: int = 64) -> np.ndarray:
    """Thresholded predictions for a batch of images, as a (P, N) 0/1 matrix."""
    if not images:
        raise EmptyDataset("no images to predict")
    stack = normalize(images, stats) if stats is not None else list(images)
    x, _ = _stack(stack)
    probs = _forward_chunks(net, x, batch_size)
    return (probs > threshold).astype(np.int64)


def predict_top_k(probs: np.ndarray, k: int) -> np.ndarray:
    """Binary vector marking the k highest-probability grids (stable ties)."""
    out = np.zeros(probs.shape[-1], dtype=np.int64)
    if k > 0:
        order = np.argsort(-probs, kind="stable")[:k]
        out[order] = 1
    return out


@dataclass
class EvalResult:
    """Test-split scores; distance errors are also kept per instance for CDFs."""

    n_images: int
    precision_micro: float
    recall_micro: float
    f1_micro: float
    hamming_loss: float
    exact_match: float
    mde_thresholded: float
    mde_known_k: float
    errors_thresholded: list[float] = field(repr=False, default_factory=list)
    errors_known_k: list[float] = field(repr=False, default_factory=list)


def evaluate(net: Network, images: list[MltfImage], stats: NormStats,
             threshold: float, scenario: Scenario,
             batch_size: int = 64) -> EvalResult:
    """Score a network on labeled images.

    Reports both distance-error variants: thresholded (cardinality inferred
    from the probabilities, the network's native protocol) and known-K (the
    true target count selects the top-K grids).
    """
    from .metrics import exact_match_ratio, hamming_loss

    if not images:
        raise EmptyDataset("no images to evaluate")
    x, y = _stack(normalize(images, stats))
    probs = _forward_chunks(net, x, batch_size)
    y_int = y.astype(np.int64)
    pred_thr = (probs > threshold).astype(np.int64)

    precision, recall, f1 = micro_precision_recall_f1(pred_thr, y_int)
    errors_thr = []
    errors_known = []
    for row_probs, row_pred, row_true in zip(probs, pred_thr, y_int):
        true_set = set(np.flatnonzero(row_true).tolist())
        pred_set = set(np.flatnonzero(row_pred).tolist())
        errors_thr.append(set_distance_error(pred_set, true_set, scenario))
        top_k = predict_top_k(row_probs, len(true_set))
        errors_known.append(set_distance_error(
            set(np.flatnonzero(top_k).tolist()), true_set, scenario))
    return EvalResult(
        n_images=len(images),
        precision_micro=precision,
        recall_micro=recall,
        f1_micro=f1,
        hamming_loss=hamming_loss(pred_thr, y_int),
        exact_match=exact_match_ratio(pred_thr, y_int),
        mde_thresholded=float(np.mean(errors_thr)),
        mde_known_k=float(np.mean(errors_known)),
        errors_thresholded=errors_thr,
        errors_known_k=errors_known,
    )


def compute_grid_templates(train_images: list[MltfImage], n_grids: int) -> np.ndarray:
    """Per-grid mean dynamic signature over time, shape (N, d, M).

    Only single-target images contribute. Raises MissingGridTemplates when
    any grid has none.
    """
    sums: dict[int, np.ndarray] = {}
    counts: dict[int, int] = {}
    for im in train_images:
        if im.label.k != 1:
            continue
        grid = im.label.grids()[0]
        signature = im.tensor.mean(axis=0, dtype=np.float64)
        if grid in sums:
            sums[grid] += signature
            counts[grid] += 1
        else:
            sums[grid] = signature.copy()
            counts[grid] = 1
    missing = [g for g in range(n_grids) if g not in sums]
    if missing:
        raise MissingGridTemplates(f"no single-target training images for grids {missing}")
    return np.stack([sums[g] / counts[g] for g in range(n_grids)])


def _correlation(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = float(np.linalg.norm(a) * np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(a @ b) / denom


def nearest_fingerprint_baseline(train_images: list[MltfImage], test_image: MltfImage,
                                 k_known: int,
                                 templates: np.ndarray | None = None) -> LocationVector:
    """Template matcher: top-K grids by correlation of time-mean signatures.

    Unlike the network path, this receives the true target count, because
    template correlation has no principled cardinality rule. Pass the
    precomputed templates when scoring many images.
    """
    n_grids = len(test_image.label)
    if templates is None:
        templates = compute_grid_templates(train_images, n_grids)
    signature = test_image.tensor.mean(axis=0, dtype=np.float64).ravel()
    scores = np.array([_correlation(signature, templates[g].ravel())
                       for g in range(n_grids)])
    order = np.argsort(-scores, kind="stable")[:k_known]
    return LocationVector.from_grids(n_grids, (int(g) for g in order))


def evaluate_baseline(train_images: list[MltfImage], test_images: list[MltfImage],
                      scenario: Scenario) -> tuple[float, list[float]]:
    """Known-K distance error of the template matcher over a test set."""
    if not test_images:
        raise EmptyDataset("no images to evaluate")
    templates = compute_grid_templates(train_images, scenario.n_grids)
    errors = []
    for im in test_images:
        pred = nearest_fingerprint_baseline(train_images, im, im.label.k,
                                            templates=templates)
        errors.append(set_distance_error(set(pred.grids()), set(im.label.grids()),
                                         scenario))
    return float(np.mean(errors)), errors
