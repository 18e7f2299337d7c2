"""Desk-scale detector stand-in: synthetic data, a linear two-head model,
multi-task loss, Adagrad, and the training loop with uncertainty feedback.

The model is one affine layer per head (classification and box regression).
The conflict-feedback mechanism operates on losses and softmax outputs, so
backbone depth is irrelevant here and a linear model keeps every gradient
hand-checkable while runs finish in seconds.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    DimensionMismatchError,
    EmptyValidationSetError,
    InvalidConfigError,
)
from .evidence import Frame, combine_pair, mass_from_ground_truth, mass_from_softmax
from .injection import (
    InjectionConfig,
    LossBreakdown,
    UncertaintyState,
    Where,
    injection_factor,
    record_epoch_uncertainty,
)
from .metrics import (
    Box,
    Detection,
    GroundTruth,
    average_precision,
    match_detections,
    mean_average_precision,
    performance_score,
)
from .report import EpochRow, ExperimentReport

ADAGRAD_EPS = 1e-10
SMOOTH_L1_DELTA = 1.0


@dataclass(frozen=True)
class SyntheticDatasetConfig:
    """Parameters of the synthetic detection dataset.

    ``class_separation`` is the mean pairwise distance between class centroids
    in feature space; feature noise is unit Gaussian, so separation directly
    controls task difficulty. The same seed always yields the same dataset.
    """

    num_classes: int = 4
    instances_per_split: tuple[int, int, int] = (800, 200, 200)
    feature_dim: int = 16
    class_separation: float = 12.0
    box_noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise InvalidConfigError("num_classes must be >= 2")
        if len(self.instances_per_split) != 3 or any(
            n < 1 for n in self.instances_per_split
        ):
            raise InvalidConfigError("all three split sizes must be positive")
        if self.feature_dim < 1:
            raise InvalidConfigError("feature_dim must be positive")
        if self.class_separation < 0 or self.box_noise < 0:
            raise InvalidConfigError("class_separation and box_noise must be >= 0")


@dataclass(frozen=True)
class Instance:
    """One labeled detection: features, class index, normalized box."""

    features: np.ndarray
    gt_label: int
    gt_box: np.ndarray  # (x_min, y_min, x_max, y_max) in [0, 1]


@dataclass(frozen=True)
class Dataset:
    config: SyntheticDatasetConfig
    train: tuple[Instance, ...]
    validation: tuple[Instance, ...]
    test: tuple[Instance, ...]

    @property
    def frame(self) -> Frame:
        return Frame(range(self.config.num_classes))


def _class_boxes(centroids: np.ndarray) -> np.ndarray:
    """Deterministic base box per class, squashed from its centroid."""
    num_classes, dim = centroids.shape
    boxes = np.empty((num_classes, 4))
    for c in range(num_classes):
        cen = centroids[c]
        cx = 0.5 + 0.35 * math.tanh(cen[0 % dim])
        cy = 0.5 + 0.35 * math.tanh(cen[1 % dim])
        w = 0.18 + 0.12 * abs(math.tanh(cen[2 % dim]))
        h = 0.18 + 0.12 * abs(math.tanh(cen[3 % dim]))
        boxes[c] = (cx, cy, w, h)  # center/size form; corners built per instance
    return boxes


def _make_split(
    rng: np.random.Generator,
    n: int,
    centroids: np.ndarray,
    base_boxes: np.ndarray,
    box_noise: float,
) -> tuple[Instance, ...]:
    num_classes, dim = centroids.shape
    labels = rng.integers(0, num_classes, size=n)
    features = centroids[labels] + rng.normal(size=(n, dim))
    jitter = rng.normal(size=(n, 4))
    out = []
    for i in range(n):
        cx, cy, w, h = base_boxes[labels[i]]
        cx = cx + box_noise * jitter[i, 0]
        cy = cy + box_noise * jitter[i, 1]
        w = min(max(w * (1.0 + box_noise * jitter[i, 2]), 0.04), 0.96)
        h = min(max(h * (1.0 + box_noise * jitter[i, 3]), 0.04), 0.96)
        cx = min(max(cx, w / 2), 1.0 - w / 2)
        cy = min(max(cy, h / 2), 1.0 - h / 2)
        box = np.array([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2])
        box.setflags(write=False)
        feat = features[i].copy()
        feat.setflags(write=False)
        out.append(Instance(feat, int(labels[i]), box))
    return tuple(out)


def generate_dataset(config: SyntheticDatasetConfig) -> Dataset:
    """Build the three splits; identical config implies identical data."""
    rng = np.random.default_rng(config.seed)
    raw = rng.normal(size=(config.num_classes, config.feature_dim))
    diffs = raw[:, None, :] - raw[None, :, :]
    dists = np.sqrt((diffs**2).sum(axis=2))
    mean_dist = dists[np.triu_indices(config.num_classes, k=1)].mean()
    centroids = raw * (config.class_separation / mean_dist) if mean_dist > 0 else raw * 0.0
    base_boxes = _class_boxes(centroids)
    splits = [
        _make_split(rng, n, centroids, base_boxes, config.box_noise)
        for n in config.instances_per_split
    ]
    return Dataset(config, *splits)


@dataclass
class Model:
    """Linear two-head model with per-parameter Adagrad accumulators."""

    class_w: np.ndarray
    class_b: np.ndarray
    box_w: np.ndarray
    box_b: np.ndarray
    acc_class_w: np.ndarray = field(repr=False, default=None)
    acc_class_b: np.ndarray = field(repr=False, default=None)
    acc_box_w: np.ndarray = field(repr=False, default=None)
    acc_box_b: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        for name in ("class_w", "class_b", "box_w", "box_b"):
            acc_name = f"acc_{name}"
            if getattr(self, acc_name) is None:
                setattr(self, acc_name, np.zeros_like(getattr(self, name)))

    @property
    def num_classes(self) -> int:
        return self.class_w.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.class_w.shape[1]

    def copy(self) -> "Model":
        return Model(
            self.class_w.copy(),
            self.class_b.copy(),
            self.box_w.copy(),
            self.box_b.copy(),
            self.acc_class_w.copy(),
            self.acc_class_b.copy(),
            self.acc_box_w.copy(),
            self.acc_box_b.copy(),
        )


# neutral prior box so untrained predictions are valid boxes
_INIT_BOX_BIAS = (0.35, 0.35, 0.65, 0.65)


def init_model(num_classes: int, feature_dim: int, seed: int) -> Model:
    rng = np.random.default_rng(seed)
    return Model(
        class_w=0.01 * rng.normal(size=(num_classes, feature_dim)),
        class_b=np.zeros(num_classes),
        box_w=0.01 * rng.normal(size=(4, feature_dim)),
        box_b=np.array(_INIT_BOX_BIAS),
    )


@dataclass(frozen=True)
class Prediction:
    logits: np.ndarray
    box: np.ndarray


@dataclass(frozen=True)
class Gradients:
    class_w: np.ndarray
    class_b: np.ndarray
    box_w: np.ndarray
    box_b: np.ndarray


def forward(model: Model, features: np.ndarray) -> Prediction:
    """Affine pass of both heads for one feature vector."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (model.feature_dim,):
        raise DimensionMismatchError(
            f"expected {model.feature_dim} features, got shape {features.shape}"
        )
    return Prediction(
        logits=model.class_w @ features + model.class_b,
        box=model.box_w @ features + model.box_b,
    )


def _smooth_l1(residual: np.ndarray) -> float:
    a = np.abs(residual)
    return float(
        np.where(a < SMOOTH_L1_DELTA, 0.5 * residual * residual, a - 0.5).sum()
    )


def compute_losses(pred: Prediction, instance: Instance) -> LossBreakdown:
    """Cross-entropy (log-sum-exp stabilized) plus smooth-L1 over box coords."""
    logits = pred.logits
    mx = logits.max()
    lse = mx + math.log(np.exp(logits - mx).sum())
    classification = lse - float(logits[instance.gt_label])
    localization = _smooth_l1(pred.box - instance.gt_box)
    return LossBreakdown.of(classification, localization)


def batch_loss_and_grads(
    model: Model,
    features: np.ndarray,
    labels: np.ndarray,
    boxes: np.ndarray,
    w_cls: float = 1.0,
    w_loc: float = 1.0,
) -> tuple[LossBreakdown, Gradients]:
    """Weighted batch-mean loss and its analytic gradients.

    The injection factors scale the respective loss terms, so the returned
    gradients are exactly the factors times the unweighted ones.
    """
    cls_loss, loc_loss, g_cw, g_cb, g_bw, g_bb = kernels.batch_loss_grads(
        model.class_w, model.class_b, model.box_w, model.box_b,
        features, labels, boxes,
    )
    loss = LossBreakdown.of(w_cls * cls_loss, w_loc * loc_loss)
    grads = Gradients(w_cls * g_cw, w_cls * g_cb, w_loc * g_bw, w_loc * g_bb)
    return loss, grads


def adagrad_step(model: Model, grads: Gradients, learning_rate: float = 0.001) -> Model:
    """One Adagrad update, in place: acc += g^2; p -= lr * g / (sqrt(acc) + eps)."""
    pairs = (
        (model.class_w, grads.class_w, model.acc_class_w),
        (model.class_b, grads.class_b, model.acc_class_b),
        (model.box_w, grads.box_w, model.acc_box_w),
        (model.box_b, grads.box_b, model.acc_box_b),
    )
    for param, grad, acc in pairs:
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != param.shape:
            raise DimensionMismatchError(
                f"gradient shape {grad.shape} != parameter shape {param.shape}"
            )
        kernels.adagrad_update(param, grad, acc, learning_rate, ADAGRAD_EPS)
    return model


def validate_and_measure_uncertainty(
    model: Model, validation: tuple[Instance, ...], frame: Frame
) -> tuple[float, float]:
    """Mean conflict K and mean total loss over the validation split.

    Per instance the softmax output and the exact ground-truth label are fused
    with Dempster's rule; with an epsilon-free ground-truth mass the conflict
    reduces to 1 - softmax(gt_label), which the evidence route computes here.
    """
    if not validation:
        raise EmptyValidationSetError("validation split is empty")
    k_sum = 0.0
    loss_sum = 0.0
    for inst in validation:
        pred = forward(model, inst.features)
        m1 = mass_from_softmax(pred.logits, frame)
        m2 = mass_from_ground_truth(inst.gt_label, frame)
        fusion = combine_pair(m1, m2)
        k_sum += fusion.conflict_k
        loss_sum += compute_losses(pred, inst).total
    n = len(validation)
    return k_sum / n, loss_sum / n


def _pack(instances: tuple[Instance, ...]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    feats = np.ascontiguousarray(np.stack([i.features for i in instances]))
    labels = np.ascontiguousarray([i.gt_label for i in instances], dtype=np.int64)
    boxes = np.ascontiguousarray(np.stack([i.gt_box for i in instances]))
    return feats, labels, boxes


def _sanitize_box(raw: np.ndarray) -> Box:
    # untrained models can emit inverted corners; collapse those to slivers
    x0, y0, x1, y1 = (float(v) for v in raw)
    if x1 <= x0:
        x1 = x0 + 1e-6
    if y1 <= y0:
        y1 = y0 + 1e-6
    return Box(x0, y0, x1, y1)


def evaluate_test_map(
    model: Model, split: tuple[Instance, ...], iou_threshold: float
) -> float:
    """mAP of one box+label prediction per instance against its ground truth."""
    feats, labels, boxes = _pack(split)
    logits = kernels.affine_batch(model.class_w, model.class_b, feats)
    pred_boxes = kernels.affine_batch(model.box_w, model.box_b, feats)
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    pred_labels = np.argmax(logits, axis=1)
    scores = probs[np.arange(len(split)), pred_labels]

    detections = [
        Detection(str(i), int(pred_labels[i]), float(scores[i]), _sanitize_box(pred_boxes[i]))
        for i in range(len(split))
    ]
    ground_truths = [
        GroundTruth(str(i), int(labels[i]), Box(*boxes[i])) for i in range(len(split))
    ]
    result = match_detections(detections, ground_truths, iou_threshold)
    class_labels = list(range(model.num_classes))
    aps = [
        average_precision(result.scored_flags(lab), result.num_gt(lab))
        for lab in class_labels
    ]
    return mean_average_precision(aps)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a training run depends on; all seeds are explicit."""

    dataset: SyntheticDatasetConfig
    model_seed: int
    shuffle_seed: int
    epochs: int = 40
    batch_size: int = 16
    learning_rate: float = 0.001
    iou_threshold: float = 0.5
    injection: InjectionConfig | None = None  # None runs the plain baseline

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise InvalidConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidConfigError("learning_rate must be positive")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise InvalidConfigError("iou_threshold must lie in (0, 1]")


def run_experiment(config: ExperimentConfig, config_echo: dict | None = None) -> ExperimentReport:
    """Train, validate, and score per epoch; fully deterministic per config.

    Each epoch applies the factor derived from the conflicts of *previous*
    epochs (1.0 on the first), trains over freshly shuffled batches, then
    validates to record this epoch's mean conflict and evaluates test mAP.
    The recorded train loss is the weighted loss the optimizer actually saw.
    """
    start = time.perf_counter()
    dataset = generate_dataset(config.dataset)
    frame = dataset.frame
    model = init_model(
        config.dataset.num_classes, config.dataset.feature_dim, config.model_seed
    )
    feats, labels, boxes = _pack(dataset.train)
    shuffle_rng = np.random.default_rng(config.shuffle_seed)
    state = UncertaintyState()
    rows: list[EpochRow] = []

    for epoch in range(1, config.epochs + 1):
        if config.injection is None:
            w = 1.0
            w_cls = w_loc = 1.0
        else:
            w = injection_factor(state, config.injection)
            w_cls = w
            w_loc = w if config.injection.where is Where.PRODUCT else 1.0

        order = shuffle_rng.permutation(len(dataset.train))
        batch_losses = []
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo : lo + config.batch_size]
            loss, grads = batch_loss_and_grads(
                model,
                np.ascontiguousarray(feats[idx]),
                np.ascontiguousarray(labels[idx]),
                np.ascontiguousarray(boxes[idx]),
                w_cls,
                w_loc,
            )
            adagrad_step(model, grads, config.learning_rate)
            batch_losses.append(loss.total)
        train_loss = float(np.mean(batch_losses))

        mean_k, val_loss = validate_and_measure_uncertainty(
            model, dataset.validation, frame
        )
        state = record_epoch_uncertainty(state, mean_k)
        test_map = evaluate_test_map(model, dataset.test, config.iou_threshold)
        score = performance_score(test_map, train_loss, val_loss).score
        rows.append(EpochRow(epoch, w, mean_k, train_loss, val_loss, test_map, score))

    final_test_map = (
        rows[-1].test_map
        if rows
        else evaluate_test_map(model, dataset.test, config.iou_threshold)
    )
    best = max(rows, key=lambda r: r.score) if rows else None
    return ExperimentReport(
        config=config_echo if config_echo is not None else default_config_echo(config),
        backend=kernels.BACKEND,
        rows=tuple(rows),
        best_epoch=best.epoch if best else None,
        best_score=best.score if best else None,
        final_test_map=final_test_map,
        wall_seconds=time.perf_counter() - start,
    )


def default_config_echo(config: ExperimentConfig) -> dict:
    """Flat provenance dictionary for reports built without a config file."""
    echo = {
        "mode": "baseline" if config.injection is None else "injection",
        "num_classes": config.dataset.num_classes,
        "train_size": config.dataset.instances_per_split[0],
        "val_size": config.dataset.instances_per_split[1],
        "test_size": config.dataset.instances_per_split[2],
        "feature_dim": config.dataset.feature_dim,
        "class_separation": config.dataset.class_separation,
        "box_noise": config.dataset.box_noise,
        "dataset_seed": config.dataset.seed,
        "model_seed": config.model_seed,
        "shuffle_seed": config.shuffle_seed,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "iou_threshold": config.iou_threshold,
    }
    if config.injection is not None:
        echo["how"] = config.injection.how.value
        echo["where"] = config.injection.where.value
        echo["card"] = config.injection.card.name
        echo["aiu_window"] = config.injection.window or 0
    return echo
