"""Experiment configuration files: plain-text ``key = value`` format.

Seeds are mandatory (no wall-clock seeding) so every published number stays
reproducible. A single ``seed`` key drives all three randomness sources
(dataset = seed, model = seed + 1, shuffle = seed + 2); each can also be
pinned individually.
"""

from __future__ import annotations

import os

from .detector import ExperimentConfig, SyntheticDatasetConfig
from .errors import InvalidConfigError, ParseError
from .injection import How, InjectionConfig, Where
from .scorecard import ScoreCard, parse_scorecard, scorecard_a, scorecard_b

_DEFAULTS = {
    "mode": "baseline",
    "num_classes": 4,
    "train_size": 800,
    "val_size": 200,
    "test_size": 200,
    "feature_dim": 16,
    "class_separation": 12.0,
    "box_noise": 0.05,
    "epochs": 40,
    "batch_size": 16,
    "learning_rate": 0.001,
    "iou_threshold": 0.5,
    "how": "diu",
    "where": "product",
    "card": "b",
    "aiu_window": 0,
}

_INT_KEYS = {
    "seed", "dataset_seed", "model_seed", "shuffle_seed",
    "num_classes", "train_size", "val_size", "test_size", "feature_dim",
    "epochs", "batch_size", "aiu_window",
}
_FLOAT_KEYS = {"class_separation", "box_noise", "learning_rate", "iou_threshold"}
_STR_KEYS = {"mode", "how", "where", "card"}


def parse_key_values(text: str) -> dict:
    """Parse ``key = value`` lines with ``#`` comments into a raw dict."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ParseError(f"line {lineno}: empty key or value")
        if key in values:
            raise ParseError(f"line {lineno}: duplicate key {key!r}")
        values[key] = (lineno, value)
    return values


def resolve_card(spec: str, base_dir: str | None = None) -> ScoreCard:
    """Map a card spec to a ScoreCard: 'a', 'b', or a scorecard-file path."""
    lowered = spec.lower()
    if lowered == "a":
        return scorecard_a()
    if lowered == "b":
        return scorecard_b()
    path = spec if base_dir is None else os.path.join(base_dir, spec)
    if not os.path.exists(path) and os.path.exists(spec):
        path = spec
    with open(path, encoding="utf-8") as fh:
        return parse_scorecard(fh.read())


def parse_experiment_config(
    text: str,
    base_dir: str | None = None,
    seed_override: int | None = None,
    card_override: str | None = None,
) -> tuple[ExperimentConfig, dict]:
    """Parse a config file into an ExperimentConfig plus a provenance echo.

    ``seed_override`` and ``card_override`` implement the corresponding CLI
    flags; the echo records the values actually used.
    """
    raw = parse_key_values(text)
    values = dict(_DEFAULTS)
    for key, (lineno, text_value) in raw.items():
        if key in _INT_KEYS:
            try:
                values[key] = int(text_value)
            except ValueError:
                raise ParseError(f"line {lineno}: {key} must be an integer") from None
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(text_value)
            except ValueError:
                raise ParseError(f"line {lineno}: {key} must be a number") from None
        elif key in _STR_KEYS:
            values[key] = text_value
        else:
            raise InvalidConfigError(f"line {lineno}: unknown key {key!r}")

    if seed_override is not None:
        values["seed"] = seed_override
        values.pop("dataset_seed", None)
        values.pop("model_seed", None)
        values.pop("shuffle_seed", None)
    if card_override is not None:
        values["card"] = card_override
    if "seed" not in values and not all(
        k in values for k in ("dataset_seed", "model_seed", "shuffle_seed")
    ):
        raise InvalidConfigError(
            "config must set 'seed' (or all of dataset_seed/model_seed/shuffle_seed)"
        )
    seed = values.get("seed")
    dataset_seed = values.get("dataset_seed", seed)
    model_seed = values.get("model_seed", None if seed is None else seed + 1)
    shuffle_seed = values.get("shuffle_seed", None if seed is None else seed + 2)

    mode = values["mode"].lower()
    if mode not in ("baseline", "injection"):
        raise InvalidConfigError(f"mode must be 'baseline' or 'injection', got {mode!r}")
    injection = None
    if mode == "injection":
        how = values["how"].lower()
        where = values["where"].lower()
        if how not in ("diu", "aiu"):
            raise InvalidConfigError(f"how must be 'diu' or 'aiu', got {how!r}")
        if where not in ("product", "deep"):
            raise InvalidConfigError(f"where must be 'product' or 'deep', got {where!r}")
        window = values["aiu_window"]
        if window < 0:
            raise InvalidConfigError("aiu_window must be >= 0 (0 = whole history)")
        injection = InjectionConfig(
            how=How(how),
            where=Where(where),
            card=resolve_card(values["card"], base_dir),
            window=window or None,
        )

    config = ExperimentConfig(
        dataset=SyntheticDatasetConfig(
            num_classes=values["num_classes"],
            instances_per_split=(
                values["train_size"], values["val_size"], values["test_size"],
            ),
            feature_dim=values["feature_dim"],
            class_separation=values["class_separation"],
            box_noise=values["box_noise"],
            seed=dataset_seed,
        ),
        model_seed=model_seed,
        shuffle_seed=shuffle_seed,
        epochs=values["epochs"],
        batch_size=values["batch_size"],
        learning_rate=values["learning_rate"],
        iou_threshold=values["iou_threshold"],
        injection=injection,
    )

    echo = {
        "mode": mode,
        "num_classes": values["num_classes"],
        "train_size": values["train_size"],
        "val_size": values["val_size"],
        "test_size": values["test_size"],
        "feature_dim": values["feature_dim"],
        "class_separation": values["class_separation"],
        "box_noise": values["box_noise"],
        "dataset_seed": dataset_seed,
        "model_seed": model_seed,
        "shuffle_seed": shuffle_seed,
        "epochs": values["epochs"],
        "batch_size": values["batch_size"],
        "learning_rate": values["learning_rate"],
        "iou_threshold": values["iou_threshold"],
    }
    if injection is not None:
        echo["how"] = values["how"].lower()
        echo["where"] = values["where"].lower()
        echo["card"] = values["card"]
        echo["aiu_window"] = values["aiu_window"]
    return config, echo
