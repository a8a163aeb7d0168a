"""Run configuration: one flat record of every knob that influences results,
serialized in a plain ``key = value`` text format (dotted keys group related
fields; ``#`` starts a comment). Every artifact directory gets a stamp of
the exact configuration that produced it.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .errors import DataError


@dataclass
class RunConfig:
    seed: int = 0
    channels: int = 1
    resample_method: str = "bicubic"
    harris_kappa: float = 0.05
    harris_sigma: float = 1.5
    nms_radius: int = 10
    nms_rel_threshold: float = 0.01
    nms_max_corners: int = 200
    patch_size: int = 64
    patch_border: int = 32
    patch_max_per_entry: int = 40
    synth_reg_variants: int = 6
    split_train_fraction: float = 0.7
    train_epochs: int = 40
    train_batch0: int = 32
    train_batch_double_every: int = 10
    train_lr0: float = 1e-4
    train_lr_drop_factor: float = 10.0
    train_plateau_patience: int = 5
    train_plateau_min_delta: float = 1e-4
    train_max_lr_drops: int = 2
    train_micro_batch: int = 32
    train_val_fraction: float = 0.1
    sgd_momentum: float = 0.9
    sgd_weight_decay: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5
    agg_image_pct: float = 90.0
    agg_video_pct: float = 70.0
    low_confidence_corners: int = 10

    def replace(self, **kw) -> "RunConfig":
        return replace(self, **kw)


# text key <-> attribute; order here is the canonical stamp order.
_KEYMAP = [
    ("seed", "seed", int),
    ("channels", "channels", int),
    ("resample.method", "resample_method", str),
    ("harris.kappa", "harris_kappa", float),
    ("harris.sigma", "harris_sigma", float),
    ("nms.radius", "nms_radius", int),
    ("nms.rel_threshold", "nms_rel_threshold", float),
    ("nms.max_corners", "nms_max_corners", int),
    ("patch.size", "patch_size", int),
    ("patch.border", "patch_border", int),
    ("patch.max_per_entry", "patch_max_per_entry", int),
    ("synth.reg_variants", "synth_reg_variants", int),
    ("split.train_fraction", "split_train_fraction", float),
    ("train.epochs", "train_epochs", int),
    ("train.batch0", "train_batch0", int),
    ("train.batch_double_every", "train_batch_double_every", int),
    ("train.lr0", "train_lr0", float),
    ("train.lr_drop_factor", "train_lr_drop_factor", float),
    ("train.plateau_patience", "train_plateau_patience", int),
    ("train.plateau_min_delta", "train_plateau_min_delta", float),
    ("train.max_lr_drops", "train_max_lr_drops", int),
    ("train.micro_batch", "train_micro_batch", int),
    ("train.val_fraction", "train_val_fraction", float),
    ("sgd.momentum", "sgd_momentum", float),
    ("sgd.weight_decay", "sgd_weight_decay", float),
    ("adam.beta1", "adam_beta1", float),
    ("adam.beta2", "adam_beta2", float),
    ("adam.eps", "adam_eps", float),
    ("bn.momentum", "bn_momentum", float),
    ("bn.eps", "bn_eps", float),
    ("agg.image_pct", "agg_image_pct", float),
    ("agg.video_pct", "agg_video_pct", float),
    ("predict.low_confidence_corners", "low_confidence_corners", int),
]
_KEY_TO_ATTR = {k: (a, t) for k, a, t in _KEYMAP}
_ATTR_TO_KEY = {a: k for k, a, _ in _KEYMAP}


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_text(cfg: RunConfig) -> str:
    lines = [f"{key} = {_format_value(getattr(cfg, attr))}" for key, attr, _ in _KEYMAP]
    return "\n".join(lines) + "\n"


def to_dict(cfg: RunConfig) -> dict:
    """Stamp form used inside JSON artifacts (text keys, canonical order)."""
    return {key: getattr(cfg, attr) for key, attr, _ in _KEYMAP}


def from_dict(d: dict) -> RunConfig:
    cfg = RunConfig()
    for key, value in d.items():
        if key not in _KEY_TO_ATTR:
            raise DataError(f"unknown config key {key!r}")
        attr, typ = _KEY_TO_ATTR[key]
        setattr(cfg, attr, typ(value))
    return cfg


def parse_text(text: str) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _KEY_TO_ATTR:
            raise DataError(f"config line {lineno}: unknown key {key!r}")
        attr, typ = _KEY_TO_ATTR[key]
        try:
            values[attr] = typ(val)
        except ValueError as exc:
            raise DataError(f"config line {lineno}: bad value {val!r} for {key}") from exc
    cfg = RunConfig()
    for attr, value in values.items():
        setattr(cfg, attr, value)
    return cfg


def load_file(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_text(fh.read())
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc


def write_stamp(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_text(cfg))
