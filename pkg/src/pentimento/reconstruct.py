"""End-to-end reconstruction: preprocess, optimize pixels, write reports.

A run reads the content radiograph and the style painting, optionally
masks and inpaints the radiograph, resizes both to the working
resolution, then iterates an optimizer on the total loss. It emits the
final PNG, periodic snapshots, ``report.json``, ``loss.csv`` and a loss
figure into the output directory.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import prep
from .errors import ConfigError, StageError
from .figures import save_loss_curves
from .losses import (
    LossBreakdown,
    LossConfig,
    content_targets,
    style_gram_targets,
    total_loss,
)
from .network import FeatureExtractor, LayerSpec, NetworkSpec, vgg16_spec
from .optim import AdamState, LbfgsState, adam_step, lbfgs_step
from .weights import WeightStore, load_weights

OPTIMIZER_KINDS = ("adam", "lbfgs")
INIT_KINDS = ("content", "noise")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    lr: float = 0.02
    steps: int = 500
    snapshot_every: int = 25

    def validate(self) -> None:
        if self.kind not in OPTIMIZER_KINDS:
            raise ConfigError(
                f"optimizer kind must be one of {OPTIMIZER_KINDS}, got {self.kind!r}",
                field="optimizer.kind",
            )
        if self.steps < 1:
            raise ConfigError("steps must be >= 1", field="optimizer.steps")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0", field="optimizer.lr")
        if self.snapshot_every < 1:
            raise ConfigError(
                "snapshot_every must be >= 1", field="optimizer.snapshot_every"
            )


@dataclass(frozen=True)
class ReconstructionConfig:
    """Inputs, working size, loss weights, optimizer and initialisation."""

    content_path: str
    style_path: str
    weights_path: str
    output_dir: str
    mask_path: str | None = None
    size: int = 512
    loss: LossConfig = field(default_factory=LossConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    init: str = "content"
    seed: int = 0

    def validate(self) -> None:
        if self.size < 64:
            raise ConfigError("size must be >= 64", field="size")
        if self.init not in INIT_KINDS:
            raise ConfigError(
                f"init must be one of {INIT_KINDS}, got {self.init!r}", field="init"
            )
        self.optimizer.validate()

    def to_dict(self) -> dict:
        return {
            "content_path": self.content_path,
            "style_path": self.style_path,
            "mask_path": self.mask_path,
            "weights_path": self.weights_path,
            "output_dir": self.output_dir,
            "size": self.size,
            "loss": {
                "alpha": self.loss.alpha,
                "beta": self.loss.beta,
                "tv_weight": self.loss.tv_weight,
                "content_taps": list(self.loss.content_taps),
                "style_taps": dict(self.loss.style_taps),
            },
            "optimizer": {
                "kind": self.optimizer.kind,
                "lr": self.optimizer.lr,
                "steps": self.optimizer.steps,
                "snapshot_every": self.optimizer.snapshot_every,
            },
            "init": self.init,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReconstructionConfig":
        known = {
            "content_path",
            "style_path",
            "mask_path",
            "weights_path",
            "output_dir",
            "size",
            "loss",
            "optimizer",
            "init",
            "seed",
        }
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown config field {key!r}", field=key)
        for required in ("content_path", "style_path", "weights_path", "output_dir"):
            if not data.get(required):
                raise ConfigError(f"missing config field {required!r}", field=required)
        loss_data = dict(data.get("loss") or {})
        loss_known = {"alpha", "beta", "tv_weight", "content_taps", "style_taps"}
        for key in loss_data:
            if key not in loss_known:
                raise ConfigError(f"unknown loss field {key!r}", field=f"loss.{key}")
        opt_data = dict(data.get("optimizer") or {})
        opt_known = {"kind", "lr", "steps", "snapshot_every"}
        for key in opt_data:
            if key not in opt_known:
                raise ConfigError(
                    f"unknown optimizer field {key!r}", field=f"optimizer.{key}"
                )
        try:
            loss = LossConfig(**loss_data)
            optimizer = OptimizerConfig(**opt_data)
            config = cls(
                content_path=str(data["content_path"]),
                style_path=str(data["style_path"]),
                weights_path=str(data["weights_path"]),
                output_dir=str(data["output_dir"]),
                mask_path=(None if data.get("mask_path") in (None, "") else str(data["mask_path"])),
                size=int(data.get("size", 512)),
                loss=loss,
                optimizer=optimizer,
                init=str(data.get("init", "content")),
                seed=int(data.get("seed", 0)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        config.validate()
        return config

    @classmethod
    def from_json(cls, path) -> "ReconstructionConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class RunReport:
    """Per-iteration losses plus the artifact paths of one run."""

    history: list[LossBreakdown]
    wall_time: float
    final_image: str
    snapshots: list[str]
    completed: bool
    best_total: float

    @property
    def initial_total(self) -> float:
        return self.history[0].total if self.history else float("nan")


def network_for_store(store: WeightStore, padding: str = "reflect") -> NetworkSpec:
    """Choose the layer stack matching a weight file.

    Files labelled ``arch=vgg16`` in metadata (or carrying exactly the 13
    VGG conv names) get the full VGG-16 prefix; any other store becomes a
    plain conv+relu chain in file order, which is what the small
    random-weight test networks use.
    """
    vgg_names = {layer.name for layer in vgg16_spec().layers if layer.kind == "conv"}
    if store.metadata.get("arch") == "vgg16" or set(store.entries) == vgg_names:
        return vgg16_spec(padding=padding)
    layers: list[LayerSpec] = []
    for name in store.entries:
        layers.append(LayerSpec(name, "conv"))
        layers.append(LayerSpec(f"relu_{name}", "relu"))
    return NetworkSpec(layers=tuple(layers), padding=padding)


def init_image(config: ReconstructionConfig, content: np.ndarray) -> np.ndarray:
    """Starting point: a copy of the content tensor, or seeded uniform noise."""
    if config.init == "content":
        return content.copy()
    rng = np.random.Generator(np.random.PCG64(config.seed))
    return rng.random(content.shape, dtype=np.float32)


def _stage(name: str):
    """Decorator-free stage guard: re-raise any failure naming the stage."""

    class _Guard:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, StageError):
                raise StageError(name, str(exc)) from exc
            return False

    return _Guard()


def run(config: ReconstructionConfig, progress=None, should_stop=None) -> RunReport:
    """Execute a reconstruction and write all artifacts to the output dir.

    ``progress(iteration, breakdown)`` is called after each optimizer
    step; ``should_stop()`` is polled at iteration boundaries and ends
    the run early when it returns True (snapshots taken so far are kept).
    Identical config and seed reproduce the loss history exactly.
    """
    config.validate()
    start = time.perf_counter()
    out_dir = Path(config.output_dir)
    snap_dir = out_dir / "snapshots"

    with _stage("load-weights"):
        store = load_weights(config.weights_path)
        net = FeatureExtractor(network_for_store(store), store)

    with _stage("load-images"):
        content_img = prep.load_image(config.content_path)
        style_img = prep.load_image(config.style_path)

    with _stage("prep"):
        if config.mask_path:
            gray = prep.to_gray(content_img)
            mask = prep.load_mask(config.mask_path, shape=gray.shape)
            content_img = prep.inpaint_diffusion(gray, mask).image
        ch, cw = prep.fit_long_side(*_hw(content_img), config.size)
        content = prep.to_net_input(prep.resize_bilinear(content_img, ch, cw))
        sh, sw = prep.fit_long_side(*_hw(style_img), config.size)
        style = prep.to_net_input(prep.resize_bilinear(style_img, sh, sw))

    with _stage("targets"):
        targets = (
            content_targets(net, content, config.loss.content_taps)
            if config.loss.alpha > 0
            else {}
        )
        grams = (
            style_gram_targets(net, style, config.loss.style_taps)
            if config.loss.beta > 0
            else {}
        )

    with _stage("optimize"):
        out_dir.mkdir(parents=True, exist_ok=True)
        snap_dir.mkdir(parents=True, exist_ok=True)
        image = init_image(config, content)

        def evaluate(img):
            return total_loss(img, targets, grams, config.loss, net)

        adam_state = AdamState.zeros_like(image)
        lbfgs_state = LbfgsState(history=10)
        history: list[LossBreakdown] = []
        snapshots: list[str] = []
        best = float("inf")
        completed = True

        for iteration in range(1, config.optimizer.steps + 1):
            if should_stop is not None and should_stop():
                completed = False
                break
            loss, grad, breakdown = evaluate(image)
            history.append(breakdown)
            best = min(best, loss)
            if config.optimizer.kind == "adam":
                image, adam_state = adam_step(
                    image, grad, adam_state, lr=config.optimizer.lr
                )
            else:
                image, lbfgs_state = lbfgs_step(
                    image, loss, grad, lbfgs_state, lambda im: evaluate(im)[0]
                )
            if iteration % config.optimizer.snapshot_every == 0:
                snap_path = snap_dir / f"iter_{iteration:06d}.png"
                prep.save_image(prep.from_net_input(image), snap_path)
                snapshots.append(str(snap_path))
            if progress is not None:
                progress(iteration, breakdown)

    with _stage("report"):
        final_path = out_dir / "final.png"
        prep.save_image(prep.from_net_input(image), final_path)
        report = RunReport(
            history=history,
            wall_time=time.perf_counter() - start,
            final_image=str(final_path),
            snapshots=snapshots,
            completed=completed,
            best_total=best if history else float("nan"),
        )
        write_report_files(out_dir, config, report)
    return report


def _hw(img: np.ndarray):
    return img.shape[0], img.shape[1]


def write_report_files(out_dir: Path, config: ReconstructionConfig, report: RunReport):
    """report.json + loss.csv + loss.png; losses as full-precision decimals."""
    with open(out_dir / "loss.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "total", "content", "style", "tv"])
        for i, b in enumerate(report.history, start=1):
            writer.writerow([i, repr(b.total), repr(b.content), repr(b.style), repr(b.tv)])
    payload = {
        "config": config.to_dict(),
        "executed_steps": len(report.history),
        "wall_time_s": report.wall_time,
        "final_image": report.final_image,
        "snapshots": report.snapshots,
        "completed": report.completed,
        "initial_total": report.initial_total,
        "best_total": report.best_total,
    }
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
    save_loss_curves(report.history, out_dir / "loss.png")
