"""
Self-supervised training of the registration network over a dataset, one case per optimizer step.

Per epoch the training cases are visited in an order drawn from ``default_rng([seed, epoch])``, so a run resumed
from a checkpoint replays the same trajectory. Every epoch ends with an inference-mode validation pass that
logs the mean total loss and the mean atlas-space Dice, and with checkpoints: ``last.ckpt`` always,
``best.ckpt`` when the validation Dice improves, and ``epoch_XXX.ckpt`` every ``checkpoint_every`` epochs.
"""
import json
import logging
import math
from os import PathLike
from pathlib import Path
from typing import NamedTuple, Self

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from components.errors import DimensionMismatchError, NonFiniteLossError
from components.losses import LossWeights, Reduction, total_loss
from components.transforms import pullback_mask
from components.volumes import Mask3D, Volume3D, read_mask, read_volume
from engine.manifest import CaseRecord, DatasetManifest
from engine.splitting import precompute_band, split_dataset
from evaluation.metrics import dice
from models.checkpoint import load_checkpoint, save_checkpoint
from models.layers import Mode
from models.optimizers import Adam
from models.unet import NetConfig, UNet3D
from utilities.concurrency import parallel_map

__all__ = [
    "TrainConfig",
    "TrainingResult",
    "train_amortized",
]

logger = logging.getLogger(__name__)

CASE_METRICS_FILE = "case_metrics.csv"
EPOCH_METRICS_FILE = "epoch_metrics.csv"
LAST_CHECKPOINT = "last.ckpt"
BEST_CHECKPOINT = "best.ckpt"


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    weights: LossWeights = LossWeights()
    epochs: int = Field(default=30, ge=1)
    lr: float = Field(default=1e-4, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    reduction: Reduction = Reduction.MEAN
    levelset_enabled: bool = True
    dilation_radius: float = Field(default=3.0, gt=0.0)
    seed: int = 0
    checkpoint_every: int = Field(default=0, ge=0)
    max_steps: int | None = Field(default=None, ge=0)
    validation_workers: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def validate_weights(self) -> Self:
        if not self.levelset_enabled and self.weights.lambda_cc + self.weights.lambda_gd <= 0.0:
            raise ValueError("Disabling the level-set term leaves no positive loss weight")
        return self

    @property
    def effective_weights(self) -> LossWeights:
        return self.weights if self.levelset_enabled else self.weights.without_levelset()


class TrainingResult(NamedTuple):
    best_checkpoint: Path
    last_checkpoint: Path
    epoch_metrics: pd.DataFrame
    case_metrics: pd.DataFrame


class _Case(NamedTuple):
    case_id: str
    volume: Volume3D
    mask: Mask3D | None


def _load_cases(records: list[CaseRecord], with_masks: bool) -> list[_Case]:
    return [
        _Case(
            case_id=record.case_id,
            volume=read_volume(record.volume),
            mask=read_mask(record.mask) if with_masks and record.mask is not None else None,
        )
        for record in records
    ]


def _dump_diagnostics(out_dir: Path, case_id: str, epoch: int, step: int, details: dict) -> Path:
    path = out_dir / f"nonfinite_{case_id}.json"
    payload = dict(case_id=case_id, epoch=epoch, step=step, **details)
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path


def _previous_rows(out_dir: Path, name: str, start_epoch: int) -> list[dict]:
    path = out_dir / name
    if start_epoch == 0 or not path.is_file():
        return []
    frame = pd.read_csv(path, float_precision="round_trip")
    return frame[frame["epoch"] < start_epoch].to_dict("records")


def train_amortized(
        manifest: DatasetManifest,
        net_config: NetConfig,
        train_config: TrainConfig,
        out_dir: str | PathLike,
        resume_from: str | PathLike | None = None,
) -> TrainingResult:
    """
    Train the network on the manifest's training partition and select checkpoints on the validation partition.

    :param manifest: The dataset; atlas dims must equal the network input dims
    :param net_config: The architecture
    :param train_config: Optimization settings
    :param out_dir: Receives checkpoints, the per-case and per-epoch metric CSVs and run metadata
    :param resume_from: Optional checkpoint to continue from (its epoch count and optimizer state are kept)
    :return: Checkpoint paths and the metric tables
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    atlas = read_volume(manifest.atlas.volume)
    foreground = read_mask(manifest.atlas.mask)
    if atlas.dims != net_config.input_dims:
        raise DimensionMismatchError("Atlas does not match the network input", net_config.input_dims, atlas.dims)
    band = precompute_band(foreground, train_config.dilation_radius)
    weights = train_config.effective_weights

    split = split_dataset(manifest)
    train_cases = _load_cases(split.train, with_masks=False)
    val_cases = _load_cases(split.val, with_masks=True)
    for case in train_cases + val_cases:
        atlas.require_same_grid(case.volume, f"case {case.case_id}")

    start_epoch = 0
    params = None
    if resume_from is not None:
        checkpoint = load_checkpoint(resume_from, expected_config=net_config)
        params, start_epoch = checkpoint.params, checkpoint.epoch
        logger.info("Resuming from %s at epoch %d, step %d", resume_from, start_epoch, params.step)
    network = UNet3D(net_config, params)
    optimizer = Adam(lr=train_config.lr, beta1=train_config.beta1, beta2=train_config.beta2, eps=train_config.eps)

    (out_dir / "run_metadata.json").write_text(json.dumps(dict(
        net_config_hash=net_config.config_hash(),
        train_config=train_config.model_dump(mode="json"),
        parameter_count=network.params.parameter_count(),
        split=dict(train=[c.case_id for c in split.train], val=[c.case_id for c in split.val], test=[c.case_id for c in split.test]),
        batch_size=1,
        caveat="Batch size 1: batch normalization statistics are per-volume in train mode.",
    ), indent=2), encoding="utf-8")

    case_rows = _previous_rows(out_dir, CASE_METRICS_FILE, start_epoch)
    epoch_rows = _previous_rows(out_dir, EPOCH_METRICS_FILE, start_epoch)
    best_dice = max((row["val_dice_mean"] for row in epoch_rows if not math.isnan(row["val_dice_mean"])), default=-math.inf)
    best_loss = min((row["val_loss_mean"] for row in epoch_rows), default=math.inf)

    def validate(field_and_case) -> tuple[float, float]:
        field, case = field_and_case
        loss = total_loss(atlas, case.volume, field, foreground, band, weights, train_config.reduction).total
        score = dice(pullback_mask(case.mask, field), foreground) if case.mask is not None else math.nan
        return loss, score

    last_path = out_dir / LAST_CHECKPOINT
    best_path = out_dir / BEST_CHECKPOINT
    for epoch in range(start_epoch, train_config.epochs):
        order = np.random.default_rng([train_config.seed, epoch]).permutation(len(train_cases))
        epoch_losses = []
        for index in order:
            if train_config.max_steps is not None and network.params.step >= train_config.max_steps:
                break
            case = train_cases[index]
            network.zero_grad()
            try:
                field = network.forward(case.volume, Mode.TRAIN)
            except NonFiniteLossError as error:
                path = _dump_diagnostics(out_dir, case.case_id, epoch, network.params.step, error.breakdown)
                raise NonFiniteLossError(
                    f"Non-finite displacements on case {case.case_id} at epoch {epoch}; diagnostics in {path}",
                    case_id=case.case_id,
                    breakdown=error.breakdown,
                ) from error
            breakdown = total_loss(atlas, case.volume, field, foreground, band, weights, train_config.reduction)
            if not breakdown.is_finite():
                details = dict(weights=breakdown.weights.model_dump(), **breakdown.as_row())
                path = _dump_diagnostics(out_dir, case.case_id, epoch, network.params.step, details)
                raise NonFiniteLossError(
                    f"Non-finite loss on case {case.case_id} at epoch {epoch}; diagnostics in {path}",
                    case_id=case.case_id,
                    breakdown=breakdown.as_row(),
                )
            network.backward(breakdown.gradient)
            optimizer.step(network.params)
            epoch_losses.append(breakdown.total)
            case_rows.append(dict(
                epoch=epoch,
                step=network.params.step,
                case_id=case.case_id,
                **breakdown.as_row(),
                cc_degenerate=breakdown.cc_degenerate,
                gd_degenerate=breakdown.gd_degenerate,
            ))
            logger.debug("epoch %d step %d %s total %.6f", epoch, network.params.step, case.case_id, breakdown.total)

        fields = [network.forward(case.volume, Mode.INFER) for case in val_cases]
        scores = parallel_map(validate, list(zip(fields, val_cases)), train_config.validation_workers)
        val_losses = [loss for loss, _ in scores]
        val_dice = [score for _, score in scores if not math.isnan(score)]
        row = dict(
            epoch=epoch,
            steps=network.params.step,
            train_loss_mean=float(np.mean(epoch_losses)) if epoch_losses else math.nan,
            val_loss_mean=float(np.mean(val_losses)) if val_losses else math.nan,
            val_dice_mean=float(np.mean(val_dice)) if val_dice else math.nan,
        )
        epoch_rows.append(row)
        logger.info(
            "epoch %d: train loss %.6f, validation loss %.6f, validation Dice %.4f",
            epoch, row["train_loss_mean"], row["val_loss_mean"], row["val_dice_mean"],
        )

        save_checkpoint(last_path, net_config, network.params, epoch=epoch + 1)
        if train_config.checkpoint_every and (epoch + 1) % train_config.checkpoint_every == 0:
            save_checkpoint(out_dir / f"epoch_{epoch + 1:03d}.ckpt", net_config, network.params, epoch=epoch + 1)
        improved = (
            row["val_dice_mean"] > best_dice if not math.isnan(row["val_dice_mean"])
            else row["val_loss_mean"] < best_loss
        )
        if improved or not best_path.exists():
            best_dice = row["val_dice_mean"] if not math.isnan(row["val_dice_mean"]) else best_dice
            best_loss = min(best_loss, row["val_loss_mean"]) if not math.isnan(row["val_loss_mean"]) else best_loss
            save_checkpoint(best_path, net_config, network.params, epoch=epoch + 1)

        case_frame = pd.DataFrame(case_rows)
        epoch_frame = pd.DataFrame(epoch_rows)
        case_frame.to_csv(out_dir / CASE_METRICS_FILE, index=False)
        epoch_frame.to_csv(out_dir / EPOCH_METRICS_FILE, index=False)

    return TrainingResult(
        best_checkpoint=best_path,
        last_checkpoint=last_path,
        epoch_metrics=pd.DataFrame(epoch_rows),
        case_metrics=pd.DataFrame(case_rows),
    )
