import json
import logging
from pathlib import Path
from typing import Any, TypeVar

from pydantic import BaseModel, ConfigDict, Field

from components.errors import ConfigError
from components.losses import LossWeights, Reduction
from evaluation.statistics import WilcoxonMode
from models.unet import NetConfig
from models.utilities.config_parsing import load_config
from models.utilities.gradient_check import GradcheckScope
from engine.training import TrainConfig

__all__ = [
    "RunConfig",
    "TrainRunConfig",
    "RegisterConfig",
    "SegmentConfig",
    "EvaluateConfig",
    "GradcheckConfig",
    "parse_overrides",
    "RESOLVED_CONFIG_FILE",
    "RUN_FILE",
]

logger = logging.getLogger(__name__)

ConfigType = TypeVar("ConfigType", bound=BaseModel)

RESOLVED_CONFIG_FILE = "resolved_config.json"
RUN_FILE = "run.json"


class TrainRunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    net: NetConfig = NetConfig()
    train: TrainConfig = TrainConfig()


class RegisterConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    weights: LossWeights = LossWeights()
    levelset_enabled: bool = True
    steps: int = Field(default=200, ge=0)
    lr: float = Field(default=0.05, gt=0.0)
    reduction: Reduction = Reduction.MEAN
    dilation_radius: float = Field(default=3.0, gt=0.0)

    @property
    def effective_weights(self) -> LossWeights:
        return self.weights if self.levelset_enabled else self.weights.without_levelset()


class SegmentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    supersample: int = Field(default=3, ge=1)


class EvaluateConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    samples_per_triangle: int = Field(default=16, ge=1)
    wilcoxon_mode: WilcoxonMode = WilcoxonMode.AUTO
    workers: int | None = Field(default=None, ge=1)


class GradcheckConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    scope: GradcheckScope = GradcheckScope.LOSSES
    seed: int = 0


def parse_overrides(items: list[str] | None) -> dict[str, Any]:
    """
    Parse ``key=value`` pairs; values are read as JSON when possible and kept as strings otherwise
    """
    overrides = {}
    for item in items or []:
        key, separator, raw = item.partition("=")
        if not separator or not key.strip():
            raise ConfigError(f"Overrides take the form key=value, got '{item}'")
        try:
            overrides[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key.strip()] = raw
    return overrides


class RunConfig(BaseModel):
    """
    One command invocation: the command, its config file, overrides, output directory, master seed and
    command-specific arguments. Precedence: config file, then ``--seed``, then command flags, then ``--set``.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    command: str
    config: Path | None = None
    overrides: dict[str, Any] = Field(default_factory=dict)
    out_dir: Path
    seed: int | None = None
    arguments: dict[str, Any] = Field(default_factory=dict)

    def resolve(
            self,
            config_type: type[ConfigType],
            seed_keys: tuple[str, ...] = (),
            flags: dict[str, Any] | None = None,
    ) -> ConfigType:
        """
        Merge the config file with the seed, command flags and overrides, and persist the result

        :param config_type: The command's config model
        :param seed_keys: Dotted keys that receive the master seed
        :param flags: Dotted keys set by command flags; flags left unset (None) are skipped
        :return: The validated config
        """
        merged = {key: self.seed for key in seed_keys} if self.seed is not None else {}
        merged.update({key: value for key, value in (flags or {}).items() if value is not None})
        merged.update(self.overrides)
        resolved = load_config(self.config, config_type, merged)
        self.write_snapshot(resolved)
        return resolved

    def write_snapshot(self, resolved: BaseModel) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        snapshot = self.out_dir / RESOLVED_CONFIG_FILE
        snapshot.write_text(resolved.model_dump_json(indent=2), encoding="utf-8")
        (self.out_dir / RUN_FILE).write_text(self.model_dump_json(indent=2), encoding="utf-8")
        logger.debug("Wrote resolved %s config to %s", self.command, snapshot)
        return snapshot
