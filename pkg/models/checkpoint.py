"""
Checkpoint files: an ASCII header followed by raw little-endian float64 buffers.

Header lines::

    MCKPT1
    config_hash <sha256 of the network config>
    step <optimizer steps>
    epoch <completed epochs>
    config <network config JSON>
    tensor <kind> <name> <comma separated shape>    (one line per buffer, in payload order)
    <blank line>

For every parameter, in layer order, the payload holds its value, first moment and second moment
(kinds ``value``, ``first_moment``, ``second_moment``), followed by the non-trainable buffers (kind ``buffer``).
"""
import logging
from os import PathLike
from pathlib import Path
from typing import NamedTuple

import numpy as np

from components.errors import ConfigError, FormatError, TruncationError
from models.network_params import NetworkParams
from models.unet import NetConfig
from models.utilities.config_parsing import parse_config

__all__ = [
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
]

logger = logging.getLogger(__name__)

_MAGIC = "MCKPT1"
_FLOAT64 = np.dtype("<f8")


class Checkpoint(NamedTuple):
    config: NetConfig
    params: NetworkParams
    epoch: int


def _buffer_entries(params: NetworkParams):
    for name, value in params.values.items():
        yield "value", name, value
        yield "first_moment", name, params.first_moments[name]
        yield "second_moment", name, params.second_moments[name]
    for name, value in params.buffers.items():
        yield "buffer", name, value


def save_checkpoint(path: str | PathLike, config: NetConfig, params: NetworkParams, epoch: int = 0) -> None:
    entries = list(_buffer_entries(params))
    header = [
        _MAGIC,
        f"config_hash {config.config_hash()}",
        f"step {params.step}",
        f"epoch {epoch}",
        f"config {config.model_dump_json()}",
    ]
    header.extend(
        f"tensor {kind} {name} {','.join(str(n) for n in value.shape)}"
        for kind, name, value in entries
    )
    payload = b"".join(np.ascontiguousarray(value, dtype=_FLOAT64).tobytes() for _, _, value in entries)
    Path(path).write_bytes(("\n".join(header) + "\n\n").encode("utf-8") + payload)
    logger.debug("Saved checkpoint at step %d to %s", params.step, path)


def load_checkpoint(path: str | PathLike, expected_config: NetConfig | None = None) -> Checkpoint:
    """
    Load a checkpoint, rejecting it when its configuration hash differs from ``expected_config``'s.

    :param path: The checkpoint file
    :param expected_config: Optional configuration the checkpoint must match
    :return: The stored configuration, parameters (with optimizer state) and epoch
    """
    path = str(path)
    raw = Path(path).read_bytes()
    separator = raw.find(b"\n\n")
    if separator < 0:
        raise FormatError("missing blank line terminating the checkpoint header", path)
    lines = raw[:separator].decode("utf-8").split("\n")
    if len(lines) < 5 or lines[0] != _MAGIC:
        raise FormatError(f"expected magic {_MAGIC!r}", path)

    fields = dict(line.split(" ", 1) for line in lines[1:5])
    config = parse_config(fields["config"], NetConfig)
    if config.config_hash() != fields["config_hash"]:
        raise FormatError("stored config does not match its hash", path)
    if expected_config is not None and expected_config.config_hash() != fields["config_hash"]:
        raise ConfigError(f"{path}: checkpoint config hash {fields['config_hash'][:12]} does not match the expected config")

    params = NetworkParams(step=int(fields["step"]))
    payload = memoryview(raw)[separator + 2:]
    offset = 0
    for line in lines[5:]:
        _, kind, name, shape_text = line.split(" ")
        shape = tuple(int(n) for n in shape_text.split(",") if n)
        count = int(np.prod(shape))
        end = offset + count * _FLOAT64.itemsize
        if end > len(payload):
            raise TruncationError(f"payload ends inside tensor '{name}'", path)
        value = np.frombuffer(payload[offset:end], dtype=_FLOAT64).reshape(shape).astype(np.float64)
        offset = end
        match kind:
            case "value":
                params.add(name, value)
            case "first_moment":
                params.first_moments[name] = value
            case "second_moment":
                params.second_moments[name] = value
            case "buffer":
                params.add_buffer(name, value)
            case _:
                raise FormatError(f"unknown tensor kind {kind!r}", path)
    if offset != len(payload):
        raise TruncationError(f"{len(payload) - offset} trailing payload bytes", path)

    return Checkpoint(config=config, params=params, epoch=int(fields["epoch"]))
