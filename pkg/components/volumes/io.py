"""
Readers and writers for the volume, mask, field and mesh file formats.

Volume-like files share one layout: ASCII header lines, a blank line, then a little-endian
payload in x-fastest order::

    MVOL1
    dims nx ny nz
    spacing sx sy sz
    dtype f32

    <payload>

Masks use ``MMSK1``/``u8`` and fields ``MFLD1``/``f32x3`` (interleaved ``ux uy uz`` per voxel).
Meshes use an OBJ subset of ``v x y z`` and 1-based ``f i j k`` lines.
"""
import logging
from os import PathLike
from pathlib import Path
from typing import NamedTuple

import numpy as np

from components.errors import DataError, FormatError, TruncationError
from components.volumes.volume import DisplacementField, Frame, Mask3D, SurfaceMesh, Volume3D

__all__ = [
    "read_volume",
    "write_volume",
    "read_mask",
    "write_mask",
    "read_field",
    "write_field",
    "read_mesh",
    "write_mesh",
]

logger = logging.getLogger(__name__)

_F32 = np.dtype("<f4")
_U8 = np.dtype("u1")
_F32_MAX = float(np.finfo(np.float32).max)


class GridFormat(NamedTuple):
    magic: str
    dtype_tag: str
    payload_dtype: np.dtype
    components: int


VOLUME_FORMAT = GridFormat("MVOL1", "f32", _F32, 1)
MASK_FORMAT = GridFormat("MMSK1", "u8", _U8, 1)
FIELD_FORMAT = GridFormat("MFLD1", "f32x3", _F32, 3)


class GridHeader(NamedTuple):
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]


def _encode_header(grid_format: GridFormat, dims: tuple[int, int, int], spacing: tuple[float, ...]) -> bytes:
    lines = [
        grid_format.magic,
        "dims " + " ".join(str(int(value)) for value in dims),
        "spacing " + " ".join(repr(float(value)) for value in spacing),
        f"dtype {grid_format.dtype_tag}",
        "",
        "",
    ]
    return "\n".join(lines).encode("ascii")


def _decode_header(raw: bytes, grid_format: GridFormat, path: str) -> tuple[GridHeader, bytes]:
    separator = raw.find(b"\n\n")
    if separator < 0:
        raise FormatError("missing blank line terminating the header", path)

    try:
        lines = raw[:separator].decode("ascii").split("\n")
    except UnicodeDecodeError as error:
        raise FormatError("header is not ASCII", path) from error

    if len(lines) != 4 or lines[0] != grid_format.magic:
        raise FormatError(f"expected magic {grid_format.magic!r} and 3 header fields", path)

    fields = {}
    for line in lines[1:]:
        key, _, values = line.partition(" ")
        fields[key] = values.split()

    if fields.get("dtype") != [grid_format.dtype_tag]:
        raise FormatError(f"expected dtype {grid_format.dtype_tag!r}, got {fields.get('dtype')}", path)
    try:
        dims = tuple(int(value) for value in fields["dims"])
        spacing = tuple(float(value) for value in fields["spacing"])
    except (KeyError, ValueError) as error:
        raise FormatError(f"malformed dims/spacing: {error}", path) from error
    if len(dims) != 3 or len(spacing) != 3 or min(dims) < 1:
        raise FormatError(f"dims and spacing must have three positive entries, got {dims}, {spacing}", path)

    return GridHeader(dims=dims, spacing=spacing), raw[separator + 2:]


def _read_grid(path: str | PathLike, grid_format: GridFormat) -> tuple[GridHeader, np.ndarray]:
    path = str(path)
    raw = Path(path).read_bytes()
    header, payload = _decode_header(raw, grid_format, path)

    count = int(np.prod(header.dims)) * grid_format.components
    expected_bytes = count * grid_format.payload_dtype.itemsize
    if len(payload) != expected_bytes:
        raise TruncationError(
            f"payload holds {len(payload)} bytes, header dims {header.dims} require {expected_bytes}", path
        )

    flat = np.frombuffer(payload, dtype=grid_format.payload_dtype, count=count)
    if grid_format.components == 1:
        array = flat.reshape(header.dims, order="F")
    else:
        # Interleaved components, x-fastest voxels
        array = flat.reshape((grid_format.components, *header.dims), order="F")
        array = np.moveaxis(array, 0, -1)
    return header, array


def _write_grid(path: str | PathLike, grid_format: GridFormat, data: np.ndarray, spacing) -> None:
    dims = data.shape[:3]
    if grid_format.components == 1:
        flat = data.ravel(order="F")
    else:
        flat = np.moveaxis(data, -1, 0).ravel(order="F")
    payload = flat.astype(grid_format.payload_dtype).tobytes()
    Path(path).write_bytes(_encode_header(grid_format, dims, spacing) + payload)
    logger.debug("Wrote %s with dims %s to %s", grid_format.magic, dims, path)


def _check_float32_range(data: np.ndarray, path) -> None:
    if np.any(np.abs(data) > _F32_MAX):
        raise DataError(f"{path}: values exceed the 32-bit float range of the payload")


def read_volume(path: str | PathLike) -> Volume3D:
    header, array = _read_grid(path, VOLUME_FORMAT)
    if not np.all(np.isfinite(array)):
        raise DataError(f"{path}: volume payload contains non-finite values")
    return Volume3D(data=array.astype(np.float64), spacing=header.spacing)


def write_volume(volume: Volume3D, path: str | PathLike) -> None:
    _check_float32_range(volume.data, path)
    _write_grid(path, VOLUME_FORMAT, volume.data, volume.spacing)


def read_mask(path: str | PathLike) -> Mask3D:
    header, array = _read_grid(path, MASK_FORMAT)
    if np.any(array > 1):
        raise DataError(f"{path}: mask payload contains values outside {{0, 1}}")
    return Mask3D(data=array.astype(np.bool_), spacing=header.spacing)


def write_mask(mask: Mask3D, path: str | PathLike) -> None:
    _write_grid(path, MASK_FORMAT, mask.data.astype(np.uint8), mask.spacing)


def read_field(path: str | PathLike) -> DisplacementField:
    header, array = _read_grid(path, FIELD_FORMAT)
    if not np.all(np.isfinite(array)):
        raise DataError(f"{path}: field payload contains non-finite values")
    return DisplacementField(data=array.astype(np.float64), spacing=header.spacing)


def write_field(field: DisplacementField, path: str | PathLike) -> None:
    _check_float32_range(field.data, path)
    _write_grid(path, FIELD_FORMAT, field.data, field.spacing)


def read_mesh(path: str | PathLike, frame: Frame | None = None) -> SurfaceMesh:
    """
    Read an OBJ-subset mesh. Only ``v`` and ``f`` records are interpreted; a ``# frame <name>`` comment
    written by :func:`write_mesh` sets the frame tag unless ``frame`` is given.

    :param path: The mesh file
    :param frame: Optional frame tag overriding the file's frame comment
    :return: The mesh with 0-based triangle indices
    """
    vertices = []
    triangles = []
    file_frame = Frame.ATLAS
    with open(path, "r", encoding="ascii") as mesh_file:
        for line_number, line in enumerate(mesh_file, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if tokens[0] == "#":
                if len(tokens) == 3 and tokens[1] == "frame":
                    file_frame = Frame(tokens[2])
                continue
            if tokens[0].startswith("#"):
                continue
            try:
                if tokens[0] == "v" and len(tokens) == 4:
                    vertices.append([float(value) for value in tokens[1:]])
                elif tokens[0] == "f" and len(tokens) == 4:
                    triangles.append([int(value.split("/")[0]) - 1 for value in tokens[1:]])
                else:
                    raise FormatError(f"unsupported record on line {line_number}: {line.strip()!r}", str(path))
            except ValueError as error:
                if isinstance(error, FormatError):
                    raise
                raise FormatError(f"malformed number on line {line_number}", str(path)) from error

    return SurfaceMesh(
        vertices=np.array(vertices, dtype=np.float64).reshape(-1, 3),
        triangles=np.array(triangles, dtype=np.int64).reshape(-1, 3),
        frame=frame or file_frame,
    )


def write_mesh(mesh: SurfaceMesh, path: str | PathLike) -> None:
    lines = [f"# frame {mesh.frame}"]
    lines.extend(
        "v " + " ".join(repr(float(coordinate)) for coordinate in vertex)
        for vertex in mesh.vertices
    )
    lines.extend(
        "f " + " ".join(str(int(index) + 1) for index in triangle)
        for triangle in mesh.triangles
    )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
