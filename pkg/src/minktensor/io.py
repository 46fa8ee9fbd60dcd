"""Point-cloud and height-field ingestion, result documents."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spatial import PointCloud
from .symtensor import SymTensor, rank2_spectrum


class DataError(ValueError):
    """Input data could not be turned into a point cloud."""


class RaggedRowsError(DataError):
    pass


class NonNumericFieldError(DataError):
    pass


class EmptyDataError(DataError):
    pass


class MaskFormatError(DataError):
    pass


class TooFewPointsError(DataError):
    pass


POINT_FORMATS = ("csv", "voxel-mask")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _read_table(path, delimiter: str | None) -> np.ndarray:
    """Numeric rows of a delimited text file; '#' comments and one header row allowed."""
    rows: list[list[str]] = []
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if delimiter is None:
        sample = lines[0] if lines else ""
        delimiter = "," if "," in sample else None
    if delimiter is None:
        rows = [ln.split() for ln in lines]
    else:
        rows = [[t.strip() for t in r] for r in csv.reader(lines, delimiter=delimiter)]
    if rows and not any(_is_number(t) for t in rows[0]):
        rows = rows[1:]
    if not rows:
        raise EmptyDataError(f"{path}: zero points")
    width = len(rows[0])
    for lineno, row in enumerate(rows, 1):
        if len(row) != width:
            raise RaggedRowsError(f"{path}: data row {lineno} has {len(row)} fields, expected {width}")
        for tok in row:
            if not _is_number(tok):
                raise NonNumericFieldError(f"{path}: data row {lineno} has non-numeric field {tok!r}")
    arr = np.array(rows, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonNumericFieldError(f"{path}: non-finite coordinate")
    return arr


def load_csv_points(path) -> PointCloud:
    return PointCloud(_read_table(path, None))


def load_voxel_mask(path) -> PointCloud:
    """Text mask: ``dims: n1 n2 [...]``, optional ``spacing: h`` (or one per axis),
    then n1*n2*... values 0/1 in row-major order. Voxel i maps to (i + 1/2) * h."""
    dims = None
    spacing = None
    values: list[str] = []
    with open(path) as fh:
        for ln in fh:
            ln = ln.split("#", 1)[0].strip()
            if not ln:
                continue
            key, sep, rest = ln.partition(":")
            if sep and key.strip().lower() == "dims":
                dims = tuple(int(t) for t in rest.split())
            elif sep and key.strip().lower() == "spacing":
                spacing = [float(t) for t in rest.split()]
            elif sep:
                raise MaskFormatError(f"{path}: unknown header {key.strip()!r}")
            else:
                values.extend(ln.replace(",", " ").split())
    if not dims or any(n <= 0 for n in dims):
        raise MaskFormatError(f"{path}: missing or invalid 'dims:' header")
    h = np.ones(len(dims)) if spacing is None else np.asarray(spacing, dtype=float)
    if h.size == 1:
        h = np.full(len(dims), h[0])
    if h.size != len(dims) or np.any(h <= 0):
        raise MaskFormatError(f"{path}: spacing must be positive, one value or one per axis")
    if len(values) != math.prod(dims):
        raise MaskFormatError(f"{path}: expected {math.prod(dims)} mask values, found {len(values)}")
    if any(v not in ("0", "1") for v in values):
        raise NonNumericFieldError(f"{path}: mask values must be 0 or 1")
    mask = np.array([v == "1" for v in values]).reshape(dims)
    idx = np.argwhere(mask)
    if idx.size == 0:
        raise EmptyDataError(f"{path}: zero points in mask")
    return PointCloud((idx + 0.5) * h)


def load_points(path, format: str = "csv", min_points: int = 1) -> PointCloud:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    if format == "csv":
        cloud = load_csv_points(path)
    elif format == "voxel-mask":
        cloud = load_voxel_mask(path)
    else:
        raise ValueError(f"unknown point format {format!r}; choose from {POINT_FORMATS}")
    if len(cloud) < min_points:
        raise TooFewPointsError(f"{path}: {len(cloud)} points, fewer than the required {min_points}")
    return cloud


def save_points(path, cloud: PointCloud | np.ndarray) -> None:
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud)
    np.savetxt(path, pts, delimiter=",", fmt="%.17g")


# ---------------------------------------------------------------------------
# height fields


@dataclass(frozen=True, eq=False)
class HeightField:
    heights: np.ndarray = field(repr=False)
    pitch: float
    height_scale: float = 1.0
    label: str = ""

    def __post_init__(self):
        h = np.array(self.heights, dtype=float)
        if h.ndim != 2 or min(h.shape) < 1:
            raise DataError("height field must be a two-dimensional grid")
        if not np.all(np.isfinite(h)):
            raise DataError("height field contains non-finite values")
        if not self.pitch > 0:
            raise ValueError("pitch must be positive")
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)

    @property
    def shape(self) -> tuple[int, int]:
        return self.heights.shape

    @property
    def rms(self) -> float:
        """Root mean square deviation of the scaled heights from their mean."""
        z = self.heights * self.height_scale
        return float(np.sqrt(np.mean((z - z.mean()) ** 2)))

    @property
    def extent(self) -> tuple[float, float]:
        nx, ny = self.shape
        return (nx - 1) * self.pitch, (ny - 1) * self.pitch

    def to_cloud(self) -> PointCloud:
        nx, ny = self.shape
        i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        pts = np.stack(
            [i.ravel() * self.pitch, j.ravel() * self.pitch, self.heights.ravel() * self.height_scale],
            axis=1,
        )
        return PointCloud(pts)

    def meta(self) -> dict:
        return {"nx": self.shape[0], "ny": self.shape[1], "pitch": self.pitch,
                "height_scale": self.height_scale, "rms": self.rms, "label": self.label}


def heightfield_from_array(heights, pitch: float, height_scale: float = 1.0, label: str = "") -> HeightField:
    return HeightField(np.asarray(heights, dtype=float), float(pitch), float(height_scale), label)


def load_heightfield(path, pitch: float, height_scale: float = 1.0) -> HeightField:
    """Rectangular grid of heights, one row per line (whitespace or comma separated)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    if path.suffix == ".npy":
        arr = np.load(path)
    else:
        arr = _read_table(path, None)
    return heightfield_from_array(arr, pitch, height_scale, label=path.name)


def flat_plane_reference(L: float, c: float = 0.0) -> dict:
    """Surface tensors of the graph of z = c x over [0, L]^2, counted from both sides."""
    if not L > 0:
        raise ValueError("L must be positive")
    area = L * L * math.sqrt(1 + c * c)
    nu = np.array([-c, 0.0, 1.0]) / math.sqrt(1 + c * c)
    outer = np.outer(nu, nu) * area / (4 * math.pi)
    return {
        "area": area,
        "normal": nu,
        "phi02": SymTensor.from_array(outer),
        "phi00": area,
    }


# ---------------------------------------------------------------------------
# result documents


def _spectra(obj):
    """Attach a spectrum to every rank-2 tensor dict found in a nested document."""
    if isinstance(obj, dict):
        out = {k: _spectra(v) for k, v in obj.items()}
        if out.get("rank") == 2 and "entries" in out and "dim" in out:
            t = SymTensor.from_dict(obj)
            out["spectrum"] = rank2_spectrum(t).to_dict()
        return out
    if isinstance(obj, list):
        return [_spectra(v) for v in obj]
    return obj


@dataclass
class ResultDocument:
    command: list[str]
    parameters: dict
    results: dict
    input_digest: str | None = None
    seed: int | None = None
    wall_clock_s: float | None = None

    def to_dict(self) -> dict:
        return {
            "command": list(self.command),
            "input_digest": self.input_digest,
            "parameters": self.parameters,
            "seed": self.seed,
            "wall_clock_s": self.wall_clock_s,
            "results": _spectra(self.results),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)

    @classmethod
    def from_dict(cls, doc: dict) -> "ResultDocument":
        return cls(
            command=list(doc["command"]),
            parameters=doc["parameters"],
            results=doc["results"],
            input_digest=doc.get("input_digest"),
            seed=doc.get("seed"),
            wall_clock_s=doc.get("wall_clock_s"),
        )

    @classmethod
    def from_json(cls, text: str) -> "ResultDocument":
        return cls.from_dict(json.loads(text))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")
