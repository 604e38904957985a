"""Domain types, on-disk formats, and deterministic train/test splitting.

On disk a dataset is::

    manifest.json        one JSON document, labels included
    cycles/<id>.csv      header row of channel names, one column per channel
    images/<id>.pgm      16-bit binary PGM (P5, maxval 65535)

Loading is read-only; loaded records are immutable by convention and safe
to share across workers.
"""
from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import CHANNELS
from .errors import BadSplitSize, ChannelMismatch, MalformedRecord, MissingFile

SCHEMA_VERSION = 1
PGM_MAXVAL = 65535


@dataclass(frozen=True)
class SignalTrace:
    """One sensor channel of one production cycle, nominally 100 Hz."""

    channel: str
    samples: np.ndarray
    sample_rate_hz: float = 100.0

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ChannelMismatch(f"unknown channel {self.channel!r}")
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size == 0:
            raise MalformedRecord(f"channel {self.channel}: samples must be a non-empty vector")
        if not np.all(np.isfinite(samples)):
            raise MalformedRecord(f"channel {self.channel}: non-finite sample values")
        if not self.sample_rate_hz > 0:
            raise MalformedRecord(f"channel {self.channel}: sample_rate_hz must be > 0")


@dataclass(frozen=True)
class ThermoImage:
    """Single-valued (grayscale-equivalent) thermal still frame."""

    width_px: int
    height_px: int
    pixels: np.ndarray  # row-major, length width_px * height_px

    def __post_init__(self):
        if self.width_px < 1 or self.height_px < 1:
            raise MalformedRecord("image dimensions must be positive")
        pixels = np.asarray(self.pixels, dtype=float).reshape(-1)
        object.__setattr__(self, "pixels", pixels)
        if pixels.size != self.width_px * self.height_px:
            raise MalformedRecord(
                f"pixel count {pixels.size} != {self.width_px}x{self.height_px}")
        if not np.all(np.isfinite(pixels)):
            raise MalformedRecord("non-finite pixel values")

    def as_array(self) -> np.ndarray:
        """Pixels as a (height, width) array."""
        return self.pixels.reshape(self.height_px, self.width_px)


@dataclass(frozen=True)
class CycleRecord:
    """One production cycle: four signal traces, one image, optional label."""

    cycle_id: str
    traces: dict  # channel name -> SignalTrace
    image: ThermoImage
    width_mm: float | None = None

    def __post_init__(self):
        if set(self.traces) != set(CHANNELS):
            missing = set(CHANNELS) - set(self.traces)
            extra = set(self.traces) - set(CHANNELS)
            raise ChannelMismatch(
                f"cycle {self.cycle_id}: missing={sorted(missing)} extra={sorted(extra)}")
        if self.width_mm is not None and not math.isfinite(self.width_mm):
            raise MalformedRecord(f"cycle {self.cycle_id}: width_mm not finite")

    def trace(self, channel: str) -> SignalTrace:
        return self.traces[channel]


@dataclass
class ManifestEntry:
    cycle_id: str
    trace_file: str
    image_file: str
    width_mm: float | None = None
    sample_rate_hz: float = 100.0


@dataclass
class DatasetManifest:
    records: list = field(default_factory=list)  # list of ManifestEntry
    split_seed: int = 0
    n_train: int = 0
    n_test: int = 0
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.records and self.n_train + self.n_test != len(self.records):
            raise MalformedRecord(
                f"n_train + n_test = {self.n_train + self.n_test} "
                f"!= {len(self.records)} records")

    @property
    def cycle_ids(self) -> list:
        return [e.cycle_id for e in self.records]


# -- PGM (P5, 16-bit) --------------------------------------------------------
#
# Real intensities are linearly mapped onto [0, maxval] integers. The map is
# stored in a comment line so the loader can convert back to reals; values
# that already sit on the 16-bit grid survive a round trip bitwise.

def save_pgm(image: ThermoImage, path) -> None:
    pixels = image.pixels
    lo = float(pixels.min())
    hi = float(pixels.max())
    integral = bool(np.all(pixels == np.round(pixels)))
    if integral and lo >= 0.0 and hi <= PGM_MAXVAL:
        lo, scale = 0.0, 1.0
        raw = pixels.astype(np.uint16)
    else:
        scale = (hi - lo) / PGM_MAXVAL if hi > lo else 1.0
        raw = np.round((pixels - lo) / scale).astype(np.uint16)
    header = (f"P5\n# moldline offset={lo!r} scale={scale!r}\n"
              f"{image.width_px} {image.height_px}\n{PGM_MAXVAL}\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(raw.astype(">u2").tobytes())


def load_pgm(path) -> ThermoImage:
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    data = path.read_bytes()
    try:
        magic, rest = data.split(b"\n", 1)
        if magic.strip() != b"P5":
            raise MalformedRecord(f"{path}: not a binary PGM")
        offset, scale = 0.0, 1.0
        fields = []
        while len(fields) < 3:
            line, rest = rest.split(b"\n", 1)
            if line.startswith(b"#"):
                m = re.search(rb"offset=(\S+) scale=(\S+)", line)
                if m:
                    offset = float(m.group(1))
                    scale = float(m.group(2))
                continue
            fields.extend(line.split())
        width, height, maxval = (int(f) for f in fields[:3])
        if maxval != PGM_MAXVAL:
            raise MalformedRecord(f"{path}: expected maxval {PGM_MAXVAL}, got {maxval}")
        raw = np.frombuffer(rest[: 2 * width * height], dtype=">u2")
        if raw.size != width * height:
            raise MalformedRecord(f"{path}: truncated pixel data")
    except (ValueError, IndexError) as exc:
        raise MalformedRecord(f"{path}: {exc}") from exc
    pixels = offset + raw.astype(float) * scale
    return ThermoImage(width_px=width, height_px=height, pixels=pixels)


# -- trace CSV ----------------------------------------------------------------
#
# One column per channel, one row per sample tick. Channels may have unequal
# native lengths; short columns are padded with empty cells. Numeric text is
# repr() of float64, which round-trips exactly.

def save_traces_csv(traces: dict, path) -> None:
    columns = [traces[ch].samples for ch in CHANNELS]
    n_rows = max(col.size for col in columns)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CHANNELS)
        for i in range(n_rows):
            writer.writerow([repr(float(col[i])) if i < col.size else "" for col in columns])


def load_traces_csv(path, sample_rate_hz: float = 100.0) -> dict:
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRecord(f"{path}: empty CSV") from None
        if sorted(header) != sorted(CHANNELS) or len(header) != len(CHANNELS):
            raise ChannelMismatch(f"{path}: header {header} != channels {list(CHANNELS)}")
        columns = {ch: [] for ch in header}
        for row in reader:
            for ch, cell in zip(header, row):
                if cell != "":
                    try:
                        columns[ch].append(float(cell))
                    except ValueError as exc:
                        raise MalformedRecord(f"{path}: bad cell {cell!r}") from exc
    traces = {}
    for ch in CHANNELS:
        if not columns[ch]:
            raise MalformedRecord(f"{path}: channel {ch} has no samples")
        traces[ch] = SignalTrace(channel=ch, samples=np.array(columns[ch]),
                                 sample_rate_hz=sample_rate_hz)
    return traces


# -- manifest ------------------------------------------------------------------

def save_manifest(manifest: DatasetManifest, path) -> None:
    doc = {
        "schema_version": manifest.schema_version,
        "split_seed": manifest.split_seed,
        "n_train": manifest.n_train,
        "n_test": manifest.n_test,
        "records": [
            {
                "cycle_id": e.cycle_id,
                "trace_file": e.trace_file,
                "image_file": e.image_file,
                "width_mm": e.width_mm,
                "sample_rate_hz": e.sample_rate_hz,
            }
            for e in manifest.records
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"{path}: {exc}") from exc
    records = doc.get("records", [])
    if not records:
        raise MalformedRecord(f"{path}: manifest lists no records")
    entries = []
    for rec in records:
        try:
            entries.append(ManifestEntry(
                cycle_id=rec["cycle_id"],
                trace_file=rec["trace_file"],
                image_file=rec["image_file"],
                width_mm=rec.get("width_mm"),
                sample_rate_hz=rec.get("sample_rate_hz", 100.0),
            ))
        except KeyError as exc:
            raise MalformedRecord(f"{path}: record missing key {exc}") from exc
    return DatasetManifest(
        records=entries,
        split_seed=doc.get("split_seed", 0),
        n_train=doc.get("n_train", 0),
        n_test=doc.get("n_test", 0),
        schema_version=doc.get("schema_version", SCHEMA_VERSION),
    )


def load_dataset(manifest_path) -> tuple:
    """Load manifest plus all referenced records, in manifest order."""
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    base = manifest_path.parent
    records = []
    for entry in manifest.records:
        traces = load_traces_csv(base / entry.trace_file, entry.sample_rate_hz)
        image = load_pgm(base / entry.image_file)
        records.append(CycleRecord(
            cycle_id=entry.cycle_id, traces=traces, image=image, width_mm=entry.width_mm))
    return manifest, records


def write_dataset(manifest: DatasetManifest, records: list, out_dir) -> None:
    """Write the full on-disk layout under out_dir."""
    out_dir = Path(out_dir)
    (out_dir / "cycles").mkdir(parents=True, exist_ok=True)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    for entry, record in zip(manifest.records, records):
        save_traces_csv(record.traces, out_dir / entry.trace_file)
        save_pgm(record.image, out_dir / entry.image_file)
    save_manifest(manifest, out_dir / "manifest.json")


# -- split ---------------------------------------------------------------------

def split(manifest: DatasetManifest, seed: int, n_test: int) -> tuple:
    """Uniform random partition into (train_ids, test_ids), seed-deterministic."""
    ids = manifest.cycle_ids
    total = len(ids)
    if not 0 < n_test < total:
        raise BadSplitSize(f"n_test must be in (0, {total}), got {n_test}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(total)
    test_idx = sorted(order[:n_test].tolist())
    train_idx = sorted(order[n_test:].tolist())
    return [ids[i] for i in train_idx], [ids[i] for i in test_idx]
