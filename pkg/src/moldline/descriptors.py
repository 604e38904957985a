"""Named scalar descriptors per cycle, assembled from signals, CWT peaks, and images.

The canonical manifest is 84 signal columns (4 channels x (10 raw stats +
peak count + 10 peak-height stats)) plus 24 image columns (10 pixel stats +
14 texture features), 108 in total. Extraction is deterministic and
per-record, so it can never leak information across the train/test split.
"""
from __future__ import annotations

import csv
import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cwt as cwt_mod
from .config import CHANNELS, PipelineConfig
from .dataset import CycleRecord, ThermoImage
from .errors import MalformedRecord, TooFewValues
from .haralick import FEATURE_NAMES as HARALICK_NAMES
from .haralick import averaged_haralick, quantize
from .preprocess import downscale_image

STAT_NAMES = ("mean", "median", "std", "min", "max", "q75", "q90",
              "mode", "skewness", "kurtosis")

SOURCE_SIGNAL_RAW = "signal_raw"
SOURCE_SIGNAL_PEAKS = "signal_cwt_peaks"
SOURCE_IMAGE = "image"


@dataclass(frozen=True)
class StatsResult:
    features: dict
    flags: tuple = ()


def order_stats(values) -> StatsResult:
    """The 10 order/shape statistics used throughout descriptor extraction.

    Quantiles interpolate linearly between closest ranks; moments are
    population (1/N) central moments; kurtosis is excess; the mode is the
    center of the tallest bin of a ceil(sqrt(N))-bin histogram, first bin
    winning ties.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        raise TooFewValues(f"need at least 2 values, got {n}")
    flags = []
    mean = float(values.mean())
    centered = values - mean
    m2 = float((centered ** 2).mean())
    if m2 > 0:
        skewness = float((centered ** 3).mean()) / m2 ** 1.5
        kurtosis = float((centered ** 4).mean()) / m2 ** 2 - 3.0
    else:
        skewness = kurtosis = 0.0
        flags.append("zero_variance")
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        mode = lo
    else:
        counts, edges = np.histogram(values, bins=math.ceil(math.sqrt(n)), range=(lo, hi))
        best = int(np.argmax(counts))  # argmax takes the first of tied bins
        mode = float((edges[best] + edges[best + 1]) / 2.0)
    features = {
        "mean": mean,
        "median": float(np.median(values)),
        "std": math.sqrt(m2),
        "min": lo,
        "max": hi,
        "q75": float(np.percentile(values, 75)),
        "q90": float(np.percentile(values, 90)),
        "mode": mode,
        "skewness": skewness,
        "kurtosis": kurtosis,
    }
    return StatsResult(features=features, flags=tuple(flags))


@dataclass(frozen=True)
class DescriptorEntry:
    name: str
    source: str
    channel: str | None = None


@dataclass(frozen=True)
class DescriptorManifest:
    entries: tuple

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("descriptor names must be unique")

    @property
    def names(self) -> list:
        return [e.name for e in self.entries]

    @property
    def hash(self) -> str:
        text = "\n".join(f"{e.name}|{e.source}|{e.channel or ''}" for e in self.entries)
        return hashlib.sha256(text.encode()).hexdigest()

    def columns_for(self, source_prefixes) -> list:
        """Column indices whose source is in the given set."""
        return [i for i, e in enumerate(self.entries) if e.source in source_prefixes]


@dataclass
class FeatureMatrix:
    manifest: DescriptorManifest
    values: np.ndarray        # (n_cycles, n_features)
    cycle_ids: list
    impute_mask: np.ndarray = None  # True where the raw value was a placeholder

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.manifest.entries):
            raise ValueError("feature matrix shape does not match manifest")
        if self.impute_mask is None:
            self.impute_mask = np.zeros(self.values.shape, dtype=bool)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature matrix contains non-finite entries")

    def select(self, column_indices) -> "FeatureMatrix":
        idx = list(column_indices)
        sub = DescriptorManifest(entries=tuple(self.manifest.entries[i] for i in idx))
        return FeatureMatrix(manifest=sub, values=self.values[:, idx],
                             cycle_ids=list(self.cycle_ids),
                             impute_mask=self.impute_mask[:, idx])

    def rows(self, cycle_ids) -> "FeatureMatrix":
        pos = {cid: i for i, cid in enumerate(self.cycle_ids)}
        idx = [pos[cid] for cid in cycle_ids]
        return FeatureMatrix(manifest=self.manifest, values=self.values[idx],
                             cycle_ids=list(cycle_ids), impute_mask=self.impute_mask[idx])


def _snake(channel: str) -> str:
    return re.sub(r"(?<!^)(?=[A-Z])", "_", channel).lower()


def build_manifest(config: PipelineConfig | None = None) -> DescriptorManifest:
    entries = []
    for channel in CHANNELS:
        prefix = _snake(channel)
        for stat in STAT_NAMES:
            entries.append(DescriptorEntry(f"{prefix}.{stat}", SOURCE_SIGNAL_RAW, channel))
        entries.append(DescriptorEntry(f"{prefix}.peaks.count", SOURCE_SIGNAL_PEAKS, channel))
        for stat in STAT_NAMES:
            entries.append(DescriptorEntry(f"{prefix}.peaks.{stat}", SOURCE_SIGNAL_PEAKS, channel))
    for stat in STAT_NAMES:
        entries.append(DescriptorEntry(f"img.{stat}", SOURCE_IMAGE))
    for name in HARALICK_NAMES:
        entries.append(DescriptorEntry(f"img.haralick.{name}", SOURCE_IMAGE))
    return DescriptorManifest(entries=tuple(entries))


def signal_descriptors(record: CycleRecord, peaks_per_channel: dict,
                       config: PipelineConfig) -> tuple:
    """Per-channel raw stats plus peak-count and peak-height stats.

    Channels with fewer than 2 peaks get zero placeholders for the peak
    stats, reported in the returned impute set.
    """
    values = {}
    imputed = set()
    use_positions = config.descriptors.peak_stat_source == "positions"
    for channel in CHANNELS:
        prefix = _snake(channel)
        raw = order_stats(record.trace(channel).samples)
        for stat in STAT_NAMES:
            values[f"{prefix}.{stat}"] = raw.features[stat]
        peaks = peaks_per_channel.get(channel, [])
        values[f"{prefix}.peaks.count"] = float(len(peaks))
        if len(peaks) >= 2:
            samples = [float(p.index) if use_positions else p.height for p in peaks]
            stats = order_stats(samples)
            for stat in STAT_NAMES:
                values[f"{prefix}.peaks.{stat}"] = stats.features[stat]
        else:
            for stat in STAT_NAMES:
                name = f"{prefix}.peaks.{stat}"
                values[name] = 0.0
                imputed.add(name)
    return values, imputed


def image_descriptors(img: ThermoImage, config: PipelineConfig) -> dict:
    """10 pixel order stats plus 14 direction-averaged texture features."""
    values = {}
    stats = order_stats(img.pixels)
    for stat in STAT_NAMES:
        values[f"img.{stat}"] = stats.features[stat]
    hcfg = config.haralick
    source = img if hcfg.full_resolution else downscale_image(
        img, config.nn.image_size, config.nn.image_size)
    qimg = quantize(source, hcfg.levels)
    texture = averaged_haralick(qimg, hcfg.offsets, hcfg.levels)
    for name in HARALICK_NAMES:
        values[f"img.haralick.{name}"] = texture.features[name]
    return values


def extract_record(record: CycleRecord, config: PipelineConfig) -> tuple:
    """All descriptors of one record as (values dict, imputed name set)."""
    peaks = {}
    for channel in config.cwt.peak_channels:
        peaks[channel] = cwt_mod.find_peaks_cwt(
            record.trace(channel).samples, config=config.cwt)
    values, imputed = signal_descriptors(record, peaks, config)
    values.update(image_descriptors(record.image, config))
    return values, imputed


def build_feature_matrix(records, config: PipelineConfig | None = None,
                         manifest: DescriptorManifest | None = None) -> FeatureMatrix:
    config = config or PipelineConfig()
    manifest = manifest or build_manifest(config)
    names = manifest.names
    values = np.zeros((len(records), len(names)))
    mask = np.zeros(values.shape, dtype=bool)
    cycle_ids = []
    for r, record in enumerate(records):
        try:
            row, imputed = extract_record(record, config)
        except Exception as exc:
            raise MalformedRecord(f"extraction failed for cycle "
                                  f"{record.cycle_id}: {exc}") from exc
        for c, name in enumerate(names):
            values[r, c] = row[name]
            mask[r, c] = name in imputed
        cycle_ids.append(record.cycle_id)
    return FeatureMatrix(manifest=manifest, values=values,
                         cycle_ids=cycle_ids, impute_mask=mask)


# -- CSV round trip -------------------------------------------------------------

def export_features(fm: FeatureMatrix, path) -> None:
    """features.csv: cycle_id first, then one column per manifest entry.

    Imputed cells are written as empty cells so the flag survives the file."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cycle_id"] + fm.manifest.names)
        for i, cid in enumerate(fm.cycle_ids):
            row = [cid]
            for j in range(fm.values.shape[1]):
                row.append("" if fm.impute_mask[i, j] else repr(float(fm.values[i, j])))
            writer.writerow(row)


def load_features(path, manifest: DescriptorManifest | None = None) -> FeatureMatrix:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "cycle_id":
            raise MalformedRecord(f"{path}: first column must be cycle_id")
        names = header[1:]
        rows, ids, mask_rows = [], [], []
        for row in reader:
            ids.append(row[0])
            vals, m = [], []
            for cell in row[1:]:
                if cell == "":
                    vals.append(0.0)
                    m.append(True)
                else:
                    vals.append(float(cell))
                    m.append(False)
            rows.append(vals)
            mask_rows.append(m)
    if manifest is None:
        manifest = DescriptorManifest(entries=tuple(
            DescriptorEntry(name, _source_of(name), None) for name in names))
    elif manifest.names != names:
        raise MalformedRecord(f"{path}: columns do not match the expected manifest")
    return FeatureMatrix(manifest=manifest, values=np.array(rows, dtype=float),
                         cycle_ids=ids, impute_mask=np.array(mask_rows, dtype=bool))


def _source_of(name: str) -> str:
    if name.startswith("img."):
        return SOURCE_IMAGE
    if ".peaks." in name or name.endswith(".peaks.count"):
        return SOURCE_SIGNAL_PEAKS
    return SOURCE_SIGNAL_RAW
