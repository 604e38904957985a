"""Synthetic injection-cycle generator with planted, exported ground truth.

Each cycle draws a latent process vector (melt temperature, packing
pressure, injection speed). The part width is a known smooth function of
the latents (linear terms, one interaction, one mild quadratic) plus
Gaussian noise, exported to ground_truth.json so every model score has an
oracle ceiling. Traces are stylized phase curves:

  InMoldPressure     flat baseline with a configurable number of Gaussian
                     pulses, so wavelet peak detection has an exact target
  InMoldTemperature  fast rise then slow cooling, level set by melt temp
  HydraulicPressure  ramp, hold, decay, speed-modulated
  ScrewPosition      monotone advance to a hold position, rate set by speed

The thermal image is a radial cooling field whose amplitude, spread, and
tilt encode the three latents; pixel values are rounded onto the 16-bit
grid so the PGM round trip is bitwise exact.
"""
from __future__ import annotations

import json

import numpy as np

from .config import CHANNELS, SynthConfig, derive_seed
from .dataset import (CycleRecord, DatasetManifest, ManifestEntry, SignalTrace,
                      ThermoImage)
from .errors import BadConfig

WIDTH_INTERCEPT = 100.0
WIDTH_COEFFS = (0.8, -0.5, 0.3, 0.4, 0.25)  # m, p, s, m*p, p^2
BASIS_NAMES = ("melt_n", "pack_n", "speed_n", "melt_x_pack", "pack_sq")


def width_function(melt_n: float, pack_n: float, speed_n: float) -> tuple:
    """(noiseless width, basis vector) for normalized latents."""
    basis = np.array([melt_n, pack_n, speed_n, melt_n * pack_n, pack_n ** 2])
    return WIDTH_INTERCEPT + float(np.array(WIDTH_COEFFS) @ basis), basis


def _jittered_length(rng, base: int, jitter: float) -> int:
    return int(round(base * (1.0 + jitter * rng.uniform(-1.0, 1.0))))


def _pressure_trace(rng, n: int, pack_n: float, speed_n: float,
                    n_peaks: int, noise: float) -> np.ndarray:
    idx = np.arange(n)
    signal = np.zeros(n)
    if n_peaks == 1:
        positions = [0.5]
    else:
        positions = [0.2 + 0.6 * k / (n_peaks - 1) for k in range(n_peaks)]
    amp_scale = 0.6 + 0.4 * (pack_n + 1.0) / 2.0   # in [0.6, 1.0]
    for k, pos in enumerate(positions):
        sigma = 4.0 + 1.0 * k   # well inside the default scale range
        amp = amp_scale * (1.0 - 0.15 * k) * (1.0 + 0.08 * speed_n)
        signal += amp * np.exp(-((idx - pos * n) ** 2) / (2.0 * sigma ** 2))
    # noise std 0.05 * level keeps amplitude within ~1% of range at defaults
    return signal + rng.normal(0.0, noise * 0.05 * amp_scale, n)


def _temperature_trace(rng, n: int, melt_n: float, noise: float) -> np.ndarray:
    tau = np.linspace(0.0, 1.0, n)
    level = 0.8 + 0.2 * melt_n
    curve = level * (0.5 + 0.5 * (1.0 - np.exp(-tau / 0.08)) * np.exp(-1.8 * tau))
    return curve + rng.normal(0.0, noise * 0.05, n)


def _hydraulic_trace(rng, n: int, pack_n: float, speed_n: float,
                     noise: float) -> np.ndarray:
    tau = np.linspace(0.0, 1.0, n)
    level = 0.7 + 0.3 * pack_n
    ramp = 1.0 / (1.0 + np.exp(-(tau - 0.1) / 0.04))
    decay = np.exp(-2.5 * np.maximum(tau - 0.45, 0.0))
    surge = 0.2 * (0.5 + 0.5 * speed_n) * np.exp(-((tau - 0.12) ** 2) / (2 * 0.03 ** 2))
    return level * ramp * decay + surge + rng.normal(0.0, noise * 0.05, n)


def _screw_trace(rng, n: int, speed_n: float, noise: float) -> np.ndarray:
    tau = np.linspace(0.0, 1.0, n)
    rate = 4.0 + 2.5 * speed_n
    curve = 30.0 + 90.0 * np.exp(-tau * rate)
    return curve + rng.normal(0.0, noise * 0.2, n)


def _thermal_image(rng, size: int, melt_n: float, pack_n: float, speed_n: float,
                   noise_level: float) -> ThermoImage:
    y, x = np.mgrid[0:size, 0:size].astype(float)
    cy = cx = (size - 1) / 2.0
    r_sq = (y - cy) ** 2 + (x - cx) ** 2
    base = 6000.0 + 800.0 * pack_n
    amp = 18000.0 + 5000.0 * melt_n
    r0 = (size / 4.6) * (1.0 + 0.22 * pack_n)
    tilt = 900.0 * speed_n
    direction = (x * np.cos(np.pi / 6) + y * np.sin(np.pi / 6)) / size
    counts = base + amp * np.exp(-r_sq / r0 ** 2) + tilt * direction
    counts += rng.normal(0.0, noise_level * 2000.0, counts.shape)
    counts = np.clip(np.round(counts), 0, 65535)
    return ThermoImage(width_px=size, height_px=size, pixels=counts.reshape(-1))


def generate(n_cycles: int | None = None, seed: int = 7,
             noise_level: float | None = None,
             config: SynthConfig | None = None) -> tuple:
    """Build (manifest, records, ground_truth) for a seeded synthetic run."""
    config = config or SynthConfig()
    n_cycles = config.n_cycles if n_cycles is None else n_cycles
    noise_level = config.noise_level if noise_level is None else noise_level
    if n_cycles < 2:
        raise BadConfig(f"n_cycles must be >= 2, got {n_cycles}")
    if noise_level < 0:
        raise BadConfig(f"noise_level must be >= 0, got {noise_level}")
    if config.n_pressure_peaks < 1:
        raise BadConfig("n_pressure_peaks must be >= 1")

    children = np.random.SeedSequence(seed).spawn(n_cycles)
    width_digits = max(3, len(str(n_cycles - 1)))
    records = []
    entries = []
    truth_cycles = {}
    for i in range(n_cycles):
        rng = np.random.default_rng(children[i])
        melt_n = rng.uniform(-1.0, 1.0)
        pack_n = rng.uniform(-1.0, 1.0)
        speed_n = rng.uniform(-1.0, 1.0)
        width_clean, basis = width_function(melt_n, pack_n, speed_n)
        width = width_clean + noise_level * rng.normal()

        lengths = {ch: _jittered_length(rng, config.trace_samples, config.length_jitter)
                   for ch in CHANNELS}
        traces = {
            "InMoldPressure": _pressure_trace(
                rng, lengths["InMoldPressure"], pack_n, speed_n,
                config.n_pressure_peaks, noise_level),
            "InMoldTemperature": _temperature_trace(
                rng, lengths["InMoldTemperature"], melt_n, noise_level),
            "HydraulicPressure": _hydraulic_trace(
                rng, lengths["HydraulicPressure"], pack_n, speed_n, noise_level),
            "ScrewPosition": _screw_trace(
                rng, lengths["ScrewPosition"], speed_n, noise_level),
        }
        traces = {ch: SignalTrace(channel=ch, samples=samples)
                  for ch, samples in traces.items()}
        image = _thermal_image(rng, config.image_size, melt_n, pack_n, speed_n,
                               noise_level)
        cid = f"cycle_{i:0{width_digits}d}"
        records.append(CycleRecord(cycle_id=cid, traces=traces, image=image,
                                   width_mm=width))
        entries.append(ManifestEntry(
            cycle_id=cid, trace_file=f"cycles/{cid}.csv",
            image_file=f"images/{cid}.pgm", width_mm=width))
        truth_cycles[cid] = {
            "melt_n": melt_n, "pack_n": pack_n, "speed_n": speed_n,
            "basis": basis.tolist(), "width_noiseless": width_clean,
            "width_mm": width,
        }

    n_test = max(1, int(round(n_cycles * 27 / 204)))
    manifest = DatasetManifest(
        records=entries,
        split_seed=derive_seed(seed, "split"),
        n_train=n_cycles - n_test,
        n_test=n_test,
    )
    ground_truth = {
        "seed": seed,
        "noise_level": noise_level,
        "intercept": WIDTH_INTERCEPT,
        "coefficients": dict(zip(BASIS_NAMES, WIDTH_COEFFS)),
        "function": "width = 100 + 0.8*melt_n - 0.5*pack_n + 0.3*speed_n "
                    "+ 0.4*melt_n*pack_n + 0.25*pack_n^2 + noise_level*eps",
        "n_pressure_peaks": config.n_pressure_peaks,
        "cycles": truth_cycles,
    }
    return manifest, records, ground_truth


def write_ground_truth(ground_truth: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(ground_truth, fh, indent=2)
        fh.write("\n")


def oracle_matrix(ground_truth: dict, cycle_ids) -> np.ndarray:
    """Planted basis functions per cycle, for the identifiability oracle."""
    return np.array([ground_truth["cycles"][cid]["basis"] for cid in cycle_ids])
