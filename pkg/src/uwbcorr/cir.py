"""Channel impulse response: synthesis, first-path detection, preprocessing.

A raw CIR is 1016 complex accumulator taps, one per nanosecond. The
agent never sees the raw CIR; it sees a 150-sample RSSI window around
the detected first path, min-max normalized into [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CIR_LEN = 1016
TAP_DURATION_S = 1.0e-9
WINDOW_BEFORE = 50
WINDOW_AFTER = 100
WINDOW_LEN = WINDOW_BEFORE + WINDOW_AFTER  # 150

# Valid first-path placements so the preprocessing window stays in bounds.
FP_MIN = WINDOW_BEFORE
FP_MAX = CIR_LEN - WINDOW_AFTER  # exclusive


class NoPathDetected(Exception):
    """No tap rises above the noise floor; the measurement is undecodable."""


class WindowOutOfBounds(Exception):
    """Detected first path too close to a CIR edge for the 150-tap window."""


@dataclass
class RawCir:
    taps: np.ndarray  # (1016,) complex
    tap_duration: float = TAP_DURATION_S
    detected_fp_index: int = -1


@dataclass
class CirSimParams:
    """Knobs for synthetic CIR generation.

    noise_sigma is the RMS amplitude of the complex AWGN (per-component
    std is noise_sigma / sqrt(2)), so a noise_floor of 4x sigma makes
    false early detections rare.
    """

    n_extra_paths: int = 4
    extra_path_amp_range: tuple = (0.1, 0.5)
    extra_path_max_delay_taps: int = 60
    main_amp_range: tuple = (0.8, 1.2)
    attenuated_frac_range: tuple = (0.2, 0.5)
    noise_sigma: float = 0.01
    noise_floor: float = 0.04
    pulse_width_taps: int = 3

    @classmethod
    def with_noise(cls, noise_sigma: float, **kw) -> "CirSimParams":
        floor = 4.0 * noise_sigma if noise_sigma > 0 else 0.04
        return cls(noise_sigma=noise_sigma, noise_floor=floor, **kw)


def iq_to_rssi(taps) -> np.ndarray:
    """RSSI of complex IQ samples: sqrt(I^2 + Q^2), elementwise."""
    return np.abs(np.asarray(taps))


def detect_first_path(rssi: np.ndarray, noise_floor: float) -> int:
    """Leading-edge detection: smallest tap index with rssi > noise_floor."""
    above = np.nonzero(rssi > noise_floor)[0]
    if above.size == 0:
        raise NoPathDetected(f"no tap above noise floor {noise_floor}")
    return int(above[0])


def preprocess(raw: RawCir) -> np.ndarray:
    """150-tap RSSI window around the detected first path, min-max normalized.

    Window covers taps [fp-50, fp+100). A constant window maps to all
    zeros (0/0 := 0) rather than NaN.
    """
    fp = raw.detected_fp_index
    lo, hi = fp - WINDOW_BEFORE, fp + WINDOW_AFTER
    if lo < 0 or hi > CIR_LEN:
        raise WindowOutOfBounds(f"first path at {fp} leaves window [{lo}, {hi})")
    window = iq_to_rssi(raw.taps[lo:hi])
    wmin, wmax = window.min(), window.max()
    span = wmax - wmin
    if span == 0:
        return np.zeros(WINDOW_LEN)
    return (window - wmin) / span


def _pulse(width: int) -> np.ndarray:
    """Causal raised-cosine pulse: unit peak at the arrival tap, decaying tail.

    Causality keeps pulse energy out of taps before the arrival index, so
    leading-edge detection lands exactly on the path's first tap.
    """
    k = np.arange(width)
    return 0.5 * (1.0 + np.cos(np.pi * k / width))


def _add_path(taps: np.ndarray, index: int, amp: float, phase: float, width: int):
    kernel = _pulse(width) * amp * np.exp(1j * phase)
    for off, val in enumerate(kernel):
        i = index + off
        if 0 <= i < taps.size:
            taps[i] += val


def simulate_cir(
    params: CirSimParams,
    fp_tap: int,
    error_taps: int,
    los: bool,
    rng: np.random.Generator,
) -> RawCir:
    """Synthesize a CIR whose leading-edge detection lands at fp_tap + error_taps.

    LOS: a strong component at fp_tap. NLOS: the true first path at
    fp_tap is attenuated below the noise floor while a strong multipath
    component sits error_taps later, reproducing the positive detection
    bias. Later multipath components and complex AWGN are superimposed.
    """
    if not (FP_MIN <= fp_tap < FP_MAX):
        raise ValueError(f"fp_tap must lie in [{FP_MIN}, {FP_MAX})")
    if error_taps < 0:
        raise ValueError("error_taps must be >= 0")

    taps = np.zeros(CIR_LEN, dtype=complex)
    width = params.pulse_width_taps
    detect_tap = fp_tap + (0 if los else error_taps)

    if los:
        amp = rng.uniform(*params.main_amp_range)
        _add_path(taps, fp_tap, amp, rng.uniform(0, 2 * np.pi), width)
    else:
        # Attenuated true first path, below the detection floor.
        weak = params.noise_floor * rng.uniform(*params.attenuated_frac_range)
        _add_path(taps, fp_tap, weak, rng.uniform(0, 2 * np.pi), width)
        amp = rng.uniform(*params.main_amp_range)
        _add_path(taps, detect_tap, amp, rng.uniform(0, 2 * np.pi), width)

    for _ in range(params.n_extra_paths):
        delay = int(rng.integers(width, params.extra_path_max_delay_taps))
        a = amp * rng.uniform(*params.extra_path_amp_range)
        _add_path(taps, detect_tap + delay, a, rng.uniform(0, 2 * np.pi), width)

    if params.noise_sigma > 0:
        s = params.noise_sigma / np.sqrt(2.0)
        taps += rng.normal(0, s, CIR_LEN) + 1j * rng.normal(0, s, CIR_LEN)

    detected = detect_first_path(iq_to_rssi(taps), params.noise_floor)
    return RawCir(taps=taps, detected_fp_index=detected)
