"""2-D frequency-domain filtering and edge-emphasis weight masks.

The transform pair is unitary (1/sqrt(N) each way), so round-trips are exact
to float precision and Parseval holds. Power-of-two sizes use an iterative
radix-2 kernel; everything else falls back to a direct DFT matrix product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

UNIFORM_FALLBACK_THRESHOLD = 1e-9
DEFAULT_RADIUS = 0.1


@dataclass
class Spectrum:
    """Complex H x W frequency plane; `dc_centered` tracks the bin layout."""

    data: np.ndarray
    dc_centered: bool = False

    @property
    def shape(self):
        return self.data.shape


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _fft_radix2(rows: np.ndarray, sign: float) -> np.ndarray:
    """Iterative radix-2 transform along the last axis of a 2-D complex array."""
    m, n = rows.shape
    if n == 1:
        return rows.copy()
    # bit-reversal permutation
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    bits = n.bit_length() - 1
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    out = rows[:, rev].astype(np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        blocks = out.reshape(m, n // size, size)
        even = blocks[:, :, :half].copy()
        odd = blocks[:, :, half:] * tw
        blocks[:, :, :half] = even + odd
        blocks[:, :, half:] = even - odd
        size *= 2
    return out


def _dft_direct(rows: np.ndarray, sign: float) -> np.ndarray:
    n = rows.shape[1]
    j = np.arange(n)
    w = np.exp(sign * 2j * np.pi * np.outer(j, j) / n)
    return rows @ w


def _transform_axis(data: np.ndarray, sign: float) -> np.ndarray:
    """Unitary 1-D transform along the last axis."""
    n = data.shape[-1]
    rows = data.reshape(-1, n)
    out = _fft_radix2(rows, sign) if _is_pow2(n) else _dft_direct(rows, sign)
    return (out / np.sqrt(n)).reshape(data.shape)


def _transform2d(field: np.ndarray, sign: float) -> np.ndarray:
    out = _transform_axis(field.astype(np.complex128), sign)
    out = _transform_axis(out.swapaxes(0, 1), sign).swapaxes(0, 1)
    return out


def fft2d(field: np.ndarray) -> Spectrum:
    """Forward 2-D transform of a real H x W field."""
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise ShapeError(f"fft2d expects a 2-D field, got shape {field.shape}")
    if not np.all(np.isfinite(field)):
        raise FloatingPointError("fft2d: non-finite input")
    return Spectrum(_transform2d(field, -1.0), dc_centered=False)


def ifft2d(spec: Spectrum) -> np.ndarray:
    """Inverse transform back to a real field (imaginary part discarded)."""
    return ifft2d_complex(spec).real


def ifft2d_complex(spec: Spectrum) -> np.ndarray:
    data = spec.data
    if spec.dc_centered:
        data = _uncenter(data)
    return _transform2d(data, +1.0)


def _center(data: np.ndarray) -> np.ndarray:
    h, w = data.shape
    return np.roll(np.roll(data, h // 2, axis=0), w // 2, axis=1)


def _uncenter(data: np.ndarray) -> np.ndarray:
    h, w = data.shape
    return np.roll(np.roll(data, -(h // 2), axis=0), -(w // 2), axis=1)


def center_dc(spec: Spectrum) -> Spectrum:
    if spec.dc_centered:
        return spec
    return Spectrum(_center(spec.data), dc_centered=True)


def highpass_apply(spec: Spectrum, r: float) -> Spectrum:
    """Zero every bin within radius r (fraction of the Nyquist radius) of DC."""
    if r < 0:
        raise ValueError(f"radius must be nonnegative, got {r}")
    spec = center_dc(spec)
    h, w = spec.data.shape
    cy, cx = h // 2, w // 2
    yy, xx = np.ogrid[:h, :w]
    dist2 = (yy - cy) ** 2 + (xx - cx) ** 2
    cutoff = r * min(h, w) / 2.0
    out = spec.data.copy()
    out[dist2 <= cutoff * cutoff] = 0.0
    return Spectrum(out, dc_centered=True)


def hpf_weight_map(det_frame: np.ndarray, r: float = DEFAULT_RADIUS) -> np.ndarray:
    """Per-pixel weights emphasizing edges of the detected regions in a frame.

    High-pass filter the frame in the frequency domain, reconstruct, take the
    magnitude, and normalize the maximum to one. A near-constant frame has no
    edge content, so it degrades to a uniform all-ones mask to keep weighted
    losses well defined.
    """
    spec = highpass_apply(center_dc(fft2d(det_frame)), r)
    mag = np.abs(ifft2d_complex(spec))
    peak = float(mag.max())
    if peak < UNIFORM_FALLBACK_THRESHOLD:
        return np.ones_like(mag)
    return mag / (peak + 1e-12)


def hpf_weight_map_stack(frames: np.ndarray, r: float = DEFAULT_RADIUS) -> np.ndarray:
    """`hpf_weight_map` applied to a [F, H, W] stack in one vectorized pass."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 3:
        raise ShapeError(f"expected a [F, H, W] stack, got shape {frames.shape}")
    f, h, w = frames.shape
    spec = _transform_axis(frames.astype(np.complex128), -1.0)
    spec = _transform_axis(spec.swapaxes(1, 2), -1.0).swapaxes(1, 2)
    cy, cx = h // 2, w // 2
    yy, xx = np.ogrid[:h, :w]
    centered_dist2 = (yy - cy) ** 2 + (xx - cx) ** 2
    cutoff = r * min(h, w) / 2.0
    keep = np.roll(np.roll(centered_dist2 > cutoff * cutoff, -cy, axis=0), -cx, axis=1)
    spec *= keep  # same bins as highpass_apply, expressed in uncentered layout
    rec = _transform_axis(spec, +1.0)
    rec = _transform_axis(rec.swapaxes(1, 2), +1.0).swapaxes(1, 2)
    mag = np.abs(rec)
    peaks = mag.reshape(f, -1).max(axis=1)
    out = np.empty_like(mag)
    for i in range(f):
        if peaks[i] < UNIFORM_FALLBACK_THRESHOLD:
            out[i] = 1.0
        else:
            out[i] = mag[i] / (peaks[i] + 1e-12)
    return out


def combine_filters(w_student: np.ndarray, w_teacher: np.ndarray, mode: str) -> np.ndarray:
    """Pick or average the per-pixel weight masks from the two models."""
    w_student = np.asarray(w_student, dtype=np.float64)
    w_teacher = np.asarray(w_teacher, dtype=np.float64)
    if w_student.shape != w_teacher.shape:
        raise ShapeError(f"combine_filters: shapes {w_student.shape} vs {w_teacher.shape}")
    if mode == "student":
        return w_student
    if mode == "teacher":
        return w_teacher
    if mode == "mean":
        return 0.5 * (w_student + w_teacher)
    raise ValueError(f"unknown filter combination mode '{mode}'")


def write_pgm(path, field: np.ndarray):
    """Dump a [0, 1] field as a binary 8-bit PGM image for visual inspection."""
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise ShapeError(f"write_pgm expects a 2-D field, got shape {field.shape}")
    pixels = np.clip(np.rint(field * 255.0), 0, 255).astype(np.uint8)
    h, w = field.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
