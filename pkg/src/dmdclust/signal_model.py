"""Ground-truth damped-sinusoid models and synthetic data generators.

All randomness goes through :func:`numpy.random.default_rng`, i.e. the PCG64
bit generator seeded with the integer ``seed``.  Fixtures meant to be shared
with other implementations should be exported as ensemble CSV rather than
regenerated from the stream.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError

# Toy experiment constants (four angular frequencies, 6/6/11 split).
TOY_OMEGA_A = 1.0
TOY_OMEGA_B = 1.7
TOY_OMEGA_C = 0.8
TOY_OMEGA_D = 1.5
TOY_SIGMA = 0.1
TOY_LENGTH = 20
TOY_GROUP_SIZES = (6, 6, 11)


@dataclass(frozen=True, eq=False)
class DampedSinusoidModel:
    """``x(t) = sum_j modes[j] * frequencies[j] ** t`` with ``modes[j]`` in C^n."""

    modes: np.ndarray
    frequencies: np.ndarray

    def __init__(self, modes, frequencies):
        freqs = np.atleast_1d(np.asarray(frequencies, dtype=complex))
        vs = np.asarray(modes, dtype=complex)
        if freqs.size == 0 or vs.size == 0:
            raise ValidationError("empty model")
        if freqs.ndim != 1:
            raise ValidationError("frequencies must be one-dimensional")
        if vs.ndim == 1:
            # one scalar coefficient per term (n = 1)
            vs = vs.reshape(-1, 1) if vs.shape[0] == freqs.shape[0] else vs.reshape(1, -1)
        if vs.ndim != 2 or vs.shape[0] != freqs.shape[0] or vs.shape[1] < 1:
            raise ValidationError(
                f"modes shape {vs.shape} incompatible with {freqs.shape[0]} frequencies"
            )
        object.__setattr__(self, "modes", vs)
        object.__setattr__(self, "frequencies", freqs)

    @property
    def R(self) -> int:
        return self.frequencies.shape[0]

    @property
    def n(self) -> int:
        return self.modes.shape[1]

    @property
    def is_real(self) -> bool:
        return not (np.any(self.modes.imag) or np.any(self.frequencies.imag))

    def evaluate(self, times) -> np.ndarray:
        """Noise-free samples ``x(t)`` for each ``t`` in ``times``, shape (len(times), n)."""
        t = np.asarray(times)
        powers = self.frequencies[None, :] ** t[:, None]
        return powers @ self.modes


@dataclass
class SeriesEnsemble:
    """N sequences of n-dimensional complex samples, stored as an (N, T+1, n) array."""

    series: np.ndarray
    labels: Optional[np.ndarray] = None
    noise_sigma: float = 0.0
    models: Optional[list] = field(default=None, repr=False)

    def __post_init__(self):
        arr = np.asarray(self.series)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValidationError("ragged or malformed ensemble")
        self.series = arr.astype(complex, copy=False)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (arr.shape[0],):
                raise ValidationError("one label per series required")
            self.labels = labels
        if self.models is not None and len(self.models) != arr.shape[0]:
            raise ValidationError("one model per series required")

    @property
    def N(self) -> int:
        return self.series.shape[0]

    @property
    def length(self) -> int:
        return self.series.shape[1]

    @property
    def n(self) -> int:
        return self.series.shape[2]

    def partitions(self) -> dict:
        """Map each label to the sorted indices (0-based) of its series."""
        if self.labels is None:
            return {}
        return {lab: np.flatnonzero(self.labels == lab) for lab in np.unique(self.labels)}


@dataclass
class GrainImage:
    """Grayscale image with brightness in [0, 1].

    ``pixels[j, i]`` is the brightness P_ij of the pixel in column ``i`` (x) and
    row ``j`` (y).
    """

    pixels: np.ndarray
    region_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 2:
            raise ValidationError("image must be two-dimensional")
        if not np.all(np.isfinite(px)) or px.min(initial=0.0) < 0.0 or px.max(initial=0.0) > 1.0:
            raise ValidationError("brightness must be finite and within [0, 1]")
        self.pixels = px
        if self.region_labels is not None:
            rl = np.asarray(self.region_labels)
            if rl.shape != px.shape:
                raise ValidationError("region_labels must match the image shape")
            self.region_labels = rl

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def synthesize(model: DampedSinusoidModel, t_count: int, noise_sigma: float = 0.0,
               seed: Optional[int] = None, real_part_only: bool = False,
               rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Sample ``y(t) = x(t) + s(t)`` for ``t = 0 .. t_count-1``; returns (t_count, n).

    Noise is real when ``real_part_only`` is set or the model is real-valued,
    otherwise independent Gaussians of deviation ``noise_sigma`` are added to
    the real and imaginary parts.
    """
    if t_count < 1:
        raise ValidationError("t_count must be at least 1")
    if noise_sigma < 0:
        raise ValidationError("noise_sigma must be nonnegative")
    x = model.evaluate(np.arange(t_count))
    if real_part_only:
        x = x.real.astype(complex)
    if noise_sigma > 0:
        rng = rng if rng is not None else np.random.default_rng(seed)
        noise = rng.normal(0.0, noise_sigma, size=x.shape)
        if not (real_part_only or model.is_real):
            noise = noise + 1j * rng.normal(0.0, noise_sigma, size=x.shape)
        x = x + noise
    return x


def sample_annulus(rng: np.random.Generator, size, r_min: float = 1.0,
                   r_max: float = 2.0) -> np.ndarray:
    """Complex numbers with modulus uniform on [r_min, r_max] and uniform phase."""
    modulus = rng.uniform(r_min, r_max, size=size)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=size)
    return modulus * np.exp(1j * phase)


def make_toy_ensemble(seed: int, noise_sigma: float = TOY_SIGMA) -> SeriesEnsemble:
    """23 real 1-D signals: six at omega_A, six at omega_B, eleven mixing omega_C and omega_D.

    Coefficients are drawn before any noise so that the clean signal for a
    given seed does not depend on ``noise_sigma``.
    """
    rng = np.random.default_rng(seed)
    n_a, n_b, n_cd = TOY_GROUP_SIZES
    alpha = sample_annulus(rng, n_a + n_b + n_cd)
    beta = sample_annulus(rng, n_cd)
    models = []
    for i in range(n_a):
        models.append(DampedSinusoidModel([alpha[i]], [np.exp(1j * TOY_OMEGA_A)]))
    for i in range(n_a, n_a + n_b):
        models.append(DampedSinusoidModel([alpha[i]], [np.exp(1j * TOY_OMEGA_B)]))
    for k, i in enumerate(range(n_a + n_b, n_a + n_b + n_cd)):
        models.append(DampedSinusoidModel(
            [alpha[i], beta[k]], [np.exp(1j * TOY_OMEGA_C), np.exp(1j * TOY_OMEGA_D)]))
    series = np.stack([synthesize(m, TOY_LENGTH, real_part_only=True) for m in models])
    if noise_sigma > 0:
        series = series + rng.normal(0.0, noise_sigma, size=series.shape)
    labels = np.repeat([1, 2, 3], TOY_GROUP_SIZES)
    return SeriesEnsemble(series, labels=labels, noise_sigma=noise_sigma, models=models)


def toy_true_eigenvalues() -> np.ndarray:
    """The eight discrete-time eigenvalues exp(+-i omega) of the toy signals."""
    omegas = np.array([TOY_OMEGA_A, TOY_OMEGA_B, TOY_OMEGA_C, TOY_OMEGA_D])
    return np.concatenate([np.exp(1j * omegas), np.exp(-1j * omegas)])


# ---------------------------------------------------------------------------
# synthetic lattice images

HARMONIC_WEIGHT = 0.4


@dataclass(frozen=True)
class LatticeRegion:
    """A polygonal region filled with a row pattern of the given orientation.

    The pattern is two collinear gratings, the fundamental of ``period`` pixels
    along the direction ``orientation`` (degrees from the x axis) and its
    second harmonic, which sharpens the rows.  A scan along x therefore sees
    frequencies ``cos(theta)/period`` and twice that, a scan along y
    ``sin(theta)/period`` and twice that.  ``harmonic`` is the weight of the
    second harmonic (0 gives a plain sinusoid); ``amplitude`` 0 gives a
    featureless region.
    """

    polygon: tuple
    orientation: float = 0.0
    period: float = 16.0
    amplitude: float = 0.3
    phase: float = 0.0
    harmonic: float = HARMONIC_WEIGHT

    def wavevector(self) -> np.ndarray:
        theta = np.deg2rad(self.orientation)
        return np.array([np.cos(theta), np.sin(theta)]) / self.period

    def scan_frequencies(self) -> tuple:
        """(x-scan, y-scan) frequencies in cycles per pixel, zeros dropped."""
        if self.amplitude == 0:
            return (), ()
        kx, ky = np.abs(self.wavevector())
        orders = [o for o, w in ((1, 1 - self.harmonic), (2, self.harmonic)) if w]
        fx = () if np.isclose(kx, 0.0, atol=1e-12) else tuple(o * kx for o in orders)
        fy = () if np.isclose(ky, 0.0, atol=1e-12) else tuple(o * ky for o in orders)
        return fx, fy


def _inside_polygon(px: np.ndarray, py: np.ndarray, polygon) -> np.ndarray:
    # crossing-number test; half-open edge rule so shared edges split cleanly
    poly = np.asarray(polygon, dtype=float)
    inside = np.zeros(px.shape, dtype=bool)
    x1, y1 = poly[:, 0], poly[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    for a, b, c, e in zip(x1, y1, x2, y2):
        if b == e:
            continue
        crosses = (b > py) != (e > py)
        x_int = a + (py - b) * (c - a) / (e - b)
        inside ^= crosses & (px < x_int)
    return inside


def make_lattice_image(width: int, height: int, regions: Sequence, noise_sigma: float = 0.0,
                       seed: Optional[int] = None) -> GrainImage:
    """Render ``regions`` (LatticeRegion or dicts of the same fields) into an image.

    Pixel centres at (i + 0.5, j + 0.5) decide region membership; every pixel
    must fall in exactly one polygon.
    """
    regions = [r if isinstance(r, LatticeRegion) else LatticeRegion(**r) for r in regions]
    if not regions or width < 1 or height < 1:
        raise ValidationError("invalid region spec")
    jj, ii = np.mgrid[0:height, 0:width]
    cx, cy = ii + 0.5, jj + 0.5
    labels = np.zeros((height, width), dtype=int)
    counts = np.zeros((height, width), dtype=int)
    for idx, reg in enumerate(regions, start=1):
        if reg.period < 4:
            raise ValidationError("invalid region spec: period must be at least 4 px")
        if len(reg.polygon) < 3:
            raise ValidationError("invalid region spec: polygon needs 3 vertices")
        mask = _inside_polygon(cx, cy, reg.polygon)
        counts += mask
        labels[mask] = idx
    if np.any(counts != 1):
        raise ValidationError("invalid region spec")

    pixels = np.full((height, width), 0.5)
    for idx, reg in enumerate(regions, start=1):
        mask = labels == idx
        kx, ky = reg.wavevector()
        phi = 2 * np.pi * (kx * ii[mask] + ky * jj[mask]) + reg.phase
        pattern = (1 - reg.harmonic) * np.cos(phi) + reg.harmonic * np.cos(2 * phi)
        pixels[mask] += reg.amplitude * pattern
    if noise_sigma > 0:
        pixels += np.random.default_rng(seed).normal(0.0, noise_sigma, size=pixels.shape)
    return GrainImage(np.clip(pixels, 0.0, 1.0), region_labels=labels)


LATTICE_SIGMA = 0.02
# tilt that makes the y-scan period exactly 1.5 times the x-scan period
ROW_PAIR_TILT = float(np.degrees(np.arctan2(2.0, 3.0)))


def _rect(x0, x1, y0, y1) -> tuple:
    return ((x0, y0), (x1, y0), (x1, y1), (x0, y1))


def _from_wavevector(polygon, kx: float, ky: float, **kw) -> LatticeRegion:
    return LatticeRegion(polygon, float(np.degrees(np.arctan2(ky, kx))),
                         float(1.0 / np.hypot(kx, ky)), **kw)


def row_pair_region(polygon, x_period: float = 19.0, **kw) -> LatticeRegion:
    """Region whose y-scan period is 1.5 times its x-scan period ``x_period``."""
    theta = np.deg2rad(ROW_PAIR_TILT)
    return LatticeRegion(polygon, ROW_PAIR_TILT, x_period * np.cos(theta), **kw)


def six_region_layout(width: int = 200, height: int = 200) -> list:
    """Three columns by two rows of regions: four lattices and two featureless
    regions on a diagonal.  The top-middle region is a :func:`row_pair_region`.

    Scan frequencies are chosen to be mutually distinct and at least about one
    DFT bin of a 51-sample window apart.
    """
    xa, xb, ym = round(0.375 * width), round(0.625 * width), round(0.5 * height)
    return [
        _from_wavevector(_rect(0, xa, 0, ym), 0.15, 0.0),
        row_pair_region(_rect(xa, xb, 0, ym)),
        LatticeRegion(_rect(xb, width, 0, ym), amplitude=0.0),
        LatticeRegion(_rect(0, xa, ym, height), amplitude=0.0),
        _from_wavevector(_rect(xa, xb, ym, height), 0.0, 0.175),
        _from_wavevector(_rect(xb, width, ym, height), 0.2, 0.125),
    ]


def row_pair_layout(width: int = 200, height: int = 200) -> list:
    """A :func:`row_pair_region` band over the top 65% of the image above a
    band with vertical grating.  The only boundary is horizontal, so x scans in
    the first region never leave it."""
    yb = round(0.65 * height)
    return [
        row_pair_region(_rect(0, width, 0, yb)),
        _from_wavevector(_rect(0, width, yb, height), 0.0, 0.175),
    ]


def distinct_scan_frequencies(regions) -> np.ndarray:
    """Sorted distinct nonzero scan frequencies (cycles/px) over both directions."""
    found = []
    for reg in regions:
        reg = reg if isinstance(reg, LatticeRegion) else LatticeRegion(**reg)
        for f in (*reg.scan_frequencies()[0], *reg.scan_frequencies()[1]):
            if not any(abs(f - g) < 1e-9 for g in found):
                found.append(float(f))
    return np.array(sorted(found))


def lattice_model_rank(regions) -> int:
    """Exponential count of the noise-free scan data: a conjugate pair per
    distinct frequency plus one for the constant (background or window mean)."""
    return 2 * distinct_scan_frequencies(regions).size + 1


# ---------------------------------------------------------------------------
# ESPRIT factor matrices

def esprit_factors(model: DampedSinusoidModel, d: int, times) -> tuple:
    """Factor matrices with ``X = A @ B.T`` for the delay matrix sampled at ``times``.

    ``A`` is ((d+1)n, R) with column j stacking ``v_j/|v_j| * lambda_j**k`` for
    k = 0..d; ``B`` is (M, R) with ``B[m, j] = |v_j| * lambda_j**times[m]``.
    """
    if d < 0:
        raise ValidationError("d must be nonnegative")
    norms = np.linalg.norm(model.modes, axis=1)
    if np.any(norms == 0):
        raise ValidationError("degenerate mode")
    unit = model.modes / norms[:, None]
    k = np.arange(d + 1)
    powers = model.frequencies[None, :] ** k[:, None]  # (d+1, R)
    # rows ordered block-by-delay, component within block
    A = (powers[:, None, :] * unit.T[None, :, :]).reshape((d + 1) * model.n, model.R)
    t = np.asarray(times)
    B = norms[None, :] * model.frequencies[None, :] ** t[:, None]
    return A, B
