"""Pixel-neighbourhood sequences from grayscale images and maps back to images."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import ConnectivityGraph
from .errors import ValidationError
from .features import FeatureModel
from .signal_model import GrainImage, SeriesEnsemble


@dataclass(frozen=True, eq=False)
class PixelEnsemble:
    """Two-component scan series for every interior pixel.

    Series ``s`` belongs to pixel ``pixel_index[s] = (i, j)`` (column, row);
    component 0 scans along x, component 1 along y, both centred on the pixel.
    """

    ensemble: SeriesEnsemble
    pixel_index: np.ndarray
    margin: int
    width: int
    height: int

    @property
    def interior_shape(self) -> tuple:
        """(rows, columns) of the interior grid."""
        return self.height - 2 * self.margin, self.width - 2 * self.margin

    def series_at(self, i: int, j: int) -> int:
        rows, cols = self.interior_shape
        if not (self.margin <= i < self.margin + cols and self.margin <= j < self.margin + rows):
            raise ValidationError(f"pixel ({i}, {j}) is not interior")
        return (j - self.margin) * cols + (i - self.margin)


def pixel_profiles(image: GrainImage, d: int, demean: bool = True) -> PixelEnsemble:
    """Brightness along x and y through each pixel with a full window of d+1 samples.

    With ``demean`` each scan window has its mean removed, which keeps the
    constant background from dominating the decomposition.
    """
    if d < 2 or d % 2:
        raise ValidationError("d must be a positive even integer")
    P = image.pixels
    H, W = P.shape
    if W <= d or H <= d:
        raise ValidationError(f"image {W}x{H} too small for d = {d}")
    m = d // 2
    xs = np.lib.stride_tricks.sliding_window_view(P, d + 1, axis=1)[m:H - m]
    ys = np.lib.stride_tricks.sliding_window_view(P, d + 1, axis=0)[:, m:W - m]
    series = np.stack([xs, ys], axis=-1).reshape(-1, d + 1, 2)
    if demean:
        series = series - series.mean(axis=1, keepdims=True)
    jj, ii = np.mgrid[m:H - m, m:W - m]
    index = np.stack([ii.ravel(), jj.ravel()], axis=1)
    labels = None
    if image.region_labels is not None:
        labels = image.region_labels[m:H - m, m:W - m].ravel()
    ens = SeriesEnsemble(series.astype(complex), labels=labels)
    return PixelEnsemble(ens, index, m, W, H)


def pixel_connectivity(pixels: PixelEnsemble, neighborhood: int = 4) -> ConnectivityGraph:
    """Edges between interior pixels that touch (4- or 8-neighbourhood)."""
    if neighborhood not in (4, 8):
        raise ValidationError("neighborhood must be 4 or 8")
    rows, cols = pixels.interior_shape
    ids = np.arange(rows * cols).reshape(rows, cols)
    pairs = [
        (ids[:, :-1], ids[:, 1:]),
        (ids[:-1, :], ids[1:, :]),
    ]
    if neighborhood == 8:
        pairs += [(ids[:-1, :-1], ids[1:, 1:]), (ids[:-1, 1:], ids[1:, :-1])]
    edges = np.concatenate([np.stack([a.ravel(), b.ravel()], axis=1) for a, b in pairs])
    return ConnectivityGraph(rows * cols, edges)


def _to_image(values: np.ndarray, pixels: PixelEnsemble, fill=0) -> np.ndarray:
    out = np.full((pixels.height, pixels.width), fill, dtype=values.dtype)
    i, j = pixels.pixel_index[:, 0], pixels.pixel_index[:, 1]
    out[j, i] = values
    return out


def mode_map(model: FeatureModel, Q: np.ndarray, pixels: PixelEnsemble,
             eigenvalue_index: int) -> tuple:
    """(x-direction map, y-direction map) of ``|Q|`` for one eigenvector.

    Both maps share the row maximum as normaliser; border pixels are 0.
    """
    Q = np.asarray(Q)
    if Q.shape[0] != model.rank or Q.shape[1] != 2 * pixels.ensemble.N:
        raise ValidationError("Q does not match the model and pixel ensemble")
    if not 0 <= eigenvalue_index < model.rank:
        raise ValidationError(f"eigenvalue index {eigenvalue_index} out of range")
    row = np.abs(Q[eigenvalue_index])
    peak = row.max()
    row = row / peak if peak > 0 else row
    return _to_image(row[0::2], pixels, 0.0), _to_image(row[1::2], pixels, 0.0)


def label_map(labels, pixels: PixelEnsemble) -> np.ndarray:
    """Integer image of cluster labels; border pixels get 0."""
    labels = np.asarray(labels)
    if labels.shape != (pixels.ensemble.N,):
        raise ValidationError("one label per interior pixel required")
    return _to_image(labels.astype(np.int64), pixels, 0)


def nearest_eigenvalue(eigenvalues, cycles_per_pixel: float) -> int:
    """Index of the eigenvalue closest to ``exp(2 pi i f)``."""
    target = np.exp(2j * np.pi * cycles_per_pixel)
    return int(np.argmin(np.abs(np.asarray(eigenvalues) - target)))
