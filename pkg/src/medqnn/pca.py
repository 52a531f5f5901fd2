"""Principal component analysis on flattened images.

The top-k eigenpairs of the pixel covariance are found by orthogonal
subspace iteration with a fixed canonical start basis, so a fit is a pure
deterministic function of the input bytes. k is tiny (4 in every
experiment) which keeps the iteration cheap even on the 784 x 784
covariance of 28 x 28 images.

Component signs are fixed by making each row's largest-magnitude entry
positive. Explained-variance ratios divide by the covariance trace, which
equals the sum of all eigenvalues without computing them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

_MAX_ITER = 5000
_TOL = 1e-10
# fit() sanity guard; noise-injected images can leave [0, 1] but only
# clean training pixels ever reach fit.
_PIXEL_LO, _PIXEL_HI = -0.5, 1.5

MAGIC = "PCA1"


@dataclass(frozen=True)
class PcaModel:
    input_dim: int
    k: int
    mean: np.ndarray                      # (input_dim,)
    components: np.ndarray                # (k, input_dim), rows orthonormal
    explained_variance_ratio: np.ndarray  # (k,), non-increasing


def fit(images: np.ndarray, k: int) -> PcaModel:
    """Fit a top-k model on rows of ``images`` (m x input_dim)."""
    images = np.asarray(images, dtype=float)
    if images.ndim != 2:
        raise ValueError(f"expected a 2-d sample matrix, got shape {images.shape}")
    m, dim = images.shape
    if k < 1:
        raise ValueError("k must be >= 1")
    if m <= k:
        raise DataError(f"need more than k={k} samples to fit, got {m}")
    if not np.all(np.isfinite(images)):
        raise DataError("non-finite pixel values in fit input")
    if images.min() < _PIXEL_LO or images.max() > _PIXEL_HI:
        raise DataError(
            f"pixel values outside [{_PIXEL_LO}, {_PIXEL_HI}]; normalize to [0, 1] before fit"
        )

    mean = images.mean(axis=0)
    centered = images - mean
    cov = (centered.T @ centered) / (m - 1)

    basis = np.eye(dim)[:, :k]  # deterministic canonical start
    for _ in range(_MAX_ITER):
        product = cov @ basis
        new_basis, _ = np.linalg.qr(product)
        overlap = basis.T @ new_basis
        residual = new_basis - basis @ overlap  # part outside the old subspace
        basis = new_basis
        if np.abs(residual).max() < _TOL:
            break

    # Rayleigh-Ritz rotation inside the converged subspace gives the
    # individual eigenpairs, ordered by descending eigenvalue.
    small = basis.T @ cov @ basis
    small = 0.5 * (small + small.T)
    eigvals, eigvecs = np.linalg.eigh(small)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    components = (basis @ eigvecs[:, order]).T  # (k, dim)

    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0

    total_variance = np.trace(cov)
    ratios = eigvals / total_variance
    return PcaModel(
        input_dim=dim,
        k=k,
        mean=mean,
        components=components,
        explained_variance_ratio=ratios,
    )


def transform(model: PcaModel, image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=float)
    if image.shape[-1] != model.input_dim:
        raise ValueError(f"expected length {model.input_dim}, got {image.shape[-1]}")
    if not np.all(np.isfinite(image)):
        raise DataError("non-finite values in transform input")
    return (image - model.mean) @ model.components.T


def inverse_transform(model: PcaModel, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    if features.shape[-1] != model.k:
        raise ValueError(f"expected length {model.k}, got {features.shape[-1]}")
    if not np.all(np.isfinite(features)):
        raise DataError("non-finite values in inverse_transform input")
    return model.mean + features @ model.components


def save(model: PcaModel, path: str | Path) -> None:
    payload = {
        "magic": MAGIC,
        "input_dim": model.input_dim,
        "k": model.k,
        "mean": model.mean.tolist(),
        "components": model.components.tolist(),
        "explained_variance_ratio": model.explained_variance_ratio.tolist(),
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load(path: str | Path) -> PcaModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read PCA model from {path}: {exc}") from exc
    if payload.get("magic") != MAGIC:
        raise DataError(f"{path} is not a {MAGIC} model file")
    return PcaModel(
        input_dim=int(payload["input_dim"]),
        k=int(payload["k"]),
        mean=np.array(payload["mean"], dtype=float),
        components=np.array(payload["components"], dtype=float),
        explained_variance_ratio=np.array(payload["explained_variance_ratio"], dtype=float),
    )
