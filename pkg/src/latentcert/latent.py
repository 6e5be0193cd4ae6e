"""Gaussian latent-space models and reproducible sampling.

The model stands in for a learnt encoding distribution over R^k. Sampling is
driven by a counter-based generator (Philox) keyed on ``(seed, stream_index)``,
so substreams are independent by construction and every draw is a pure
function of the stream address: the same address always reproduces the same
bytes, across processes and worker counts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import jsonio
from .errors import FormatError, ValidationError

_LOG_TWO_PI = math.log(2.0 * math.pi)
_U64 = 2**64


@dataclass(frozen=True)
class SampleStream:
    """Address of one reproducible random substream.

    ``seed`` selects the experiment-level stream family; ``stream_index``
    selects a substream within it. Parallel consumers must use distinct
    stream indices.
    """

    seed: int = 0
    stream_index: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) < _U64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not (0 <= int(self.stream_index) < _U64):
            raise ValueError(f"stream_index must be a non-negative 64-bit integer, got {self.stream_index}")

    def substream(self, offset: int) -> "SampleStream":
        return SampleStream(self.seed, self.stream_index + offset)

    def _key(self) -> int:
        # 128-bit Philox key: distinct (seed, stream_index) pairs never collide.
        return (int(self.stream_index) << 64) | int(self.seed)


def _standard_uniforms(stream: SampleStream, count: int) -> np.ndarray:
    """First ``count`` doubles of the stream, strictly inside (0, 1)."""
    gen = np.random.Generator(np.random.Philox(key=stream._key()))
    raw = gen.integers(0, _U64, size=count, dtype=np.uint64)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


@dataclass(frozen=True)
class GaussianLatentModel:
    """Multivariate Gaussian over R^k with a cached Cholesky factor.

    ``cov`` is either the variance vector (``diagonal=True``) or the full
    k-by-k covariance matrix. Instances are immutable after construction and
    safe to share across threads.
    """

    dim: int
    mean: np.ndarray
    cov: np.ndarray
    diagonal: bool
    label: str = ""

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValidationError(f"dim must be >= 1, got {self.dim}")
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.shape != (self.dim,):
            raise ValidationError(f"mean must have length {self.dim}, got shape {mean.shape}")
        if not np.all(np.isfinite(mean)):
            raise ValidationError("mean contains non-finite entries")
        if not np.all(np.isfinite(cov)):
            raise ValidationError("covariance contains non-finite entries")
        if self.diagonal:
            if cov.shape != (self.dim,):
                raise ValidationError(f"diagonal covariance must have length {self.dim}, got shape {cov.shape}")
            if np.any(cov <= 0.0):
                raise ValidationError("covariance is not positive definite: non-positive diagonal entry")
            scale = np.sqrt(cov)
            log_det = float(np.sum(np.log(cov)))
            chol = None
        else:
            if cov.shape != (self.dim, self.dim):
                raise ValidationError(f"covariance must be {self.dim}x{self.dim}, got shape {cov.shape}")
            if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(cov).max()))):
                raise ValidationError("covariance is not symmetric")
            try:
                chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as exc:
                raise ValidationError("covariance is not positive definite: Cholesky factorization failed") from exc
            scale = None
            log_det = float(2.0 * np.sum(np.log(np.diag(chol))))

        for name, arr in (("mean", mean), ("cov", cov)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if chol is not None:
            chol.setflags(write=False)
        if scale is not None:
            scale.setflags(write=False)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_scale", scale)
        object.__setattr__(self, "_log_det", log_det)

    @classmethod
    def standard(cls, dim: int, label: str = "standard-normal") -> "GaussianLatentModel":
        """Zero-mean, identity-covariance model (stored diagonally)."""
        return cls(dim=dim, mean=np.zeros(dim), cov=np.ones(dim), diagonal=True, label=label)

    def covariance_matrix(self) -> np.ndarray:
        return np.diag(self.cov) if self.diagonal else np.array(self.cov)

    def cholesky_factor(self) -> np.ndarray:
        return np.diag(self._scale) if self.diagonal else np.array(self._chol)


def load_model(path) -> GaussianLatentModel:
    """Load a latent model from its JSON interchange file.

    Expected fields: ``dim`` (int), ``mean`` (list of floats), ``cov_type``
    ("diag" or "full"), ``cov`` (vector or matrix), ``label`` (string).
    Structural problems raise :class:`FormatError` naming the offending
    field; a non-positive-definite covariance raises :class:`ValidationError`.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("top-level value must be a JSON object")
    for field in ("dim", "mean", "cov_type", "cov", "label"):
        if field not in doc:
            raise FormatError(f"missing field '{field}'")

    dim = doc["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise FormatError(f"field 'dim' must be a positive integer, got {dim!r}")
    if not isinstance(doc["label"], str):
        raise FormatError("field 'label' must be a string")
    cov_type = doc["cov_type"]
    if cov_type not in ("diag", "full"):
        raise FormatError(f"field 'cov_type' must be 'diag' or 'full', got {cov_type!r}")

    try:
        mean = np.asarray(doc["mean"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"field 'mean' must be a list of numbers: {exc}") from exc
    if mean.ndim != 1 or mean.shape[0] != dim:
        raise FormatError(f"field 'mean' must be a flat list of {dim} numbers")

    try:
        cov = np.asarray(doc["cov"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"field 'cov' must be numeric: {exc}") from exc
    if cov_type == "diag" and cov.shape != (dim,):
        raise FormatError(f"field 'cov' must be a flat list of {dim} variances when cov_type='diag'")
    if cov_type == "full" and cov.shape != (dim, dim):
        raise FormatError(f"field 'cov' must be a {dim}x{dim} matrix when cov_type='full'")

    return GaussianLatentModel(
        dim=dim, mean=mean, cov=cov, diagonal=(cov_type == "diag"), label=doc["label"]
    )


def save_model(model: GaussianLatentModel, path) -> None:
    """Write the model in the interchange format (17-significant-digit floats)."""
    doc = {
        "dim": int(model.dim),
        "mean": [float(v) for v in model.mean],
        "cov_type": "diag" if model.diagonal else "full",
        "cov": [float(v) for v in model.cov]
        if model.diagonal
        else [[float(v) for v in row] for row in model.cov],
        "label": model.label,
    }
    jsonio.dump(doc, path)


def sample(model: GaussianLatentModel, n: int, stream: SampleStream) -> np.ndarray:
    """Draw ``n`` i.i.d. vectors from the model, shape ``(n, dim)``.

    Sample ``i`` consumes exactly the uniforms at stream positions
    ``[i*dim, (i+1)*dim)``, so any round-robin partition of indices across
    workers reproduces the same vectors. Deterministic for a fixed stream.
    """
    if int(n) < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    u = _standard_uniforms(stream, int(n) * model.dim)
    z = ndtri(u).reshape(int(n), model.dim)
    if model.diagonal:
        return model.mean + z * model._scale
    return model.mean + z @ model._chol.T


def log_density(model: GaussianLatentModel, x) -> float | np.ndarray:
    """Exact multivariate-Gaussian log pdf at ``x`` (single vector or batch)."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != model.dim:
        raise ValueError(f"x must have dimension {model.dim}, got shape {np.shape(x)}")
    diff = arr - model.mean
    if model.diagonal:
        quad = np.sum(diff * diff / model.cov, axis=1)
    else:
        sol = np.linalg.solve(model._chol, diff.T)
        quad = np.sum(sol * sol, axis=0)
    out = -0.5 * (model.dim * _LOG_TWO_PI + model._log_det + quad)
    return float(out[0]) if single else out
