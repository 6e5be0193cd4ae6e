"""Kernel-density conformity scoring and percentile-threshold safety constraints.

A predictor is calibrated on held-out in-distribution encodings: each
calibration point receives a leave-one-out kernel density estimate, the
scores are normalized by their maximum and sorted ascending, and the
threshold is the ``floor(beta * m)``-th smallest score (1-based). A fresh
point is "safe" (in-distribution) when its normalized density reaches the
threshold; otherwise the set prediction is empty, which is the
out-of-distribution signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .errors import FormatError, ValidationError
from . import jsonio

IN_DISTRIBUTION = "in-distribution"

UNIFORM = "uniform"
GAUSSIAN = "gaussian"
SCOTT = "scott"

_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class CalibrationSet:
    """Held-out in-distribution points, one row per latent vector."""

    points: np.ndarray
    source_label: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValidationError(f"calibration points must be a 2-D array, got ndim={pts.ndim}")
        if pts.shape[0] < 2:
            raise ValidationError(f"calibration set needs at least 2 points, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("calibration set contains non-finite values")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and bandwidth; ``bandwidth="scott"`` defers to Scott's rule."""

    kind: str = UNIFORM
    bandwidth: float | str = SCOTT

    def __post_init__(self):
        if self.kind not in (UNIFORM, GAUSSIAN):
            raise ValidationError(f"kernel kind must be '{UNIFORM}' or '{GAUSSIAN}', got {self.kind!r}")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != SCOTT:
                raise ValidationError(f"bandwidth must be a positive number or '{SCOTT}', got {self.bandwidth!r}")
        elif not (math.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValidationError(f"bandwidth must be positive and finite, got {self.bandwidth}")

    @property
    def resolved(self) -> bool:
        return not isinstance(self.bandwidth, str)

    def resolve(self, cal: CalibrationSet) -> "KernelSpec":
        if self.resolved:
            return self
        return replace(self, bandwidth=scott_bandwidth(cal, self.kind))


def scott_bandwidth(cal: CalibrationSet, kind: str = GAUSSIAN) -> float:
    """Automatic bandwidth: mean per-dimension sample std times m^(-1/(k+4)).

    The plain rule is calibrated for the gaussian kernel; for the uniform
    ball kernel it is rescaled by the canonical-bandwidth ratio
    ``((k+2)^2 (4 pi)^{k/2} / V_k)^{1/(k+4)}`` (1.74 in 1-D, 2.0 in 2-D) so
    both kernels apply equivalent smoothing. Without the rescaling the ball
    radius is so small that isolated calibration points pin the low score
    quantiles at exactly zero, which degenerates the threshold.
    """
    sigma = float(np.mean(np.std(cal.points, axis=0, ddof=1)))
    if sigma <= 0.0:
        raise ValidationError("calibration set has zero spread; supply an explicit bandwidth")
    h = sigma * cal.size ** (-1.0 / (cal.dim + 4))
    if kind == UNIFORM:
        k = cal.dim
        log_ratio = (
            2.0 * math.log(k + 2.0)
            + 0.5 * k * math.log(4.0 * math.pi)
            - math.log(_ball_volume(k, 1.0))
        ) / (k + 4.0)
        h *= math.exp(log_ratio)
    return h


def _ball_volume(dim: int, h: float) -> float:
    # Volume of the k-ball of radius h: pi^(k/2) h^k / Gamma(k/2 + 1).
    # Elementary forms for the common low dimensions keep them exact.
    if dim == 1:
        return 2.0 * h
    if dim == 2:
        return math.pi * h * h
    if dim == 3:
        return (4.0 / 3.0) * math.pi * h**3
    return math.exp(0.5 * dim * math.log(math.pi) + dim * math.log(h) - gammaln(0.5 * dim + 1.0))


def _gaussian_norm(dim: int, h: float) -> float:
    return (2.0 * math.pi) ** (0.5 * dim) * h**dim


def _sq_dists(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    diff = points - x
    return np.sum(diff * diff, axis=1)


def kde_score(
    cal: CalibrationSet,
    kernel: KernelSpec,
    x,
    exclude_index: int | None = None,
) -> float:
    """Kernel density estimate at ``x`` over the calibration points.

    With ``exclude_index`` the named point is left out of the estimate
    (used for leave-one-out calibration scoring). The uniform kernel counts
    points within bandwidth ``h`` and divides by the count of contributing
    points times the k-ball volume; the gaussian kernel averages
    ``exp(-||x - z||^2 / (2 h^2))`` under the standard normalizer.
    """
    kernel = kernel.resolve(cal)
    vec = np.asarray(x, dtype=np.float64)
    if vec.shape != (cal.dim,):
        raise ValueError(f"query point must have dimension {cal.dim}, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("query point contains non-finite values")
    if exclude_index is not None and not (0 <= exclude_index < cal.size):
        raise ValueError(f"exclude_index {exclude_index} out of range for size {cal.size}")

    m_eff = cal.size - (1 if exclude_index is not None else 0)
    if m_eff < 1:
        raise ValueError("no calibration points left after exclusion")

    h = float(kernel.bandwidth)
    d2 = _sq_dists(cal.points, vec)
    if exclude_index is not None:
        d2 = np.delete(d2, exclude_index)
    if kernel.kind == UNIFORM:
        count = int(np.count_nonzero(d2 <= h * h))
        return count / (m_eff * _ball_volume(cal.dim, h))
    terms = np.exp(-d2 / (2.0 * h * h))
    # fsum: exactly-rounded, hence invariant to calibration-set permutations.
    return math.fsum(terms.tolist()) / (m_eff * _gaussian_norm(cal.dim, h))


def _raw_scores_batch(cal: CalibrationSet, kernel: KernelSpec, queries: np.ndarray) -> np.ndarray:
    """Unnormalized KDE at each query row (no exclusion), chunked over rows."""
    h = float(kernel.bandwidth)
    m = cal.size
    out = np.empty(queries.shape[0], dtype=np.float64)
    if kernel.kind == UNIFORM:
        denom = m * _ball_volume(cal.dim, h)
    else:
        denom = m * _gaussian_norm(cal.dim, h)
    chunk = max(1, _CHUNK_ELEMENTS // max(1, m))
    for start in range(0, queries.shape[0], chunk):
        block = queries[start : start + chunk]
        diff = block[:, None, :] - cal.points[None, :, :]
        d2 = np.sum(diff * diff, axis=2)
        if kernel.kind == UNIFORM:
            out[start : start + chunk] = np.count_nonzero(d2 <= h * h, axis=1) / denom
        else:
            terms = np.exp(-d2 / (2.0 * h * h))
            out[start : start + chunk] = [math.fsum(row.tolist()) for row in terms]
            out[start : start + chunk] /= denom
    return out


@dataclass(frozen=True)
class ConformalPredictor:
    """Calibrated safety constraint: sorted scores, threshold, and scale.

    ``scores`` are the normalized calibration conformity scores in ascending
    order (maximum exactly 1); ``threshold`` equals
    ``scores[threshold_index - 1]`` with the 1-based index
    ``floor(beta * m)``. ``norm_constant`` is the raw score maximum frozen at
    calibration time; test-point scores are divided by the same constant so
    orderings carry over. Instances are immutable and safe to score
    concurrently.
    """

    calibration: CalibrationSet
    kernel: KernelSpec
    beta: float
    scores: np.ndarray
    threshold: float
    threshold_index: int
    norm_constant: float

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    @property
    def dim(self) -> int:
        return self.calibration.dim


def threshold_position(beta: float, size: int) -> int:
    """1-based rank of the threshold score: floor(beta * m)."""
    if not (0.0 < beta < 1.0):
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    # The small shift keeps exact products like 0.3 * 10 from flooring low.
    pos = int(math.floor(beta * size + 1e-9))
    if pos < 1:
        raise ValueError(f"beta too small for calibration size: floor({beta} * {size}) < 1")
    return min(pos, size)


def calibrate(
    cal: CalibrationSet,
    kernel: KernelSpec,
    beta: float,
    include_self: bool = False,
) -> ConformalPredictor:
    """Build the safety constraint from a calibration set.

    Each calibration point is scored by the kernel density of the *other*
    points (leave-one-out; set ``include_self=True`` for the self-inclusive
    variant used in sensitivity studies). Scores are divided by their
    maximum, sorted ascending, and the threshold is taken at the 1-based
    rank ``floor(beta * m)``.

    Raises
    ------
    ValueError
        If ``floor(beta * m) < 1``.
    ValidationError
        If every leave-one-out score is zero (bandwidth too small for the
        spread of the calibration set).
    """
    kernel = kernel.resolve(cal)
    m = cal.size
    pos = threshold_position(beta, m)
    h = float(kernel.bandwidth)

    diff = cal.points[:, None, :] - cal.points[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    if kernel.kind == UNIFORM:
        inside = d2 <= h * h
        counts = inside.sum(axis=1).astype(np.float64)
        if not include_self:
            counts -= 1.0  # self-distance is zero, always inside
            raw = counts / ((m - 1) * _ball_volume(cal.dim, h))
        else:
            raw = counts / (m * _ball_volume(cal.dim, h))
    else:
        terms = np.exp(-d2 / (2.0 * h * h))
        norm = _gaussian_norm(cal.dim, h)
        raw = np.empty(m, dtype=np.float64)
        for i in range(m):
            row = terms[i].tolist()
            if include_self:
                raw[i] = math.fsum(row) / (m * norm)
            else:
                del row[i]
                raw[i] = math.fsum(row) / ((m - 1) * norm)

    max_raw = float(np.max(raw))
    if max_raw <= 0.0:
        raise ValidationError(
            "degenerate calibration: every leave-one-out score is zero; enlarge the bandwidth"
        )
    scores = np.sort(raw / max_raw)
    return ConformalPredictor(
        calibration=cal,
        kernel=kernel,
        beta=float(beta),
        scores=scores,
        threshold=float(scores[pos - 1]),
        threshold_index=pos,
        norm_constant=max_raw,
    )


def conformity(pred: ConformalPredictor, x) -> float:
    """Normalized conformity of a single point (no exclusion, no clamping).

    Values above 1 are possible when ``x`` sits in a denser spot than any
    calibration point did; the threshold comparison does not need a clamp.
    """
    raw = kde_score(pred.calibration, pred.kernel, x, exclude_index=None)
    return raw / pred.norm_constant


def conformity_many(pred: ConformalPredictor, xs) -> np.ndarray:
    """Vectorized :func:`conformity` over rows of ``xs``."""
    arr = np.asarray(xs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != pred.dim:
        raise ValueError(f"samples must have shape (n, {pred.dim}), got {arr.shape}")
    return _raw_scores_batch(pred.calibration, pred.kernel, arr) / pred.norm_constant


def predict_set(pred: ConformalPredictor, x) -> frozenset:
    """Set prediction: {IN_DISTRIBUTION} when conformity >= threshold, else empty."""
    if conformity(pred, x) >= pred.threshold:
        return frozenset({IN_DISTRIBUTION})
    return frozenset()


def is_safe(pred: ConformalPredictor, x) -> bool:
    """True iff the set prediction is non-empty (the point lies in the safe region)."""
    return conformity(pred, x) >= pred.threshold


# ---------------------------------------------------------------------------
# File formats


def load_calibration_csv(path) -> CalibrationSet:
    """Read the calibration interchange CSV: header ``dim=<k>`` then one row per point."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise FormatError(f"first line must be 'dim=<k>', got {header!r}")
        try:
            dim = int(header[4:])
        except ValueError as exc:
            raise FormatError(f"first line must be 'dim=<k>', got {header!r}") from exc
        if dim < 1:
            raise FormatError(f"dim must be >= 1, got {dim}")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != dim:
                raise FormatError(f"line {lineno}: expected {dim} values, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise FormatError(f"line {lineno}: non-numeric value: {exc}") from exc
    if len(rows) < 2:
        raise FormatError(f"calibration file must contain at least 2 points, got {len(rows)}")
    return CalibrationSet(points=np.asarray(rows, dtype=np.float64), source_label=str(path))


def save_calibration_csv(cal: CalibrationSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={cal.dim}\n")
        for row in cal.points:
            fh.write(",".join(jsonio.format_float(v) for v in row))
            fh.write("\n")


def save_predictor(pred: ConformalPredictor, path, calibration_ref: str) -> None:
    """Write the predictor snapshot JSON next to its calibration reference."""
    doc = {
        "beta": pred.beta,
        "bandwidth": float(pred.kernel.bandwidth),
        "kernel": pred.kernel.kind,
        "threshold": pred.threshold,
        "threshold_index": pred.threshold_index,
        "scores": [float(s) for s in pred.scores],
        "calibration_ref": str(calibration_ref),
    }
    jsonio.dump(doc, path)


def load_predictor(path) -> ConformalPredictor:
    """Rebuild a predictor from its snapshot.

    The calibration CSV named by ``calibration_ref`` (resolved relative to
    the snapshot's directory when not absolute) is reloaded and the scores
    recomputed; a mismatch against the stored threshold means the snapshot
    does not belong to the referenced calibration file.
    """
    import json as _json
    import os

    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = _json.load(fh)
    except _json.JSONDecodeError as exc:
        raise FormatError(f"not valid JSON: {exc}") from exc
    for field in ("beta", "bandwidth", "kernel", "threshold", "threshold_index", "scores", "calibration_ref"):
        if field not in doc:
            raise FormatError(f"missing field '{field}'")
    ref = doc["calibration_ref"]
    if not os.path.isabs(ref):
        ref = os.path.join(os.path.dirname(os.path.abspath(path)), ref)
    cal = load_calibration_csv(ref)
    pred = calibrate(cal, KernelSpec(kind=doc["kernel"], bandwidth=float(doc["bandwidth"])), float(doc["beta"]))
    if pred.threshold_index != int(doc["threshold_index"]) or not math.isclose(
        pred.threshold, float(doc["threshold"]), rel_tol=1e-9, abs_tol=1e-12
    ):
        raise ValidationError(
            "snapshot does not match the referenced calibration file: "
            f"recomputed threshold {pred.threshold} (index {pred.threshold_index}) vs "
            f"stored {doc['threshold']} (index {doc['threshold_index']})"
        )
    return pred
