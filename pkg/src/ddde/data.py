"""Support boxes, seeded toy-data generators, and dataset file I/O.

All generators are pure functions of an explicit numpy Generator, so a
fixed seed reproduces the exact same dataset on any platform. Gaussian
draws go through a Box-Muller transform over the generator's uniform
stream rather than the library's normal sampler, which pins the byte-level
output to the uniform stream alone.
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from ._util import atomic_write_text
from .errors import (
    DegenerateDataError,
    DomainError,
    FormatError,
    ShapeError,
    ValidationError,
)

MIXTURE_CENTERS = np.array(
    [(cx, cy) for cy in (0.2, 0.5, 0.8) for cx in (0.2, 0.5, 0.8)], dtype=np.float64
)
MIXTURE_SIGMA = 0.05

# Correlated-Gaussian placement: centered in the unit box with a spread
# that keeps rejection negligible while filling the box visually.
CORRELATED_MEAN = (0.5, 0.5)
CORRELATED_SIGMA = 0.15


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box support of the uniform reference distribution."""

    lows: tuple[float, ...]
    highs: tuple[float, ...]
    log_u: float = field(init=False)

    def __post_init__(self):
        lows = tuple(float(v) for v in self.lows)
        highs = tuple(float(v) for v in self.highs)
        if len(lows) != len(highs) or not lows:
            raise ValidationError("domain needs matching, non-empty low/high bounds")
        widths = [hi - lo for lo, hi in zip(lows, highs)]
        if not all(math.isfinite(w) and w > 0.0 for w in widths):
            raise ValidationError(f"domain bounds must satisfy high > low, got {lows} / {highs}")
        object.__setattr__(self, "lows", lows)
        object.__setattr__(self, "highs", highs)
        # constant log density of the uniform distribution on the box
        object.__setattr__(self, "log_u", -sum(math.log(w) for w in widths))

    @classmethod
    def unit(cls, dim: int) -> "Domain":
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lows)

    @property
    def lows_array(self) -> np.ndarray:
        return np.array(self.lows)

    @property
    def highs_array(self) -> np.ndarray:
        return np.array(self.highs)

    def contains(self, points) -> np.ndarray:
        """Per-row containment of an (n, d) array in the closed box."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ShapeError(f"expected (n, {self.dim}) points, got shape {pts.shape}")
        return np.all((pts >= self.lows_array) & (pts <= self.highs_array), axis=1)

    def require_inside(self, points, what: str = "point") -> None:
        inside = self.contains(points)
        if not inside.all():
            bad = int(np.argmin(inside))
            raise DomainError(
                f"{what} row {bad} = {np.asarray(points)[bad].tolist()} "
                f"lies outside the domain {list(zip(self.lows, self.highs))}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n i.i.d. uniform points as an (n, d) array."""
        if n < 1:
            raise ValidationError(f"sample size must be >= 1, got {n}")
        u = rng.random((int(n), self.dim))
        return self.lows_array + (self.highs_array - self.lows_array) * u


@dataclass
class Dataset:
    """N x d row-major sample matrix with provenance and optional labels."""

    points: np.ndarray
    labels: np.ndarray | None = None
    provenance: str = ""

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2:
            raise ShapeError(f"dataset points must be 2-d, got ndim={pts.ndim}")
        if pts.shape[0] < 1:
            raise ValidationError("dataset must contain at least one row")
        self.points = pts
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (pts.shape[0],):
                raise ShapeError(
                    f"labels must have shape ({pts.shape[0]},), got {labels.shape}")
            self.labels = labels

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def as_points(data) -> np.ndarray:
    """Accept a Dataset or an (n, d) array-like; return float64 points."""
    if isinstance(data, Dataset):
        return data.points
    pts = np.asarray(data, dtype=np.float64)
    if pts.ndim != 2:
        raise ShapeError(f"expected a Dataset or (n, d) array, got ndim={pts.ndim}")
    return pts


@dataclass(frozen=True)
class AffineRecord:
    """Per-dimension map unit = raw * scale + offset, with scale > 0."""

    scale: np.ndarray
    offset: np.ndarray

    def apply(self, raw) -> np.ndarray:
        return np.asarray(raw, dtype=np.float64) * self.scale + self.offset

    def invert(self, unit) -> np.ndarray:
        return (np.asarray(unit, dtype=np.float64) - self.offset) / self.scale

    @property
    def log_density_correction(self) -> float:
        """Add this to a unit-box log density to get the raw-coordinate one."""
        return float(np.log(self.scale).sum())


def _standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Box-Muller standard normals drawn from the uniform stream."""
    n = int(np.prod(shape))
    m = (n + 1) // 2
    u1 = 1.0 - rng.random(m)  # (0, 1], keeps the log finite
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
    return z[:n].reshape(shape)


def _rejection_fill(draw, n: int, domain: Domain, what: str):
    """Collect n proposals lying inside `domain`, redrawing rejected rows.

    `draw(k)` returns (points, labels-or-None) for k proposals. Raises once
    the cumulative rejection rate exceeds 50% (most of the mass is outside
    the box), checked after at least max(2n, 512) proposals.
    """
    kept_p, kept_l = [], []
    got = proposed = accepted = 0
    while got < n:
        k = max(n - got, 64)
        pts, labels = draw(k)
        inside = domain.contains(pts)
        kept_p.append(pts[inside])
        if labels is not None:
            kept_l.append(labels[inside])
        got += int(inside.sum())
        proposed += k
        accepted += int(inside.sum())
        if proposed >= max(2 * n, 512) and accepted < 0.5 * proposed:
            raise ValidationError(
                f"{what}: rejection rate {1 - accepted / proposed:.0%} exceeds 50%; "
                "the distribution's mass lies mostly outside the domain")
    points = np.concatenate(kept_p)[:n]
    labels = np.concatenate(kept_l)[:n] if kept_l else None
    return points, labels


def sample_uniform(domain: Domain, n: int, rng: np.random.Generator) -> Dataset:
    """n i.i.d. points, each coordinate uniform on its bounds."""
    return Dataset(domain.sample(n, rng), provenance=f"uniform(n={n})")


def gen_gaussian(n: int, mean, sigma: float, rng: np.random.Generator,
                 domain: Domain | None = None) -> Dataset:
    """Isotropic Gaussian samples, rejection-clipped into `domain`.

    The default domain is the unit box of the mean's dimension.
    """
    mu = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    if n < 1 or not sigma > 0.0:
        raise ValidationError(f"need n >= 1 and sigma > 0, got n={n}, sigma={sigma}")
    if domain is None:
        domain = Domain.unit(mu.size)

    def draw(k):
        return mu + sigma * _standard_normal(rng, (k, mu.size)), None

    points, _ = _rejection_fill(draw, n, domain, "gen_gaussian")
    return Dataset(points, provenance=f"gaussian(n={n},mean={mu.tolist()},sigma={sigma})")


def gen_correlated_gaussian(n: int, rho: float, rng: np.random.Generator) -> Dataset:
    """2-d Gaussian with correlation rho, rejection-clipped into [0, 1]^2."""
    if not abs(rho) < 1.0:
        raise ValidationError(f"|rho| must be < 1, got {rho}")
    domain = Domain.unit(2)
    root = math.sqrt(1.0 - rho * rho)

    def draw(k):
        z = _standard_normal(rng, (k, 2))
        pts = np.column_stack([
            CORRELATED_MEAN[0] + CORRELATED_SIGMA * z[:, 0],
            CORRELATED_MEAN[1] + CORRELATED_SIGMA * (rho * z[:, 0] + root * z[:, 1]),
        ])
        return pts, None

    points, _ = _rejection_fill(draw, n, domain, "gen_correlated_gaussian")
    return Dataset(points, provenance=f"correlated_gaussian(n={n},rho={rho})")


def gen_gaussian_mixture(n: int, rng: np.random.Generator) -> Dataset:
    """9-component mixture: centers on the (0.2, 0.5, 0.8) grid, sigma 0.05.

    Components are chosen uniformly; the component index is kept as the
    row label.
    """
    if n < 1:
        raise ValidationError(f"need n >= 1, got {n}")
    domain = Domain.unit(2)

    def draw(k):
        comp = rng.integers(0, len(MIXTURE_CENTERS), size=k)
        pts = MIXTURE_CENTERS[comp] + MIXTURE_SIGMA * _standard_normal(rng, (k, 2))
        return pts, comp

    points, labels = _rejection_fill(draw, n, domain, "gen_gaussian_mixture")
    return Dataset(points, labels=labels, provenance=f"gaussian_mixture9(n={n})")


def two_moons_raw(n: int, noise: float, rng: np.random.Generator):
    """Raw two-moons geometry: two interleaved unit half-circles plus noise.

    Returns (points, labels); label 0 is the upper moon, 1 the lower.
    """
    if n < 1 or noise < 0.0:
        raise ValidationError(f"need n >= 1 and noise >= 0, got n={n}, noise={noise}")
    n_out = n // 2
    n_in = n - n_out
    t_out = np.linspace(0.0, np.pi, max(n_out, 1))[:n_out]
    t_in = np.linspace(0.0, np.pi, max(n_in, 1))[:n_in]
    outer = np.column_stack([np.cos(t_out), np.sin(t_out)])
    inner = np.column_stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)])
    points = np.vstack([outer, inner])
    labels = np.concatenate([np.zeros(n_out, np.int64), np.ones(n_in, np.int64)])
    if noise > 0.0:
        points = points + noise * _standard_normal(rng, points.shape)
    return points, labels


def circles_raw(n: int, noise: float, factor: float, rng: np.random.Generator):
    """Raw concentric circles (radius 1 and `factor`) plus noise."""
    if n < 1 or noise < 0.0:
        raise ValidationError(f"need n >= 1 and noise >= 0, got n={n}, noise={noise}")
    if not 0.0 < factor <= 1.0:
        raise ValidationError(f"factor must be in (0, 1], got {factor}")
    n_out = n // 2
    n_in = n - n_out
    t_out = np.linspace(0.0, 2.0 * np.pi, n_out, endpoint=False)
    t_in = np.linspace(0.0, 2.0 * np.pi, n_in, endpoint=False)
    outer = np.column_stack([np.cos(t_out), np.sin(t_out)])
    inner = factor * np.column_stack([np.cos(t_in), np.sin(t_in)])
    points = np.vstack([outer, inner])
    labels = np.concatenate([np.zeros(n_out, np.int64), np.ones(n_in, np.int64)])
    if noise > 0.0:
        points = points + noise * _standard_normal(rng, points.shape)
    return points, labels


def _shuffled(points, labels, rng):
    # the raw arcs come out in parameter order; shuffle so any head/tail
    # split of the dataset is an unbiased draw, as the conventional
    # generators do
    order = rng.permutation(points.shape[0])
    return points[order], labels[order]


def gen_two_moons(n: int, noise: float, rng: np.random.Generator,
                  margin: float = 0.05) -> Dataset:
    """Two-moons data, min-max normalized into [margin, 1-margin]^2."""
    points, labels = _shuffled(*two_moons_raw(n, noise, rng), rng)
    raw = Dataset(points, labels=labels, provenance=f"two_moons(n={n},noise={noise})")
    normalized, _ = normalize_to_unit(raw, margin)
    return normalized


def gen_circles(n: int, noise: float, factor: float, rng: np.random.Generator,
                margin: float = 0.05) -> Dataset:
    """Concentric-circles data, min-max normalized into [margin, 1-margin]^2."""
    points, labels = _shuffled(*circles_raw(n, noise, factor, rng), rng)
    raw = Dataset(points, labels=labels,
                  provenance=f"circles(n={n},noise={noise},factor={factor})")
    normalized, _ = normalize_to_unit(raw, margin)
    return normalized


def normalize_to_unit(raw, margin: float = 0.05):
    """Affine-map each dimension's [min, max] onto [margin, 1-margin].

    Returns (Dataset, AffineRecord). The record inverts the map exactly;
    log densities transform as
    log p_raw(x) = log p_unit(map(x)) + record.log_density_correction.
    """
    if not 0.0 <= margin < 0.5:
        raise ValidationError(f"margin must be in [0, 0.5), got {margin}")
    pts = as_points(raw)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = hi - lo
    if np.any(span <= 0.0):
        bad = int(np.argmin(span))
        raise DegenerateDataError(f"dimension {bad} has zero range and cannot be normalized")
    scale = (1.0 - 2.0 * margin) / span
    offset = margin - lo * scale
    record = AffineRecord(scale=scale, offset=offset)
    # clip shields the box containment from 1-ulp rounding at the extremes
    unit = np.clip(record.apply(pts), margin, 1.0 - margin)
    labels = raw.labels if isinstance(raw, Dataset) else None
    prov = raw.provenance if isinstance(raw, Dataset) else ""
    return Dataset(unit, labels=labels, provenance=f"{prov}|normalized({margin})"), record


def save_csv(dataset: Dataset, path) -> None:
    """Headerless CSV of 17-significant-digit decimals, label column last."""
    lines = []
    for i in range(dataset.n):
        cells = [f"{v:.17g}" for v in dataset.points[i]]
        if dataset.labels is not None:
            cells.append(str(int(dataset.labels[i])))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_csv(path, labeled: bool = False) -> Dataset:
    """Parse a headerless CSV of decimal reals (trailing int label if `labeled`)."""
    rows, labels = [], []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
                if labeled and width < 2:
                    raise FormatError(f"{path}: line {lineno}: labeled rows need >= 2 fields")
            elif len(cells) != width:
                raise FormatError(
                    f"{path}: line {lineno}: expected {width} fields, got {len(cells)}")
            try:
                if labeled:
                    rows.append([float(c) for c in cells[:-1]])
                    labels.append(int(cells[-1]))
                else:
                    rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return Dataset(np.array(rows, dtype=np.float64),
                   labels=np.array(labels, dtype=np.int64) if labeled else None,
                   provenance=f"file:{path}")


_IDX_IMAGE_MAGIC = 0x00000803
_IDX_LABEL_MAGIC = 0x00000801


def load_idx(images_path, labels_path=None, digit_filter: int | None = None) -> Dataset:
    """Load big-endian IDX image/label files; pixels are scaled by 1/255.

    `digit_filter` keeps only one digit class and requires `labels_path`.
    """
    with open(images_path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 16:
        raise FormatError(f"{images_path}: truncated IDX header")
    magic, count, rows, cols = struct.unpack(">IIII", buf[:16])
    if magic != _IDX_IMAGE_MAGIC:
        raise FormatError(f"{images_path}: bad image magic 0x{magic:08x}")
    expected = 16 + count * rows * cols
    if len(buf) != expected:
        raise FormatError(
            f"{images_path}: length mismatch, expected {expected} bytes, got {len(buf)}")
    pixels = np.frombuffer(buf, dtype=np.uint8, offset=16)
    points = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0

    labels = None
    if labels_path is not None:
        with open(labels_path, "rb") as fh:
            lbuf = fh.read()
        if len(lbuf) < 8:
            raise FormatError(f"{labels_path}: truncated IDX header")
        lmagic, lcount = struct.unpack(">II", lbuf[:8])
        if lmagic != _IDX_LABEL_MAGIC:
            raise FormatError(f"{labels_path}: bad label magic 0x{lmagic:08x}")
        if len(lbuf) != 8 + lcount:
            raise FormatError(f"{labels_path}: length mismatch")
        if lcount != count:
            raise FormatError(
                f"label count {lcount} does not match image count {count}")
        labels = np.frombuffer(lbuf, dtype=np.uint8, offset=8).astype(np.int64)

    if digit_filter is not None:
        if labels is None:
            raise ValidationError("digit_filter requires a labels file")
        keep = labels == int(digit_filter)
        if not keep.any():
            raise ValidationError(f"no images with label {digit_filter}")
        points, labels = points[keep], labels[keep]

    return Dataset(points, labels=labels, provenance=f"idx:{images_path}")


def rotate_image(flat, angle_degrees: float) -> np.ndarray:
    """Rotate a flattened 28x28 image about its center, bilinear interpolation.

    Pixels sampled from outside the frame are 0; the output stays in [0, 1]
    when the input does.
    """
    img = np.asarray(flat, dtype=np.float64)
    if img.shape != (784,):
        raise ShapeError(f"expected a flat 784-vector, got shape {img.shape}")
    im = img.reshape(28, 28)
    theta = math.radians(angle_degrees)
    c, s = math.cos(theta), math.sin(theta)
    ctr = (28 - 1) / 2.0

    rr, cc = np.meshgrid(np.arange(28), np.arange(28), indexing="ij")
    dy = rr - ctr
    dx = cc - ctr
    # inverse map: where each output pixel samples from in the source image
    sx = ctr + c * dx + s * dy
    sy = ctr - s * dx + c * dy

    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    wx = sx - x0
    wy = sy - y0

    out = np.zeros((28, 28))
    for ox, oy, w in (
        (0, 0, (1 - wx) * (1 - wy)),
        (1, 0, wx * (1 - wy)),
        (0, 1, (1 - wx) * wy),
        (1, 1, wx * wy),
    ):
        xs = x0 + ox
        ys = y0 + oy
        valid = (xs >= 0) & (xs < 28) & (ys >= 0) & (ys < 28)
        out[valid] += w[valid] * im[ys[valid], xs[valid]]
    return np.clip(out, 0.0, 1.0).reshape(784)
