"""Dense optical flow via per-pixel quadratic polynomial expansion.

Each frame is approximated locally, at every pixel, by a quadratic model

    f(x + d) ~= d^T A d + b^T d + c

fitted by Gaussian-weighted least squares over an odd window (the classic
polynomial-expansion formulation).  For a pure translation ``s`` between two
frames the models relate as ``A2 = A1`` and ``b2 = b1 - 2 A1 s``, so the
displacement solves ``Abar d = db`` with ``Abar = (A1 + A2)/2`` and
``db = -(b2 - b1)/2``.  The practical estimator samples frame 2's
coefficients at prior-displaced coordinates, averages the normal equations
``Abar^T Abar`` and ``Abar^T db`` over a neighborhood window, solves the 2x2
system per pixel, and adds the correction to the prior.  A Gaussian pyramid
makes the whole thing coarse-to-fine so shifts larger than the window are
recovered.

All images are float arrays scaled to [0,1]; flow fields are (H, W, 2)
arrays holding (dx, dy) in pixels, x along columns and y along rows.
Everything here is pure full-array numpy, so results are identical no
matter how callers partition work.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

# Pixels whose averaged normal matrix has |det| below this keep the prior
# displacement instead of amplifying noise through a near-singular solve.
SINGULAR_DET = 1e-9


@dataclass(frozen=True)
class FlowConfig:
    pyramid_levels: int = 3
    pyramid_scale: float = 0.5
    iterations_per_level: int = 3
    poly_window: int = 5
    poly_sigma: float = 1.1
    averaging_window: int = 15

    def validate(self) -> None:
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if not 0 < self.pyramid_scale < 1:
            raise ValueError("pyramid_scale must be in (0,1)")
        if self.iterations_per_level < 1:
            raise ValueError("iterations_per_level must be >= 1")
        for name in ("poly_window", "averaging_window"):
            v = getattr(self, name)
            if v < 3 or v % 2 == 0:
                raise ValueError(f"{name} must be odd and >= 3, got {v}")
        if self.poly_sigma <= 0:
            raise ValueError("poly_sigma must be positive")


@dataclass
class PolyCoeffs:
    """Per-pixel quadratic model; A = [[a11, a12], [a12, a22]] is symmetric."""

    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    c: np.ndarray

    @property
    def shape(self):
        return self.c.shape


def to_gray(rgb: np.ndarray) -> np.ndarray:
    """Luma conversion: 0.299 R + 0.587 G + 0.114 B."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H,W,3) RGB image, got shape {rgb.shape}")
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def correlate1d(img: np.ndarray, kernel, axis: int) -> np.ndarray:
    """Correlation along one axis with mirror (reflect) padding.

    out[x] = sum_d kernel[d + n] * img[x + d] for d in [-n, n].
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    n = len(kernel) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (n, n)
    padded = np.pad(img, pad, mode="reflect")
    out = np.zeros(img.shape, dtype=np.float64)
    h, w = img.shape
    for t, k in enumerate(kernel):
        if axis == 0:
            out += k * padded[t : t + h, :]
        else:
            out += k * padded[:, t : t + w]
    return out


def sep_correlate(img: np.ndarray, kx, ky) -> np.ndarray:
    """Separable correlation: rows (x) with ``kx`` then columns (y) with ``ky``."""
    return correlate1d(correlate1d(img, kx, axis=1), ky, axis=0)


def gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample to (out_h, out_w); trailing channel axis passes through.

    Sample positions use the half-pixel convention
    src = (dst + 0.5) * in/out - 0.5, clipped to the source extent.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    w00 = (1 - fy)[:, None] * (1 - fx)[None, :]
    w01 = (1 - fy)[:, None] * fx[None, :]
    w10 = fy[:, None] * (1 - fx)[None, :]
    w11 = fy[:, None] * fx[None, :]
    if img.ndim == 3:
        w00, w01, w10, w11 = (a[..., None] for a in (w00, w01, w10, w11))
    return (img[np.ix_(y0, x0)] * w00 + img[np.ix_(y0, x1)] * w01
            + img[np.ix_(y1, x0)] * w10 + img[np.ix_(y1, x1)] * w11)


def gaussian_pyramid(img: np.ndarray, levels: int, scale: float,
                     min_size: int = 5) -> list:
    """Level 0 is the input; each next level is blurred then resampled by ``scale``.

    The blur sigma 0.5*sqrt(1/scale^2 - 1) keeps the resampling roughly
    alias-free.  Levels whose width or height would fall below ``min_size``
    are dropped, with a warning, so the list may be shorter than requested.
    """
    img = np.asarray(img, dtype=np.float64)
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if not 0 < scale < 1:
        raise ValueError("scale must be in (0,1)")
    if min(img.shape[:2]) < min_size:
        raise ValueError(
            f"image {img.shape[:2]} smaller than minimum size {min_size}")
    sigma = 0.5 * np.sqrt(1.0 / (scale * scale) - 1.0)
    kernel = gaussian_kernel(sigma, radius=max(1, int(np.ceil(3 * sigma))))
    pyramid = [img]
    for _ in range(1, levels):
        h, w = pyramid[-1].shape[:2]
        nh, nw = int(round(h * scale)), int(round(w * scale))
        if min(nh, nw) < min_size:
            warnings.warn(
                f"pyramid truncated at {len(pyramid)} levels: next level "
                f"{nh}x{nw} would be smaller than {min_size}")
            break
        blurred = sep_correlate(pyramid[-1], kernel, kernel)
        pyramid.append(bilinear_resize(blurred, nh, nw))
    return pyramid


def _basis_exponents():
    # basis (1, x, y, x^2, y^2, xy) as (p, q) exponent pairs
    return [(0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1)]


def poly_expansion(img: np.ndarray, window: int, sigma: float) -> PolyCoeffs:
    """Fit the quadratic model at every pixel by Gaussian-weighted least squares.

    The applicability weight is separable and the basis monomials factor
    into x- and y-parts, so each weighted moment is two 1-D correlations;
    the (constant) 6x6 normal matrix is inverted once and applied per pixel.
    Borders see the mirror-padded image.
    """
    img = np.asarray(img, dtype=np.float64)
    if window % 2 == 0 or window < 3:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    if window > min(img.shape):
        raise ValueError(f"window {window} exceeds image extent {img.shape}")
    n = window // 2
    x = np.arange(-n, n + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))

    # separable sums S[k] = sum_x g(x) x^k give every normal-matrix entry
    s = [float(np.sum(g * x**k)) for k in range(5)]
    exps = _basis_exponents()
    G = np.empty((6, 6))
    for i, (pi, qi) in enumerate(exps):
        for j, (pj, qj) in enumerate(exps):
            G[i, j] = s[pi + pj] * s[qi + qj]
    Ginv = np.linalg.inv(G)

    moments = [sep_correlate(img, g * x**p, g * x**q) for p, q in exps]
    r = [sum(Ginv[i, j] * moments[j] for j in range(6)) for i in range(6)]
    return PolyCoeffs(c=r[0], b1=r[1], b2=r[2], a11=r[3], a22=r[4], a12=0.5 * r[5])


def _bilinear_gather(field, ys, xs):
    h, w = field.shape
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    return (field[y0, x0] * (1 - fy) * (1 - fx) + field[y0, x1] * (1 - fy) * fx
            + field[y1, x0] * fy * (1 - fx) + field[y1, x1] * fy * fx)


def _box_average(img: np.ndarray, window: int) -> np.ndarray:
    h, w = img.shape
    # mirror padding needs window <= 2*dim - 1; clamp for tiny pyramid levels
    window = min(window, 2 * min(h, w) - 1)
    if window % 2 == 0:
        window -= 1
    k = np.full(window, 1.0 / window)
    return sep_correlate(img, k, k)


def flow_step(p1: PolyCoeffs, p2: PolyCoeffs, prior: np.ndarray,
              averaging_window: int) -> np.ndarray:
    """One displacement refinement from two polynomial expansions.

    Frame 2 coefficients are sampled at prior-displaced coordinates
    (bilinear, clipped at borders).  Normal equations are box-averaged over
    the neighborhood window before the per-pixel 2x2 solve; near-singular
    pixels keep the prior.
    """
    if p1.shape != p2.shape:
        raise ValueError(f"coefficient grids disagree: {p1.shape} vs {p2.shape}")
    if prior.shape[:2] != p1.shape or prior.shape[2:] != (2,):
        raise ValueError(
            f"prior flow shape {prior.shape} does not match fields {p1.shape}")
    h, w = p1.shape
    ys_grid, xs_grid = np.mgrid[0:h, 0:w].astype(np.float64)
    xs = np.clip(xs_grid + prior[..., 0], 0, w - 1)
    ys = np.clip(ys_grid + prior[..., 1], 0, h - 1)

    a11 = 0.5 * (p1.a11 + _bilinear_gather(p2.a11, ys, xs))
    a12 = 0.5 * (p1.a12 + _bilinear_gather(p2.a12, ys, xs))
    a22 = 0.5 * (p1.a22 + _bilinear_gather(p2.a22, ys, xs))
    db1 = -0.5 * (_bilinear_gather(p2.b1, ys, xs) - p1.b1)
    db2 = -0.5 * (_bilinear_gather(p2.b2, ys, xs) - p1.b2)

    g11 = _box_average(a11 * a11 + a12 * a12, averaging_window)
    g12 = _box_average(a11 * a12 + a12 * a22, averaging_window)
    g22 = _box_average(a12 * a12 + a22 * a22, averaging_window)
    h1 = _box_average(a11 * db1 + a12 * db2, averaging_window)
    h2 = _box_average(a12 * db1 + a22 * db2, averaging_window)

    det = g11 * g22 - g12 * g12
    ok = np.abs(det) >= SINGULAR_DET
    safe = np.where(ok, det, 1.0)
    dx = np.where(ok, (g22 * h1 - g12 * h2) / safe, 0.0)
    dy = np.where(ok, (g11 * h2 - g12 * h1) / safe, 0.0)
    return prior + np.stack([dx, dy], axis=-1)


def farneback_flow(frame1: np.ndarray, frame2: np.ndarray,
                   config: FlowConfig = FlowConfig()) -> np.ndarray:
    """Coarse-to-fine dense flow between two equally sized grayscale frames."""
    config.validate()
    f1 = np.asarray(frame1, dtype=np.float64)
    f2 = np.asarray(frame2, dtype=np.float64)
    if f1.shape != f2.shape:
        raise ValueError(f"frame shapes disagree: {f1.shape} vs {f2.shape}")
    if f1.ndim != 2:
        raise ValueError(f"expected 2-D grayscale frames, got shape {f1.shape}")
    pyr1 = gaussian_pyramid(f1, config.pyramid_levels, config.pyramid_scale,
                            min_size=config.poly_window)
    pyr2 = gaussian_pyramid(f2, config.pyramid_levels, config.pyramid_scale,
                            min_size=config.poly_window)
    flow = np.zeros(pyr1[-1].shape + (2,), dtype=np.float64)
    for level in range(len(pyr1) - 1, -1, -1):
        pc1 = poly_expansion(pyr1[level], config.poly_window, config.poly_sigma)
        pc2 = poly_expansion(pyr2[level], config.poly_window, config.poly_sigma)
        for _ in range(config.iterations_per_level):
            flow = flow_step(pc1, pc2, flow, config.averaging_window)
        if level > 0:
            nh, nw = pyr1[level - 1].shape
            flow = bilinear_resize(flow, nh, nw) / config.pyramid_scale
    return flow


def flow_stats(flow: np.ndarray):
    """(mean magnitude, max magnitude, 8-bin angle histogram).

    The histogram is magnitude-weighted and normalized to sum 1; an all-zero
    field yields the uniform histogram by convention.
    """
    flow = np.asarray(flow, dtype=np.float64)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"expected (H,W,2) flow field, got shape {flow.shape}")
    mag = np.hypot(flow[..., 0], flow[..., 1])
    total = float(mag.sum())
    if total == 0.0:
        hist = np.full(8, 1.0 / 8.0)
    else:
        theta = np.arctan2(flow[..., 1], flow[..., 0])  # [-pi, pi]
        bins = np.minimum((theta + np.pi) / (2 * np.pi / 8), 7.9999).astype(np.intp)
        bins = np.clip(bins, 0, 7)
        hist = np.bincount(bins.ravel(), weights=mag.ravel(), minlength=8) / total
    return float(mag.mean()), float(mag.max()), hist
