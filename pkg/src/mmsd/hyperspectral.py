"""Synthetic GBM hyperspectral scenes and local-MMSD nonlinearity maps.

Pixels are stored row-major: pixel ``l`` sits at row ``l // width`` and
column ``l % width`` of the image.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .estimators import mmsd_closed_form
from .grassmann import squared_distance, top_p_eigvecs
from .models import LinearModelSpec, PriorKind

DEFAULT_BANDS = 60
DEFAULT_NOISE_SIGMA2 = 4e-6
SIGMA2_FLOOR = 1e-12


@dataclass(frozen=True)
class HyperCube:
    pixels: np.ndarray  # L x N
    width: int
    height: int

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 2:
            raise ValueError(f"pixels must be L x N, got shape {px.shape}")
        if self.width < 1 or self.height < 1 or self.width * self.height != px.shape[0]:
            raise ValueError(f"width*height = {self.width}*{self.height} does not match L = {px.shape[0]}")
        if not np.all(np.isfinite(px)):
            raise ValueError("cube has non-finite entries")
        object.__setattr__(self, "pixels", px)

    @property
    def n_pixels(self):
        return self.pixels.shape[0]

    @property
    def bands(self):
        return self.pixels.shape[1]


@dataclass(frozen=True)
class EndmemberSet:
    spectra: np.ndarray  # N x R

    def __post_init__(self):
        s = np.asarray(self.spectra, dtype=float)
        if s.ndim != 2 or s.shape[1] < 1:
            raise ValueError(f"spectra must be N x R with R >= 1, got shape {s.shape}")
        if not np.all(np.isfinite(s)) or np.any(s < 0):
            raise ValueError("endmember spectra must be finite and nonnegative")
        object.__setattr__(self, "spectra", s)

    @property
    def r(self):
        return self.spectra.shape[1]


@dataclass(frozen=True)
class AbundanceField:
    values: np.ndarray  # L x R

    def __post_init__(self):
        a = np.asarray(self.values, dtype=float)
        if a.ndim != 2:
            raise ValueError(f"abundances must be L x R, got shape {a.shape}")
        if np.any(a < 0) or np.any(np.abs(a.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("abundance rows must be nonnegative and sum to one")
        object.__setattr__(self, "values", a)


@dataclass(frozen=True)
class NonlinearityMap:
    values: np.ndarray  # height x width
    eta: float
    k: int
    p: int
    sigma2_n: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("map values must be a 2-D grid")
        if np.any(v < 0) or np.any(v > 2 * self.p):
            raise ValueError(f"map entries must lie in [0, {2 * self.p}]")
        object.__setattr__(self, "values", v)


def sample_simplex_abundances(r, l, rng):
    """``l`` i.i.d. rows uniform on the ``(r-1)``-simplex (normalized exponentials)."""
    if r < 1:
        raise ValueError("r must be >= 1")
    if r == 1:
        return AbundanceField(np.ones((l, 1)))
    e = rng.standard_exponential((l, r))
    a = e / e.sum(axis=1, keepdims=True)
    # push the rounding residue onto the largest entry so rows sum to one
    resid = 1.0 - a.sum(axis=1)
    idx = np.argmax(a, axis=1)
    a[np.arange(l), idx] += resid
    return AbundanceField(a)


def lmm_image(em, ab):
    return ab.values @ em.spectra.T


def generate_gbm_image(em, ab, gamma_coeffs, noise_sigma2=0.0, rng=None, width=None, height=None):
    """Generalized bilinear mixture of ``em`` with abundances ``ab``.

    ``gamma_coeffs`` is ``(L, R, R)``; only the strict upper triangle enters.
    The cube is returned as a single row unless ``width``/``height`` are given.
    """
    a = ab.values
    m = em.spectra
    l, r = a.shape
    if m.shape[1] != r:
        raise ValueError(f"{m.shape[1]} endmembers but abundances have {r} columns")
    g = np.asarray(gamma_coeffs, dtype=float)
    if g.shape != (l, r, r):
        raise ValueError(f"gamma_coeffs must have shape {(l, r, r)}, got {g.shape}")
    if np.any(~np.isfinite(g)) or np.any(g < 0) or np.any(g > 1):
        raise ValueError("gamma coefficients must lie in [0, 1]")
    if noise_sigma2 < 0:
        raise ValueError("noise_sigma2 must be nonnegative")
    y = lmm_image(em, ab)
    for i in range(r):
        for j in range(i + 1, r):
            w = g[:, i, j] * a[:, i] * a[:, j]
            if np.any(w):
                y = y + np.outer(w, m[:, i] * m[:, j])
    if noise_sigma2 > 0:
        if rng is None:
            raise ValueError("an rng is required when noise_sigma2 > 0")
        y = y + math.sqrt(noise_sigma2) * rng.standard_normal(y.shape)
    if width is None:
        width, height = l, 1
    return HyperCube(y, width, height)


def synthetic_gamma_map(width, height):
    """``gamma_12`` on a ``height x width`` grid.

    Zero outside the upper-left quadrant.  Inside it, gamma grows linearly
    with the index distance from the quadrant's innermost pixel (next to the
    image centre) and reaches one at the upper-left corner pixel.
    """
    if width < 2 or height < 2 or width % 2 or height % 2:
        raise ValueError("width and height must be even and >= 2")
    g = np.zeros((height, width))
    h2, w2 = height // 2, width // 2
    rows, cols = np.mgrid[0:h2, 0:w2]
    diag = math.hypot(h2 - 1, w2 - 1)
    if diag == 0:
        g[0, 0] = 1.0
        return g
    dist = np.hypot(h2 - 1 - rows, w2 - 1 - cols)
    g[:h2, :w2] = np.minimum(1.0, dist / diag)
    return g


def gamma_tensor(gamma12, r=3):
    """``(L, r, r)`` coefficients with only ``gamma_12`` nonzero."""
    flat = np.asarray(gamma12, dtype=float).ravel()
    g = np.zeros((flat.size, r, r))
    if r >= 2:
        g[:, 0, 1] = flat
    return g


def band_centers(n_bands):
    """Wavelengths in micrometres, evenly spread over 0.4-2.5."""
    return np.linspace(0.4, 2.5, n_bands)


def synthetic_endmembers(n_bands=DEFAULT_BANDS):
    """Three smooth reflectance-like spectra.

    1. vegetation-like: low visible reflectance, red edge near 0.72, two
       broad water dips;
    2. soil-like: a slow ramp with a broad bump near 1 um;
    3. a dark, decaying spectrum.
    """
    w = band_centers(n_bands)
    veg = (0.05 + 0.7 / (1.0 + np.exp(-(w - 0.72) / 0.03))
           - 0.35 * np.exp(-((w - 1.45) / 0.1) ** 2)
           - 0.45 * np.exp(-((w - 1.95) / 0.12) ** 2))
    soil = 0.15 + 0.4 * (w - 0.4) / 2.1 + 0.4 * np.exp(-((w - 1.0) / 0.3) ** 2)
    dark = 0.03 + 0.3 * np.exp(-(w - 0.4) / 0.35)
    return EndmemberSet(np.clip(np.column_stack([veg, soil, dark]), 0.0, None))


@dataclass(frozen=True)
class SyntheticScene:
    cube: HyperCube
    endmembers: EndmemberSet
    abundances: AbundanceField
    gamma12: np.ndarray  # height x width

    @property
    def nonlinear_mask(self):
        # the whole upper-left quadrant, including its gamma = 0 inner pixel
        return ~self.linear_mask

    @property
    def linear_mask(self):
        h, w = self.gamma12.shape
        mask = np.ones((h, w), dtype=bool)
        mask[: h // 2, : w // 2] = False
        return mask


def synthetic_scene(width=50, height=50, n_bands=DEFAULT_BANDS, noise_sigma2=DEFAULT_NOISE_SIGMA2,
                    rng=None):
    """Upper-left quadrant bilinear, the rest linear, three endmembers."""
    rng = np.random.default_rng(0) if rng is None else rng
    em = synthetic_endmembers(n_bands)
    ab = sample_simplex_abundances(em.r, width * height, rng)
    g12 = synthetic_gamma_map(width, height)
    cube = generate_gbm_image(em, ab, gamma_tensor(g12, em.r), noise_sigma2, rng, width, height)
    return SyntheticScene(cube, em, ab, g12)


# ---------------------------------------------------------------------------
# analysis
# ---------------------------------------------------------------------------


def centered_pixels(cube):
    y = cube.pixels
    return y - y.mean(axis=0)


def global_covariance(cube):
    yc = centered_pixels(cube)
    return yc.T @ yc / cube.n_pixels


def global_pca_basis(cube, p):
    """Top-``p`` principal directions of the mean-centred pixels (this is Ubar)."""
    if not 1 <= p <= min(cube.n_pixels, cube.bands):
        raise ValueError(f"p must lie in [1, {min(cube.n_pixels, cube.bands)}], got {p}")
    return top_p_eigvecs(global_covariance(cube), p)


def plugin_noise_variance(cube, p):
    """Mean of the trailing ``N - p`` eigenvalues of the global covariance."""
    vals = np.linalg.eigvalsh(global_covariance(cube))[::-1]
    tail = vals[p:]
    est = float(np.mean(tail)) if tail.size else 0.0
    return max(est, SIGMA2_FLOOR * max(float(vals[0]), 1.0))


def knn_neighbors(cube, ell, k):
    """The ``k - 1`` spectrally nearest pixels to ``ell``, ties by ascending index."""
    y = cube.pixels
    if k < 1 or k - 1 >= cube.n_pixels:
        raise ValueError(f"need 1 <= k and k - 1 < L = {cube.n_pixels}")
    d2 = np.sum((y - y[ell]) ** 2, axis=1)
    order = np.argsort(d2, kind="stable")
    order = order[order != ell]
    return order[: k - 1]


def _map_chunk(y, yc, ubar, eta, k, sigma2_n, idx):
    cube = HyperCube(y, y.shape[0], 1)
    spec = LinearModelSpec(ubar, eta / (2.0 * sigma2_n), sigma2_n, PriorKind.BINGHAM)
    out = np.empty(len(idx))
    for n, ell in enumerate(idx):
        nb = knn_neighbors(cube, ell, k)
        patch = yc[np.concatenate([[ell], nb])].T
        out[n] = squared_distance(mmsd_closed_form(patch, spec), ubar)
    return out


def local_mmsd_map(cube, ubar, eta, k=4, sigma2_n=None, threads=1):
    """Per-pixel ``d^2(U_l, Ubar)`` with ``U_l`` the closed-form MMSD of the local patch.

    The patch is the pixel and its ``k - 1`` spectral neighbours, centred by
    the global mean.  ``kappa = eta / (2 sigma2_n)``; ``eta = 0`` reduces to
    the local SVD.
    """
    ubar = np.asarray(ubar, dtype=float)
    p = ubar.shape[1]
    if k < 2:
        raise ValueError("k must be >= 2")
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if sigma2_n is None:
        sigma2_n = plugin_noise_variance(cube, p)
    if not sigma2_n > 0:
        raise ValueError("sigma2_n must be positive")
    y = cube.pixels
    yc = centered_pixels(cube)
    idx = np.arange(cube.n_pixels)
    if threads is None or threads <= 1:
        vals = _map_chunk(y, yc, ubar, eta, k, sigma2_n, idx)
    else:
        chunks = np.array_split(idx, threads * 4)
        with ProcessPoolExecutor(max_workers=threads) as ex:
            futs = [ex.submit(_map_chunk, y, yc, ubar, eta, k, sigma2_n, c) for c in chunks]
            vals = np.concatenate([f.result() for f in futs])
    return NonlinearityMap(vals.reshape(cube.height, cube.width), float(eta), int(k), p, float(sigma2_n))


def region_contrast(nmap, scene):
    """Mean map value over the nonlinear pixels and over the linear region."""
    v = nmap.values
    return float(v[scene.nonlinear_mask].mean()), float(v[scene.linear_mask].mean())
