"""Numerical affine p-plane Radon transform and sinograms.

``radon_point`` integrates the field over the plane in its canonical
orthonormal chart and multiplies by ``det(tau tau^T)^{-1/2}``; that factor
turns the surface integral into ``\\int phi(t) prod_i delta(<t, tau_i> +
sigma_i) dt`` and makes ``psi(sigma mu, tau mu) = |det mu|^{-1} psi(sigma,
tau)`` hold exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
import scipy.special

from ._parallel import pmap
from .errors import QuadratureOverflow
from .geometry import Dimensions, FrameSet, PlaneChart, feet, kernel_basis
from .phantoms import GaussianMixture, eval_phantom

CONVENTION_TAG = "delta-kernel-v1"
_CHUNK = 1 << 20  # points evaluated per batch

Field = Union[GaussianMixture, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature over the p chart variables of a plane.

    ``scale`` is the width of the Gauss-Hermite weight; ``None`` picks the
    largest phantom standard deviation (1 for plain callables).  ``budget``
    caps ``nodes_per_axis ** p``.
    """

    scheme: str = "gauss_hermite"
    nodes_per_axis: int = 64
    radius: float = 8.0
    scale: Optional[float] = None
    budget: int = 1 << 24

    def __post_init__(self):
        if self.scheme not in ("gauss_hermite", "trapezoid"):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if self.nodes_per_axis < 2:
            raise ValueError("nodes_per_axis must be >= 2")
        if self.scheme == "gauss_hermite" and self.nodes_per_axis > 160:
            raise ValueError("gauss_hermite supports at most 160 nodes per axis")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.scale is not None and not self.scale > 0:
            raise ValueError("scale must be positive")


@dataclass(frozen=True)
class SigmaGrid:
    """Uniform per-axis grids ``(lo, hi, count)`` for the offsets sigma."""

    axes: tuple

    def __post_init__(self):
        axes = tuple((float(lo), float(hi), int(c)) for lo, hi, c in self.axes)
        for lo, hi, c in axes:
            if c < 1 or (c > 1 and not hi > lo):
                raise ValueError(f"bad sigma axis {(lo, hi, c)}")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def uniform(cls, codim: int, radius: float = 6.0, count: int = 256) -> "SigmaGrid":
        return cls(((-radius, radius, count),) * codim)

    @classmethod
    def parse(cls, text: str, codim: int) -> "SigmaGrid":
        """``"lo:hi:count"`` (all axes) or a comma-separated list per axis."""
        parts = [s for s in text.split(",") if s.strip()]
        axes = []
        for part in parts:
            fields = part.split(":")
            if len(fields) != 3:
                raise ValueError(f"bad sigma axis {part!r}, expected lo:hi:count")
            axes.append((float(fields[0]), float(fields[1]), int(fields[2])))
        if len(axes) == 1:
            axes = axes * codim
        if len(axes) != codim:
            raise ValueError(f"need {codim} sigma axes, got {len(axes)}")
        return cls(tuple(axes))

    @property
    def shape(self) -> tuple:
        return tuple(c for _, _, c in self.axes)

    def points(self, axis: int) -> np.ndarray:
        lo, hi, c = self.axes[axis]
        return np.linspace(lo, hi, c)

    def step(self, axis: int) -> float:
        lo, hi, c = self.axes[axis]
        return (hi - lo) / (c - 1) if c > 1 else 0.0

    def cells(self) -> np.ndarray:
        """All sigma vectors in C order, shape ``(prod(shape), codim)``."""
        mesh = np.meshgrid(*[self.points(i) for i in range(len(self.axes))], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True, eq=False)
class Sinogram:
    dims: Dimensions
    frames: FrameSet
    sigma_grid: SigmaGrid
    values: np.ndarray
    convention_tag: str = CONVENTION_TAG

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        expected = (len(self.frames),) + self.sigma_grid.shape
        if values.shape != expected:
            raise ValueError(f"values have shape {values.shape}, expected {expected}")
        if len(self.sigma_grid.axes) != self.dims.codim:
            raise ValueError("sigma grid must have one axis per codimension")
        if not np.all(np.isfinite(values)):
            raise FloatingPointError("sinogram values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def directions(self) -> np.ndarray:
        """Frame direction matrices, shape ``(frames, n - p, n)``."""
        return self.frames.taus()


@dataclass(frozen=True)
class DecayReport:
    ratio: float
    flagged: bool
    threshold: float

    def to_dict(self) -> dict:
        return {"ratio": self.ratio, "non_rapid_decrease": self.flagged,
                "threshold": self.threshold}


@lru_cache(maxsize=64)
def _rule_1d(scheme: str, nodes: int, radius: float):
    if scheme == "gauss_hermite":
        x, w = scipy.special.roots_hermite(nodes)
        # weights for integrating g directly: w * exp(x^2) * sqrt(2)
        return np.sqrt(2.0) * x, np.sqrt(2.0) * np.exp(np.log(w) + x * x)
    x = np.linspace(-radius, radius, nodes)
    w = np.full(nodes, x[1] - x[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return x, w


def _product_rule(quad: QuadratureSpec, p: int, scale: float):
    if quad.nodes_per_axis ** p > quad.budget:
        raise QuadratureOverflow(
            f"{quad.nodes_per_axis}^{p} nodes exceed the budget of {quad.budget}")
    x, w = _rule_1d(quad.scheme, quad.nodes_per_axis, float(quad.radius))
    if quad.scheme == "gauss_hermite":
        x = scale * x
        w = scale * w
    if p == 0:
        return np.zeros((1, 0)), np.ones(1)
    grids = np.meshgrid(*([x] * p), indexing="ij")
    wgrids = np.meshgrid(*([w] * p), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = wgrids[0].ravel().copy()
    for g in wgrids[1:]:
        weights = weights * g.ravel()
    return nodes, weights


def _evaluate(phi: Field, pts: np.ndarray) -> np.ndarray:
    if isinstance(phi, GaussianMixture):
        return np.asarray(eval_phantom(phi, pts), dtype=float)
    return np.asarray(phi(pts), dtype=float).reshape(pts.shape[:-1])


def _field_hints(phi: Field, n: int, quad: QuadratureSpec):
    if isinstance(phi, GaussianMixture):
        center = phi.mean_center()
        scale = np.sqrt(phi.max_variance())
    else:
        center = None
        scale = 1.0
    if quad.scale is not None:
        scale = quad.scale
    return center, scale


def plane_integrals(phi: Field, tau, sigmas, quad: QuadratureSpec = None) -> np.ndarray:
    """Delta-kernel transform for one direction matrix and many offsets.

    Every row of ``sigmas`` goes through exactly the same elementwise
    operations, so a value does not depend on which other offsets are
    computed with it.
    """
    quad = QuadratureSpec() if quad is None else quad
    tau = np.atleast_2d(np.asarray(tau, dtype=float))
    sigmas = np.atleast_2d(np.asarray(sigmas, dtype=float))
    k, n = tau.shape
    p = n - k
    basis = kernel_basis(tau)
    origins = feet(tau, sigmas)
    _, r = np.linalg.qr(tau.T)
    det_factor = 1.0 / abs(float(np.prod(np.diag(r))))
    center, scale = _field_hints(phi, n, quad)
    nodes, weights = _product_rule(quad, p, scale)

    # shift nodes to the point of the plane closest to the phantom centre
    shift = np.zeros((sigmas.shape[0], p))
    if center is not None:
        for j in range(p):
            for a in range(n):
                shift[:, j] = shift[:, j] + basis[a, j] * (center[a] - origins[:, a])

    out = np.empty(sigmas.shape[0])
    rows = max(1, _CHUNK // max(1, nodes.shape[0]))
    for start in range(0, sigmas.shape[0], rows):
        sl = slice(start, start + rows)
        y = [shift[sl, j:j + 1] + nodes[:, j] for j in range(p)]
        pts = np.empty(y[0].shape + (n,) if p else (origins[sl].shape[0], 1, n))
        for a in range(n):
            acc = np.broadcast_to(origins[sl, a:a + 1], pts.shape[:-1]).copy()
            for j in range(p):
                acc = acc + basis[a, j] * y[j]
            pts[..., a] = acc
        vals = _evaluate(phi, pts)
        out[sl] = np.sum(vals * weights, axis=-1)
    return det_factor * out


def radon_point(phi: Field, plane: PlaneChart, quad: QuadratureSpec = None) -> float:
    """``det(tau tau^T)^{-1/2}`` times the surface integral of ``phi`` over the plane."""
    if isinstance(phi, GaussianMixture) and phi.dims.n != plane.tau.shape[1]:
        raise ValueError("plane and phantom live in different dimensions")
    return float(plane_integrals(phi, plane.tau, plane.sigma[None, :], quad)[0])


def radon_sinogram(phi: Field, frames: FrameSet, sigma_grid: SigmaGrid,
                   quad: QuadratureSpec = None, threads=None) -> Sinogram:
    """Sample the transform on ``frames x sigma_grid``.

    Frames are processed in parallel; each task writes only its own slab of
    the output, so the array is identical for any thread count.
    """
    dims = frames.dims
    if isinstance(phi, GaussianMixture) and phi.dims.n != dims.n:
        raise ValueError("phantom and frames live in different dimensions")
    if len(sigma_grid.axes) != dims.codim:
        raise ValueError("sigma grid must have one axis per codimension")
    cells = sigma_grid.cells()
    values = np.empty((len(frames),) + sigma_grid.shape)

    def run(f):
        values[f] = plane_integrals(phi, frames[f].tau, cells, quad).reshape(sigma_grid.shape)

    pmap(run, range(len(frames)), threads)
    return Sinogram(dims, frames, sigma_grid, values)


def sinogram_decay_report(s: Sinogram, threshold: float = 1e-4) -> DecayReport:
    """Largest boundary value relative to the largest value overall."""
    v = np.abs(s.values)
    peak = float(v.max()) if v.size else 0.0
    if peak == 0.0:
        return DecayReport(0.0, False, threshold)
    shell = 0.0
    for axis in range(1, v.ndim):
        for idx in (0, -1):
            shell = max(shell, float(np.take(v, idx, axis=axis).max()))
    ratio = shell / peak
    return DecayReport(ratio, ratio > threshold, threshold)
