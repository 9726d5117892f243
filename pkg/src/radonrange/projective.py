"""Real projective transform, homogeneity extension and the complex kernel.

A density of degree ``-p-1`` on ``R^{n+1}`` is stored by its values on the
unit sphere.  For orthonormal ``xi`` the transform is half the round-measure
integral over the great p-subsphere ``S^n cap ker(xi)``; the half accounts
for the double cover of projective space.

The complex kernel is represented by its scalar factor
``g(z, zeta) = prod_i <z, zeta_i>^{-1}`` together with the coefficients of
the Leray form; the form-valued kernel itself is never built.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.special

from .errors import EvalFailure, IndexOutOfRange, NotOrthonormal, OnIncidence, RankDeficient
from .geometry import RANK_TOL, Dimensions, kernel_basis
from .rangecheck import ResidualReport, StiefelFunction, john_residual_field

EVEN_TOL = 1e-12
ORTHO_TOL = 1e-12
INCIDENCE_GUARD = 1e-300
FD_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class HomogeneousField:
    """Even density of degree ``-p-1``, given on unit vectors of ``R^{n+1}``.

    ``func`` maps an array ``(..., n + 1)`` of unit vectors to values.
    Evenness is probed at construction on deterministic random points.
    """

    func: Callable
    n: int
    p: int
    probes: int = 32

    def __post_init__(self):
        Dimensions(self.n, self.p)
        rng = np.random.default_rng(12345)
        x = rng.standard_normal((self.probes, self.n + 1))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        a = np.asarray(self.func(x), dtype=float)
        b = np.asarray(self.func(-x), dtype=float)
        if a.shape != (self.probes,) or not np.all(np.isfinite(a)):
            raise ValueError("field must return one finite value per unit vector")
        gap = np.abs(a - b)
        if np.any(gap > EVEN_TOL * np.maximum(1.0, np.abs(a))):
            raise ValueError(f"field is not even: |phi(x) - phi(-x)| up to {gap.max():.3g}")

    @property
    def degree(self) -> int:
        return -self.p - 1

    def on_sphere(self, x) -> np.ndarray:
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def __call__(self, x) -> np.ndarray:
        """Off-sphere values through ``phi(lambda x) = |lambda|^{-p-1} phi(x)``."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        return r ** self.degree * self.on_sphere(x / r[..., None])


@lru_cache(maxsize=32)
def sphere_rule(p: int, nodes: int):
    """Nodes ``(N, p + 1)`` and weights for the round measure on ``S^p``.

    ``p = 1`` uses equiangular nodes.  For ``p >= 2`` the polar angles carry
    weights ``sin^m(theta)``; with ``t = cos(theta)`` these become
    Gauss-Jacobi rules with ``alpha = beta = (m - 1) / 2``, and the last
    angle is equiangular.  Weights sum to the sphere's area.
    """
    if p == 0:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    phi = 2.0 * np.pi * np.arange(2 * nodes) / (2 * nodes)
    circle = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    cw = np.full(2 * nodes, np.pi / nodes)
    pts, wts = circle, cw
    for m in range(1, p):
        a = 0.5 * (m - 1)
        t, w = scipy.special.roots_jacobi(nodes, a, a)
        s = np.sqrt(1.0 - t * t)
        new = np.concatenate([np.repeat(t, len(pts))[:, None],
                              (s[:, None, None] * pts[None, :, :]).reshape(-1, pts.shape[1])], axis=1)
        pts = new
        wts = (w[:, None] * wts[None, :]).ravel()
    return pts, wts


def _check_orthonormal(xi: np.ndarray) -> None:
    gram = xi @ xi.T
    if np.max(np.abs(gram - np.eye(xi.shape[0]))) > ORTHO_TOL:
        raise NotOrthonormal("projective_radon needs orthonormal rows")


def projective_radon(phi: HomogeneousField, xi, nodes: int = 64) -> float:
    """``1/2`` times the integral of ``phi`` over the unit p-subsphere ``ker(xi)``."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    k, m = xi.shape
    if m != phi.n + 1 or k != phi.n - phi.p:
        raise ValueError(f"xi must be {phi.n - phi.p} x {phi.n + 1}")
    _check_orthonormal(xi)
    basis = kernel_basis(xi)
    u, w = sphere_rule(phi.p, nodes)
    x = np.zeros((u.shape[0], m))
    for a in range(m):
        for j in range(u.shape[1]):
            x[:, a] = x[:, a] + basis[a, j] * u[:, j]
    vals = phi.on_sphere(x)
    return 0.5 * float(np.sum(vals * w))


def _full_rank(tau: np.ndarray) -> None:
    s = np.linalg.svd(tau, compute_uv=False)
    if s.size == 0 or s[-1] <= RANK_TOL * s[0]:
        raise RankDeficient("tau does not have full row rank")


def gram_factor(tau, method: str = "cholesky"):
    """``tau = mu @ rho`` with orthonormal rows in ``rho``.

    ``cholesky`` takes the lower-triangular factor of ``tau tau^T``; ``polar``
    takes its symmetric square root.
    """
    tau = np.atleast_2d(np.asarray(tau, dtype=float))
    _full_rank(tau)
    gram = tau @ tau.T
    if method == "cholesky":
        mu = np.linalg.cholesky(gram)
    elif method == "polar":
        vals, vecs = np.linalg.eigh(gram)
        mu = (vecs * np.sqrt(vals)) @ vecs.T
    else:
        raise ValueError(f"unknown factorization {method!r}")
    rho = np.linalg.solve(mu, tau)
    return mu, rho


def extend_homogeneous(psi: Callable, tau, method: str = "cholesky") -> float:
    """Evaluate ``psi`` off the orthonormal section: ``|det mu|^{-1} psi(rho)``."""
    mu, rho = gram_factor(tau, method)
    return float(psi(rho)) / abs(float(np.linalg.det(mu)))


def projective_stiefel_function(phi: HomogeneousField, nodes: int = 64) -> StiefelFunction:
    def func(xi):
        return extend_homogeneous(lambda r: projective_radon(phi, r, nodes), xi)
    return StiefelFunction(func, Dimensions(phi.n, phi.p), degree=-(phi.n - phi.p))


def projective_john_residual(phi: HomogeneousField, xi_samples, h: float,
                             order: int = 2, nodes: int = 64, threads=None) -> ResidualReport:
    """John brackets of the extended projective transform.

    Columns of the samples are the homogeneous coordinates ``0..n`` directly.
    """
    return john_residual_field(projective_stiefel_function(phi, nodes), xi_samples, h,
                               order, threads)


@dataclass(frozen=True, eq=False)
class ComplexFrame:
    z: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=complex).ravel()
        zeta = np.atleast_2d(np.asarray(self.zeta, dtype=complex))
        if zeta.shape[1] != z.shape[0]:
            raise ValueError("zeta rows must have the length of z")
        if zeta.shape[0] >= z.shape[0]:
            raise ValueError("need fewer than n + 1 rows in zeta")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "zeta", zeta)

    @property
    def dims(self) -> Dimensions:
        n = self.z.shape[0] - 1
        return Dimensions(n, n - self.zeta.shape[0])

    def pairings(self) -> np.ndarray:
        """``<z, zeta_i>`` (bilinear, no conjugation)."""
        out = np.zeros(self.zeta.shape[0], dtype=complex)
        for j in range(self.z.shape[0]):
            out = out + self.zeta[:, j] * self.z[j]
        return out


def _guarded_pairings(frame: ComplexFrame) -> np.ndarray:
    a = frame.pairings()
    if np.any(np.abs(a) <= INCIDENCE_GUARD):
        raise OnIncidence("z lies on one of the hyperplanes <z, zeta_i> = 0")
    return a


def kernel_scalar(frame: ComplexFrame) -> complex:
    g = 1.0 + 0.0j
    for a in _guarded_pairings(frame):
        g = g * (1.0 / a)
    return complex(g)


def leray_coefficient(z, j: int) -> complex:
    z = np.asarray(z, dtype=complex).ravel()
    if not 0 <= j < z.shape[0]:
        raise IndexOutOfRange(f"j={j} outside [0, {z.shape[0]})")
    return complex((-1) ** j * z[j])


def kernel_scale(frame: ComplexFrame) -> float:
    """``|g| ||z||^2 / min_i |<z, zeta_i>|^2``, the natural size of second derivatives."""
    a = _guarded_pairings(frame)
    return abs(kernel_scalar(frame)) * float(np.sum(np.abs(frame.z) ** 2)) / float(np.min(np.abs(a)) ** 2)


def _analytic_hessian(frame: ComplexFrame) -> np.ndarray:
    a = _guarded_pairings(frame)
    g = kernel_scalar(frame)
    d = -frame.z[None, :] / a[:, None]          # dg/dzeta_i^j = d[i, j] g
    k = a.shape[0]
    hess = g * d[:, :, None, None] * d[None, None, :, :]
    for i in range(k):
        hess[i, :, i, :] *= 2.0
    return hess


def _fd_hessian(frame: ComplexFrame, h: float) -> np.ndarray:
    zeta = frame.zeta
    k, m = zeta.shape
    hess = np.zeros((k, m, k, m), dtype=complex)

    def g_at(zz):
        return kernel_scalar(ComplexFrame(frame.z, zz))

    entries = [(i, j) for i in range(k) for j in range(m)]
    for x, (i, j) in enumerate(entries):
        for (i2, j2) in entries[x:]:
            vals = []
            for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                zz = zeta.copy()
                zz[i, j] += sa * h
                zz[i2, j2] += sb * h
                vals.append(g_at(zz))
            v = ((vals[0] - vals[1]) - vals[2] + vals[3]) / (4.0 * h * h)
            hess[i, j, i2, j2] = v
            hess[i2, j2, i, j] = v
    return hess


def kernel_john_check(frame: ComplexFrame, mode: str = "analytic", h: float = FD_STEP) -> float:
    """Largest John bracket of ``g`` in the ``zeta`` variables.

    ``analytic`` builds every second derivative from the first-derivative
    factors ``-z_j / <z, zeta_i>`` and subtracts; ``finite_difference`` uses
    central mixed differences with step ``h``.  One row means no brackets.
    """
    if mode not in ("analytic", "finite_difference"):
        raise ValueError(f"unknown mode {mode!r}")
    _guarded_pairings(frame)
    if frame.zeta.shape[0] == 1:
        return 0.0
    hess = _analytic_hessian(frame) if mode == "analytic" else _fd_hessian(frame, h)
    first = np.transpose(hess, (0, 2, 1, 3))    # [i, i', j, j']
    second = np.transpose(hess, (0, 2, 3, 1))
    r = np.abs(first - second)
    if not np.all(np.isfinite(r)):
        raise EvalFailure("non-finite kernel derivatives")
    return float(r.max())


def random_complex_frame(n: int, p: int, rng: np.random.Generator,
                         margin: float = 0.1) -> ComplexFrame:
    """Unit ``z`` and unit rows ``zeta_i`` with every ``|<z, zeta_i>| >= margin``."""
    Dimensions(n, p)
    while True:
        z = rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)
        zeta = rng.standard_normal((n - p, n + 1)) + 1j * rng.standard_normal((n - p, n + 1))
        z /= np.linalg.norm(z)
        zeta /= np.linalg.norm(zeta, axis=1, keepdims=True)
        frame = ComplexFrame(z, zeta)
        if np.all(np.abs(frame.pairings()) >= margin):
            return frame
