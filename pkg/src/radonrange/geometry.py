"""Affine p-planes in R^n in Stiefel coordinates.

A plane is written as the solution set of ``tau @ t + sigma = 0`` where
``tau`` is a ``(n - p) x n`` matrix of full row rank and ``sigma`` a vector of
length ``n - p``.  Stacking ``xi_i = (sigma_i, tau_i)`` row by row gives the
``(n - p) x (n + 1)`` Stiefel matrix.  Two charts describe the same plane iff
they differ by the action of GL(n - p) on the rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import RankDeficient, SingularAction

RANK_TOL = 1e-10
DET_TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _check_rank(rows: np.ndarray, rank_tol: float = RANK_TOL) -> None:
    s = np.linalg.svd(rows, compute_uv=False)
    if s.size == 0 or s[0] == 0.0 or s[-1] <= rank_tol * s[0]:
        raise RankDeficient(
            f"rows are not linearly independent (singular values {s})")


@dataclass(frozen=True)
class Dimensions:
    n: int
    p: int

    def __post_init__(self):
        if int(self.n) != self.n or int(self.p) != self.p:
            raise ValueError("n and p must be integers")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0 <= self.p <= self.n - 1:
            raise ValueError(f"need 0 <= p <= n - 1, got n={self.n}, p={self.p}")

    @property
    def codim(self) -> int:
        return self.n - self.p


@dataclass(frozen=True, eq=False)
class PlaneChart:
    """The plane ``{t : tau @ t + sigma = 0}``."""

    sigma: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        tau = np.atleast_2d(np.asarray(self.tau, dtype=float))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float)).ravel()
        if tau.ndim != 2 or tau.shape[0] != sigma.shape[0]:
            raise ValueError(
                f"sigma has length {sigma.shape[0]} but tau has shape {tau.shape}")
        if tau.shape[0] > tau.shape[1]:
            raise RankDeficient("tau has more rows than columns")
        _check_rank(tau)
        object.__setattr__(self, "tau", _frozen(tau))
        object.__setattr__(self, "sigma", _frozen(sigma))

    @property
    def dims(self) -> Dimensions:
        k, n = self.tau.shape
        return Dimensions(n, n - k)

    def contains(self, t, atol: float = 1e-10) -> bool:
        t = np.asarray(t, dtype=float)
        return bool(np.all(np.abs(self.tau @ t + self.sigma) <= atol))


@dataclass(frozen=True, eq=False)
class StiefelPoint:
    """Row ``i`` is ``(sigma_i, tau_i^1, ..., tau_i^n)``."""

    xi: np.ndarray

    def __post_init__(self):
        xi = np.atleast_2d(np.asarray(self.xi, dtype=float))
        if xi.shape[1] < 2 or xi.shape[0] > xi.shape[1] - 1:
            raise ValueError(f"bad Stiefel matrix shape {xi.shape}")
        _check_rank(xi[:, 1:])
        object.__setattr__(self, "xi", _frozen(xi))

    @property
    def dims(self) -> Dimensions:
        k, m = self.xi.shape
        return Dimensions(m - 1, m - 1 - k)


@dataclass(frozen=True, eq=False)
class PlaneFrame:
    """Foot of the plane plus an orthonormal basis of its direction space."""

    origin: np.ndarray
    basis: np.ndarray


@dataclass(frozen=True, eq=False)
class GrassmannPoint:
    """Linear subspace stored as its orthogonal projector."""

    projector: np.ndarray

    @property
    def dim(self) -> int:
        return int(round(np.trace(self.projector)))


@dataclass(frozen=True, eq=False)
class FrameSet:
    dims: Dimensions
    frames: tuple
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i) -> PlaneChart:
        return self.frames[i]

    def taus(self) -> np.ndarray:
        """Stacked direction matrices, shape ``(count, n - p, n)``."""
        return np.stack([f.tau for f in self.frames])


def stiefel_pack(plane: PlaneChart) -> StiefelPoint:
    return StiefelPoint(np.column_stack([plane.sigma, plane.tau]))


def stiefel_unpack(point: StiefelPoint) -> PlaneChart:
    return PlaneChart(point.xi[:, 0], point.xi[:, 1:])


def gl_act(plane: PlaneChart, mu, det_tol: float = DET_TOL) -> PlaneChart:
    """Right action ``(sigma, tau) -> (sigma mu, tau mu)``.

    With the rows of ``tau`` as the vectors ``tau_i`` this is
    ``(tau mu)_i = sum_k mu[k, i] tau_k``.
    """
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    k = plane.tau.shape[0]
    if mu.shape != (k, k):
        raise ValueError(f"mu must be {k}x{k}, got {mu.shape}")
    if abs(np.linalg.det(mu)) <= det_tol:
        raise SingularAction(f"|det mu| <= {det_tol}")
    return PlaneChart(plane.sigma @ mu, mu.T @ plane.tau)


def _orthonormal_rows(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """QR of ``rows.T``: returns (Q, R) with ``rows = R.T @ Q.T``."""
    q, r = np.linalg.qr(rows.T)
    return q, r


def row_space_projector(rows) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    _check_rank(rows)
    q, _ = _orthonormal_rows(rows)
    proj = q @ q.T
    return 0.5 * (proj + proj.T)


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    if basis.shape[1] == 0:
        return basis
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def kernel_basis(rows) -> np.ndarray:
    """Orthonormal basis of ``ker(rows)`` that depends only on the row space.

    Columns of the complementary projector are selected by pivoted QR and
    orthonormalized; the largest-magnitude entry of every column is positive.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    k, n = rows.shape
    dim = n - k
    if dim == 0:
        _check_rank(rows)
        return np.zeros((n, 0))
    comp = np.eye(n) - row_space_projector(rows)
    _, _, piv = scipy.linalg.qr(comp, pivoting=True, mode="economic")
    cols = np.sort(piv[:dim])
    basis, _ = np.linalg.qr(comp[:, cols])
    return _fix_signs(basis)


def right_inverse(tau) -> np.ndarray:
    """``tau^T (tau tau^T)^{-1}`` computed from a QR factorization."""
    tau = np.atleast_2d(np.asarray(tau, dtype=float))
    q, r = _orthonormal_rows(tau)
    return q @ np.linalg.inv(r).T


def feet(tau, sigmas) -> np.ndarray:
    """Minimal-norm solutions of ``tau t = -sigma`` for each row of ``sigmas``.

    Written as elementwise sums so that every row is computed identically no
    matter how many rows are passed.
    """
    a = right_inverse(tau)
    sigmas = np.atleast_2d(np.asarray(sigmas, dtype=float))
    out = np.zeros((sigmas.shape[0], a.shape[0]))
    for i in range(a.shape[1]):
        out = out - sigmas[:, i:i + 1] * a[:, i]
    return out


def canonical_frame(plane: PlaneChart) -> PlaneFrame:
    origin = feet(plane.tau, plane.sigma[None, :])[0]
    return PlaneFrame(_frozen(origin), _frozen(kernel_basis(plane.tau)))


def linear_part(plane: PlaneChart) -> GrassmannPoint:
    """Row space of ``tau``; the fibre of the bundle projection to G'."""
    return GrassmannPoint(_frozen(row_space_projector(plane.tau)))


def _haar_rows(rng: np.random.Generator, count: int, k: int, n: int) -> np.ndarray:
    g = rng.standard_normal((count, n, k))
    q, r = np.linalg.qr(g)
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d[d == 0] = 1.0
    q = q * d[:, None, :]
    return np.swapaxes(q, -1, -2)


def sample_frames(dims: Dimensions, count: int, seed: int) -> FrameSet:
    """``count`` rotation-invariant random charts with orthonormal tau rows."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    taus = _haar_rows(rng, count, dims.codim, dims.n)
    zero = np.zeros(dims.codim)
    return FrameSet(dims, [PlaneChart(zero, t) for t in taus], seed)


def equiangular_frames(count: int, half: bool = False) -> FrameSet:
    """Lines in the plane with normals at equally spaced angles.

    ``half=True`` spaces the angles over ``[0, pi)`` instead of ``[0, 2 pi)``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    span = np.pi if half else 2.0 * np.pi
    theta = span * np.arange(count) / count
    taus = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return FrameSet(Dimensions(2, 1),
                    [PlaneChart([0.0], t[None, :]) for t in taus], None)


def fibonacci_frames(count: int) -> FrameSet:
    """Near-uniform unit normals on S^2 (golden-angle spiral)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    rho = np.sqrt(1.0 - z * z)
    phi = np.pi * (1.0 + 5.0 ** 0.5) * i
    taus = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    return FrameSet(Dimensions(3, 2),
                    [PlaneChart([0.0], t[None, :]) for t in taus], None)


def sample_stiefel_points(dims: Dimensions, count: int, seed: int,
                          sigma_scale: float = 1.0,
                          spread: float = 0.3) -> list:
    """Random well-conditioned Stiefel matrices near the orthonormal section.

    ``tau = mu @ rho`` with ``rho`` Haar-orthonormal and ``mu = I + spread*G``
    (redrawn until its condition number is below 10).
    """
    rng = np.random.default_rng(seed)
    k, n = dims.codim, dims.n
    out = []
    while len(out) < count:
        rho = _haar_rows(rng, 1, k, n)[0]
        mu = np.eye(k) + spread * rng.standard_normal((k, k))
        sigma = rng.uniform(-sigma_scale, sigma_scale, size=k)
        if np.linalg.cond(mu) > 10.0:
            continue
        out.append(StiefelPoint(np.column_stack([sigma, mu @ rho])))
    return out
