"""Gaussian-mixture phantoms with closed-form plane integrals.

Each term is ``weight * exp(-0.5 (t - c)^T C^{-1} (t - c))``.  Point
evaluation is written with explicit elementwise sums over the (small)
ambient dimension so that results do not depend on array shape or on BLAS
threading.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from .errors import RankDeficient
from .geometry import Dimensions, PlaneChart


@dataclass(frozen=True, eq=False)
class GaussianTerm:
    weight: float
    center: np.ndarray
    cov: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False)
    _chol_inv: np.ndarray = field(init=False, repr=False)
    _logdet: float = field(init=False, repr=False)

    def __post_init__(self):
        center = np.array(self.center, dtype=float).ravel()
        n = center.shape[0]
        cov = np.eye(n) if self.cov is None else np.array(self.cov, dtype=float)
        if cov.shape != (n, n):
            raise ValueError(f"cov shape {cov.shape} does not match center length {n}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ValueError("cov must be symmetric")
        cov = 0.5 * (cov + cov.T)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("cov must be positive definite") from exc
        if not np.isfinite(self.weight):
            raise ValueError("weight must be finite")
        for a in (center, cov):
            a.setflags(write=False)
        chol_inv = np.linalg.inv(chol)
        chol.setflags(write=False)
        chol_inv.setflags(write=False)
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_chol_inv", chol_inv)
        object.__setattr__(self, "_logdet", 2.0 * float(np.sum(np.log(np.diag(chol)))))

    @property
    def n(self) -> int:
        return self.center.shape[0]

    @property
    def mass(self) -> float:
        """Integral of the term over R^n."""
        return self.weight * (2 * np.pi) ** (self.n / 2) * np.exp(0.5 * self._logdet)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        n = self.n
        d = [t[..., b] - self.center[b] for b in range(n)]
        q = np.zeros(t.shape[:-1])
        for a in range(n):
            z = self._chol_inv[a, 0] * d[0]
            for b in range(1, a + 1):
                z = z + self._chol_inv[a, b] * d[b]
            q = q + z * z
        return self.weight * np.exp(-0.5 * q)


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    dims: Dimensions
    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        for term in terms:
            if term.n != self.dims.n:
                raise ValueError(f"term of dimension {term.n} in a mixture with n={self.dims.n}")
        object.__setattr__(self, "terms", terms)

    def __call__(self, t) -> np.ndarray:
        return eval_phantom(self, t)

    @property
    def mass(self) -> float:
        return float(sum(term.mass for term in self.terms))

    def mean_center(self) -> np.ndarray:
        """Centroid of the term centres weighted by |weight|."""
        if not self.terms:
            return np.zeros(self.dims.n)
        w = np.array([abs(t.weight) for t in self.terms])
        if w.sum() == 0:
            w = np.ones_like(w)
        return sum(wi * t.center for wi, t in zip(w, self.terms)) / w.sum()

    def max_variance(self) -> float:
        if not self.terms:
            return 1.0
        return float(max(np.linalg.eigvalsh(t.cov)[-1] for t in self.terms))

    def to_dict(self) -> dict:
        return {
            "n": self.dims.n,
            "p": self.dims.p,
            "terms": [
                {"weight": t.weight, "center": t.center.tolist(), "cov": t.cov.tolist()}
                for t in self.terms
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianMixture":
        dims = Dimensions(int(data["n"]), int(data["p"]))
        terms = [
            GaussianTerm(float(t.get("weight", 1.0)), t["center"], t.get("cov"))
            for t in data["terms"]
        ]
        return cls(dims, terms)


def load_phantom(path) -> GaussianMixture:
    with open(path) as fh:
        return GaussianMixture.from_dict(json.load(fh))


def save_phantom(phi: GaussianMixture, path) -> None:
    Path(path).write_text(json.dumps(phi.to_dict(), indent=2) + "\n")


def eval_phantom(phi: GaussianMixture, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.shape[-1] != phi.dims.n:
        raise ValueError(f"points must have trailing dimension {phi.dims.n}")
    out = np.zeros(t.shape[:-1])
    for term in phi.terms:
        out = out + term(t)
    return out if out.ndim else float(out)


def _term_plane_integral(term: GaussianTerm, sigma: np.ndarray, tau: np.ndarray) -> np.ndarray:
    # sigma (..., k), tau (..., k, n).  tau C tau^T = R^T R from the QR of
    # (tau L)^T, which avoids squaring the conditioning of tau.
    p = tau.shape[-1] - tau.shape[-2]
    a = np.swapaxes(tau @ term._chol, -1, -2)
    rfac = np.linalg.qr(a, mode="r")
    diag = np.abs(np.diagonal(rfac, axis1=-2, axis2=-1))
    if np.any(diag <= 1e-14 * diag.max(axis=-1, keepdims=True)):
        raise RankDeficient("tau is rank deficient")
    r = np.einsum("...ia,a->...i", tau, term.center) + sigma
    y = np.linalg.solve(np.swapaxes(rfac, -1, -2), r[..., None])[..., 0]
    quad = np.einsum("...i,...i->...", y, y)
    return (term.weight * (2 * np.pi) ** (p / 2) * np.exp(0.5 * term._logdet)
            / np.prod(diag, axis=-1) * np.exp(-0.5 * quad))


def analytic_radon_batch(phi: GaussianMixture, sigma, tau) -> np.ndarray:
    """Closed-form delta-kernel transform for stacks of charts.

    ``sigma`` has shape ``(..., n - p)`` and ``tau`` shape ``(..., n - p, n)``.
    """
    sigma = np.asarray(sigma, dtype=float)
    tau = np.asarray(tau, dtype=float)
    out = np.zeros(sigma.shape[:-1])
    for term in phi.terms:
        out = out + _term_plane_integral(term, sigma, tau)
    return out


def analytic_radon(phi: GaussianMixture, plane: PlaneChart) -> float:
    r"""Exact value of ``\int phi(t) prod_i delta(<t, tau_i> + sigma_i) dt``.

    Per term the integral is
    ``w (2 pi)^{p/2} det(C)^{1/2} det(tau C tau^T)^{-1/2} exp(-r^T (tau C tau^T)^{-1} r / 2)``
    with ``r = tau c + sigma``.
    """
    if plane.tau.shape[1] != phi.dims.n:
        raise ValueError("plane and phantom live in different dimensions")
    return float(analytic_radon_batch(phi, plane.sigma, plane.tau))


def _gaussian_raw_moment(mean: float, std: float, m: int) -> float:
    total = 0.0
    dfact = 1.0  # (k - 1)!! for even k
    for k in range(0, m + 1, 2):
        if k > 0:
            dfact *= k - 1
        total += comb(m, k) * mean ** (m - k) * std ** k * dfact
    return total


def moment_oracle(phi: GaussianMixture, tau_unit, m: int) -> float:
    r"""``\int sigma^m psi(sigma, tau) d sigma`` for the hyperplane transform.

    Equals ``\int phi(t) (-<t, tau>)^m dt``; per term ``-<t, tau>`` is Gaussian
    with mean ``-<c, tau>`` and variance ``tau^T C tau``.
    """
    tau = np.asarray(tau_unit, dtype=float).ravel()
    if phi.dims.p != phi.dims.n - 1:
        raise ValueError("moment_oracle needs the hyperplane case p = n - 1")
    if abs(np.linalg.norm(tau) - 1.0) > 1e-10:
        raise ValueError("tau_unit must have unit length")
    if m < 0:
        raise ValueError("m must be >= 0")
    total = 0.0
    for term in phi.terms:
        mean = -float(term.center @ tau)
        std = float(np.sqrt(tau @ term.cov @ tau))
        total += term.mass * _gaussian_raw_moment(mean, std, m)
    return total


def fourier_transform(phi: GaussianMixture, k) -> np.ndarray:
    r"""``\hat\phi(k) = \int phi(t) exp(-i <k, t>) dt`` for rows of ``k``."""
    k = np.atleast_2d(np.asarray(k, dtype=float))
    out = np.zeros(k.shape[0], dtype=complex)
    for term in phi.terms:
        quad = np.einsum("ia,ab,ib->i", k, term.cov, k)
        out += term.mass * np.exp(-1j * (k @ term.center) - 0.5 * quad)
    return out


def unit_gaussian(n: int, p: int = None) -> GaussianMixture:
    """Isotropic unit-weight Gaussian at the origin (hyperplane case by default)."""
    p = n - 1 if p is None else p
    return GaussianMixture(Dimensions(n, p), [GaussianTerm(1.0, np.zeros(n), np.eye(n))])


def random_mixture(dims: Dimensions, n_terms: int, seed,
                   center_scale: float = 1.0,
                   eig_range: tuple = (0.3, 1.5),
                   weight_range: tuple = (0.5, 2.0)) -> GaussianMixture:
    """Random mixture with SPD covariances of bounded spectrum."""
    rng = np.random.default_rng(seed)
    n = dims.n
    terms = []
    for _ in range(n_terms):
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        eig = rng.uniform(*eig_range, size=n)
        cov = (q * eig) @ q.T
        cov = 0.5 * (cov + cov.T)
        center = rng.uniform(-center_scale, center_scale, size=n)
        weight = rng.uniform(*weight_range)
        terms.append(GaussianTerm(weight, center, cov))
    return GaussianMixture(dims, terms)
