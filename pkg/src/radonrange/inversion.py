"""Fourier slices and filtered backprojection for the hyperplane transform.

With unit ``tau`` the plane ``<t, tau> + sigma = 0`` sits at signed distance
``-sigma``, so the sigma profile of a frame is the usual projection reflected.
The inversion used here is

    phi(x) = 1/2 (2 pi)^{1-n} int_{S^{n-1}} (|D|^{n-1} psi_tau)(-<x, tau>) d tau

with ``|D|^{n-1}`` the Fourier multiplier ``|r|^{n-1}`` acting on sigma.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import SphericalVoronoi, cKDTree

from ._parallel import pmap
from .errors import NotHyperplane, UnsupportedDimension
from .geometry import equiangular_frames, fibonacci_frames
from .phantoms import GaussianMixture, eval_phantom
from .transform import QuadratureSpec, SigmaGrid, Sinogram, radon_sinogram

WINDOW = "raised_cosine"


@dataclass(frozen=True, eq=False)
class ReconGrid:
    axes: tuple
    values: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        axes = tuple((float(lo), float(hi), int(c)) for lo, hi, c in self.axes)
        object.__setattr__(self, "axes", axes)
        shape = tuple(c for _, _, c in axes)
        if self.values is None:
            object.__setattr__(self, "values", np.zeros(shape))
        elif np.shape(self.values) != shape:
            raise ValueError(f"values have shape {np.shape(self.values)}, expected {shape}")

    @classmethod
    def cube(cls, n: int, radius: float = 6.0, count: int = 128) -> "ReconGrid":
        return cls(((-radius, radius, count),) * n)

    @property
    def shape(self) -> tuple:
        return tuple(c for _, _, c in self.axes)

    def points(self, axis: int) -> np.ndarray:
        lo, hi, c = self.axes[axis]
        return np.linspace(lo, hi, c)

    def mesh(self) -> np.ndarray:
        """Grid points, shape ``shape + (n,)``."""
        m = np.meshgrid(*[self.points(a) for a in range(len(self.axes))], indexing="ij")
        return np.stack(m, axis=-1)


@dataclass(frozen=True)
class InversionConfig:
    frames: int = 256
    sigma_count: int = 256
    sigma_radius: float = 6.0
    grid_count: int = 128
    grid_radius: float = 6.0
    quad: QuadratureSpec = None
    threads: int = None


def _require_hyperplane(s: Sinogram) -> None:
    if s.dims.p != s.dims.n - 1:
        raise NotHyperplane(f"need p = n - 1, got n={s.dims.n}, p={s.dims.p}")


def _profile_weights(s: Sinogram) -> np.ndarray:
    lo, hi, count = s.sigma_grid.axes[0]
    w = np.full(count, s.sigma_grid.step(0))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def slice_frequencies(s: Sinogram) -> np.ndarray:
    """Angular frequencies matching ``fourier_slice(s, d)``, ascending."""
    _require_hyperplane(s)
    count = s.sigma_grid.axes[0][2]
    return np.fft.fftshift(2.0 * np.pi * np.fft.fftfreq(count, s.sigma_grid.step(0)))


def fourier_slice(s: Sinogram, d: int, r=None) -> np.ndarray:
    """``int psi(sigma, tau_d) exp(i r sigma) d sigma`` by the trapezoid rule.

    Because the plane is ``<t, tau> = -sigma`` this equals the Fourier
    transform ``int phi(t) exp(-i <k, t>) dt`` at ``k = r tau_d``.  Without
    ``r`` the values are returned on ``slice_frequencies(s)`` via the FFT.
    """
    _require_hyperplane(s)
    lo = s.sigma_grid.axes[0][0]
    a = s.values[d] * _profile_weights(s)
    if r is None:
        freqs = slice_frequencies(s)
        spectrum = np.fft.fftshift(np.fft.ifft(a)) * a.shape[0]
        return np.exp(1j * freqs * lo) * spectrum
    r = np.atleast_1d(np.asarray(r, dtype=float))
    sigma = s.sigma_grid.points(0)
    return np.exp(1j * np.outer(r, sigma)) @ a


def direction_weights(taus: np.ndarray) -> np.ndarray:
    """Quadrature weights on S^{n-1} for unit directions, n in {2, 3}.

    The set is symmetrized under ``tau -> -tau``; each direction receives the
    Voronoi measure of itself and of its antipode (coincident points share).
    Weights sum to the sphere's area.
    """
    taus = np.asarray(taus, dtype=float)
    count, n = taus.shape
    pts = np.concatenate([taus, -taus])
    tree = cKDTree(pts)
    groups = {}
    rep = np.arange(2 * count)
    for a, b in sorted(tree.query_pairs(1e-9)):
        ra, rb = rep[a], rep[b]
        if ra != rb:
            lo, hi = min(ra, rb), max(ra, rb)
            rep[rep == hi] = lo
    for i, g in enumerate(rep):
        groups.setdefault(int(g), []).append(i)
    uniq = np.array(sorted(groups))
    if n == 2:
        ang = np.mod(np.arctan2(pts[uniq, 1], pts[uniq, 0]), 2 * np.pi)
        order = np.argsort(ang, kind="stable")
        a = ang[order]
        nxt = np.roll(a, -1)
        nxt[-1] += 2 * np.pi
        prv = np.roll(a, 1)
        prv[0] -= 2 * np.pi
        area = np.empty(len(uniq))
        area[order] = 0.5 * (nxt - prv)
    elif n == 3:
        sv = SphericalVoronoi(pts[uniq], radius=1.0, center=np.zeros(3))
        area = sv.calculate_areas()
    else:
        raise UnsupportedDimension(f"direction weights for n={n}")
    share = np.zeros(2 * count)
    for g, a in zip(uniq, area):
        members = groups[int(g)]
        share[members] = a / len(members)
    return share[:count] + share[count:]


def _window(r: np.ndarray, nyquist: float) -> np.ndarray:
    w = 0.5 * (1.0 + np.cos(np.pi * r / nyquist))
    w[np.abs(r) > nyquist] = 0.0
    return w


def filter_profiles(s: Sinogram, threads=None):
    """Apply the apodized ramp ``|r|^{n-1}`` to every sigma profile.

    Profiles are centred in a zero-padded buffer four times their length and
    returned on that extended sigma grid, since the filtered profiles have
    slowly decaying tails outside the measured range.  Returns
    ``(sigma_ext, filtered)``.
    """
    _require_hyperplane(s)
    n = s.dims.n
    lo, _, count = s.sigma_grid.axes[0]
    step = s.sigma_grid.step(0)
    size = 1 << int(np.ceil(np.log2(4 * count)))
    offset = (size - count) // 2
    r = 2.0 * np.pi * np.fft.fftfreq(size, step)
    if n == 2:
        # |r| from the sampled band-limited ramp kernel; sampling |r| directly
        # on the padded FFT grid leaves a DC bias in the reconstruction
        k = np.fft.fftfreq(size, 1.0 / size)
        kernel = np.zeros(size)
        kernel[0] = 0.25 / step ** 2
        odd = np.abs(k) % 2 == 1
        kernel[odd] = -1.0 / (np.pi * k[odd] * step) ** 2
        ramp = 2.0 * np.pi * step * np.fft.fft(kernel).real
    else:
        ramp = np.abs(r) ** (n - 1)
    gain = ramp * _window(r, np.pi / step)
    out = np.empty((len(s.frames), size))

    def run(d):
        padded = np.zeros(size)
        padded[offset:offset + count] = s.values[d]
        out[d] = np.fft.ifft(np.fft.fft(padded) * gain).real

    pmap(run, range(len(s.frames)), threads)
    sigma_ext = lo + step * (np.arange(size) - offset)
    return sigma_ext, out


def backproject(filtered: np.ndarray, sigma: np.ndarray, taus: np.ndarray,
                weights: np.ndarray, grid: ReconGrid, threads=None) -> np.ndarray:
    """``1/2 (2 pi)^{1-n} sum_d w_d q_d(-<x, tau_d>)`` on the grid.

    Tiles along the first grid axis are independent and each sums the
    frames in index order, so the output is the same for any thread count.
    """
    n = taus.shape[1]
    const = 0.5 * (2.0 * np.pi) ** (1 - n)
    pts = grid.mesh()
    out = np.zeros(grid.shape)

    def run(i):
        x = pts[i]
        acc = np.zeros(x.shape[:-1])
        for d in range(taus.shape[0]):
            proj = x[..., 0] * taus[d, 0]
            for a in range(1, n):
                proj = proj + x[..., a] * taus[d, a]
            acc = acc + weights[d] * np.interp(-proj, sigma, filtered[d], left=0.0, right=0.0)
        out[i] = const * acc

    pmap(run, range(grid.shape[0]), threads)
    return out


def fbp_reconstruct(s: Sinogram, grid: ReconGrid, threads=None) -> ReconGrid:
    _require_hyperplane(s)
    n = s.dims.n
    if n not in (2, 3):
        raise UnsupportedDimension(f"filtered backprojection supports n = 2, 3; got n={n}")
    if len(grid.axes) != n:
        raise ValueError("grid dimension does not match the sinogram")
    taus = s.directions()[:, 0, :]
    sigma_ext, filtered = filter_profiles(s, threads)
    weights = direction_weights(taus)
    values = backproject(filtered, sigma_ext, taus, weights, grid, threads)
    meta = {"window": WINDOW, "filter": f"|r|^{n - 1}", "frames": len(s.frames)}
    return ReconGrid(grid.axes, values, meta)


def inversion_frames(n: int, count: int):
    if n == 2:
        return equiangular_frames(count)
    if n == 3:
        return fibonacci_frames(count)
    raise UnsupportedDimension(f"no inversion frames for n={n}")


def relative_l2(recon: ReconGrid, phi: GaussianMixture) -> float:
    truth = eval_phantom(phi, recon.mesh())
    norm = float(np.linalg.norm(truth))
    if norm == 0.0:
        return 0.0
    return float(np.linalg.norm(recon.values - truth)) / norm


def roundtrip_error(phi: GaussianMixture, config: InversionConfig = None) -> float:
    """``||fbp(radon(phi)) - phi|| / ||phi||`` on the reconstruction grid."""
    config = InversionConfig() if config is None else config
    n = phi.dims.n
    if phi.dims.p != n - 1:
        raise NotHyperplane("round trip needs the hyperplane case")
    if not phi.terms:
        return 0.0
    frames = inversion_frames(n, config.frames)
    grid = SigmaGrid.uniform(1, config.sigma_radius, config.sigma_count)
    s = radon_sinogram(phi, frames, grid, config.quad, config.threads)
    recon = fbp_reconstruct(s, ReconGrid.cube(n, config.grid_radius, config.grid_count),
                            config.threads)
    return relative_l2(recon, phi)
