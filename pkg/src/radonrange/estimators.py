"""scikit-learn style wrappers around the functional API.

Only the parts that map naturally onto ``fit`` / ``transform`` / ``predict``
are wrapped; everything else is used through the module functions.
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .geometry import Dimensions, sample_frames
from .inversion import ReconGrid, fbp_reconstruct, inversion_frames
from .moments import PASS_THRESHOLD, cavalieri_fit, moment_table, sinogram_decay_report
from .phantoms import GaussianMixture
from .rangecheck import StiefelFunction, john_residual, phantom_stiefel_function
from .transform import QuadratureSpec, SigmaGrid, Sinogram, radon_sinogram


def _require_sinogram(X) -> Sinogram:
    if not isinstance(X, Sinogram):
        raise TypeError(f"expected a Sinogram, got {type(X).__name__}")
    return X


class RadonTransformer(TransformerMixin, BaseEstimator):
    """Maps phantoms to flattened sinograms on a fixed frame set.

    ``frame_kind="random"`` draws seeded Haar frames; ``"uniform"`` uses the
    deterministic inversion frames (hyperplanes with n = 2 or 3 only).
    """

    def __init__(self, n=2, p=1, n_frames=64, sigma_radius=6.0, sigma_count=128,
                 frame_kind="random", seed=0, quad_nodes=64, threads=None):
        self.n = n
        self.p = p
        self.n_frames = n_frames
        self.sigma_radius = sigma_radius
        self.sigma_count = sigma_count
        self.frame_kind = frame_kind
        self.seed = seed
        self.quad_nodes = quad_nodes
        self.threads = threads

    def fit(self, X=None, y=None):
        dims = Dimensions(self.n, self.p)
        if self.frame_kind == "random":
            self.frames_ = sample_frames(dims, self.n_frames, self.seed)
        elif self.frame_kind == "uniform":
            if dims.p != dims.n - 1:
                raise ValueError("uniform frames need p = n - 1")
            self.frames_ = inversion_frames(dims.n, self.n_frames)
        else:
            raise ValueError(f"unknown frame_kind {self.frame_kind!r}")
        self.dims_ = dims
        self.sigma_grid_ = SigmaGrid.uniform(dims.codim, self.sigma_radius, self.sigma_count)
        self.quad_ = QuadratureSpec(nodes_per_axis=self.quad_nodes)
        return self

    def sinograms(self, X) -> list:
        check_is_fitted(self, "frames_")
        phantoms = [X] if isinstance(X, GaussianMixture) else list(X)
        for phi in phantoms:
            if not isinstance(phi, GaussianMixture):
                raise TypeError("transform expects GaussianMixture phantoms")
            if phi.dims != self.dims_:
                raise ValueError(f"phantom dims {phi.dims} differ from fitted {self.dims_}")
        return [radon_sinogram(phi, self.frames_, self.sigma_grid_, self.quad_, self.threads)
                for phi in phantoms]

    def transform(self, X):
        """One row per phantom: sinogram values flattened frame-major."""
        return np.stack([s.values.ravel() for s in self.sinograms(X)])


class FilteredBackprojection(BaseEstimator):
    """Reconstructs on a cube grid at ``fit`` and interpolates at ``predict``."""

    def __init__(self, grid_radius=6.0, grid_count=128, threads=None):
        self.grid_radius = grid_radius
        self.grid_count = grid_count
        self.threads = threads

    def fit(self, X, y=None):
        s = _require_sinogram(X)
        grid = ReconGrid.cube(s.dims.n, self.grid_radius, self.grid_count)
        self.recon_ = fbp_reconstruct(s, grid, self.threads)
        axes = [self.recon_.points(a) for a in range(s.dims.n)]
        self._interp = RegularGridInterpolator(axes, self.recon_.values,
                                               bounds_error=False, fill_value=0.0)
        self.n_features_in_ = s.dims.n
        return self

    def predict(self, X):
        check_is_fitted(self, "recon_")
        X = check_array(X, ensure_min_features=self.n_features_in_)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} coordinates, got {X.shape[1]}")
        return self._interp(X)


class CavalieriChecker(BaseEstimator):
    """Fits the moment polynomials of a hyperplane sinogram.

    ``predict`` evaluates the fitted polynomials at new directions; ``score``
    is 1.0 when every degree passes and 0.0 otherwise.
    """

    def __init__(self, m_max=4, threshold=PASS_THRESHOLD):
        self.m_max = m_max
        self.threshold = threshold

    def fit(self, X, y=None):
        s = _require_sinogram(X)
        self.table_ = moment_table(s, self.m_max)
        self.fits_ = tuple(cavalieri_fit(self.table_, m) for m in range(self.m_max + 1))
        self.residuals_ = np.array([f.residual for f in self.fits_])
        self.decay_ = sinogram_decay_report(s)
        self.n_features_in_ = s.dims.n
        return self

    def predict(self, X):
        check_is_fitted(self, "fits_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_}-dimensional directions")
        return np.stack([f(X) for f in self.fits_], axis=1)

    def score(self, X=None, y=None):
        check_is_fitted(self, "fits_")
        ok = bool(np.all(self.residuals_ <= self.threshold)) and not self.decay_.flagged
        return float(ok)


class JohnVerifier(BaseEstimator):
    """Per-sample John residual (rms over brackets) of a fitted Stiefel function."""

    def __init__(self, h=0.05, order=6):
        self.h = h
        self.order = order

    def fit(self, X, y=None):
        if isinstance(X, GaussianMixture):
            X = phantom_stiefel_function(X)
        if not isinstance(X, StiefelFunction):
            raise TypeError("fit expects a GaussianMixture or StiefelFunction")
        self.psi_ = X
        self.shape_ = (X.dims.codim, X.dims.n + 1)
        return self

    def predict(self, X):
        """``X`` is ``(m, n - p, n + 1)`` or flattened to ``(m, (n - p)(n + 1))``."""
        check_is_fitted(self, "psi_")
        X = check_array(X, allow_nd=True)
        X = X.reshape((X.shape[0],) + self.shape_)
        return np.array([john_residual(self.psi_, x, self.h, self.order).rms for x in X])
