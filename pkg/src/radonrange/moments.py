"""Moment (Cavalieri) test for hyperplane sinograms.

For ``p = n - 1`` the m-th sigma-moment of a transform,
``M_m(tau) = int psi(sigma, tau) sigma^m d sigma``, is the restriction to the
unit sphere of a homogeneous polynomial of degree m in tau.  The checker fits
that polynomial by least squares on the sinogram's own directions and reports
the relative misfit.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from .errors import InsufficientDecay, NotHyperplane, UnderdeterminedFit
from .transform import Sinogram, sinogram_decay_report

PASS_THRESHOLD = 1e-4
TAIL_TOL = 1e-8
ZERO_SCALE = 1e-8


@dataclass(frozen=True, eq=False)
class MomentTable:
    m_max: int
    directions: np.ndarray   # (D, n), unit rows
    M: np.ndarray            # (m_max + 1, D)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            n = self.directions.shape[1]
            w.writerow(["m", "direction"] + [f"tau_{a + 1}" for a in range(n)] + ["moment"])
            for m in range(self.m_max + 1):
                for d, tau in enumerate(self.directions):
                    w.writerow([m, d] + [repr(float(x)) for x in tau] + [repr(float(self.M[m, d]))])


@dataclass(frozen=True, eq=False)
class MomentFit:
    m: int
    exponents: tuple
    coeffs: np.ndarray
    residual: float

    def __call__(self, tau) -> np.ndarray:
        """Fitted polynomial at arbitrary (not necessarily unit) directions."""
        return monomials(np.atleast_2d(np.asarray(tau, dtype=float)), self.exponents) @ self.coeffs


@dataclass(frozen=True, eq=False)
class CavalieriReport:
    fits: tuple
    threshold: float
    decay_ratio: float
    decay_flag: bool

    @property
    def passes(self) -> list:
        return [f.residual <= self.threshold for f in self.fits]

    @property
    def overall(self) -> bool:
        return all(self.passes) and not self.decay_flag

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "decay_ratio": self.decay_ratio,
            "non_rapid_decrease": self.decay_flag,
            "overall_pass": self.overall,
            "moments": [
                {"m": f.m, "residual": f.residual, "pass": ok,
                 "exponents": [list(e) for e in f.exponents],
                 "coefficients": [float(c) for c in f.coeffs]}
                for f, ok in zip(self.fits, self.passes)
            ],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def homogeneous_exponents(n: int, m: int) -> tuple:
    """Exponent vectors of the degree-m monomials in n variables (fixed order)."""
    out = []
    for combo in combinations_with_replacement(range(n), m):
        e = [0] * n
        for a in combo:
            e[a] += 1
        out.append(tuple(e))
    return tuple(out)


def monomials(tau: np.ndarray, exponents) -> np.ndarray:
    cols = [np.prod(tau ** np.asarray(e), axis=1) for e in exponents]
    return np.stack(cols, axis=1) if cols else np.zeros((tau.shape[0], 0))


def trapezoid_weights(lo: float, hi: float, count: int) -> np.ndarray:
    if count == 1:
        return np.zeros(1)
    w = np.full(count, (hi - lo) / (count - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def moment_table(s: Sinogram, m_max: int, tail_tol: float = TAIL_TOL) -> MomentTable:
    """Trapezoidal sigma-moments ``0..m_max`` for every frame direction.

    Raises ``InsufficientDecay`` when the sinogram is not rapidly decreasing
    or when ``max|sigma|^m_max * tail > tail_tol * max|M_0|``.
    """
    dims = s.dims
    if dims.p != dims.n - 1:
        raise NotHyperplane(f"moments need p = n - 1, got n={dims.n}, p={dims.p}")
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    decay = sinogram_decay_report(s)
    if decay.flagged:
        raise InsufficientDecay(f"sinogram is not rapidly decreasing (edge ratio {decay.ratio:.3g})")
    directions = s.directions()[:, 0, :]
    if np.any(np.abs(np.linalg.norm(directions, axis=1) - 1.0) > 1e-12):
        raise ValueError("moment_table needs unit frame directions")
    lo, hi, count = s.sigma_grid.axes[0]
    sigma = s.sigma_grid.points(0)
    w = trapezoid_weights(lo, hi, count)
    M = np.empty((m_max + 1, len(directions)))
    power = np.ones_like(sigma)
    for m in range(m_max + 1):
        M[m] = s.values @ (w * power)
        power = power * sigma
    tail = float(np.max(np.abs(s.values[:, [0, -1]])))
    reach = max(abs(lo), abs(hi)) ** m_max
    if reach * tail > tail_tol * float(np.max(np.abs(M[0]))):
        raise InsufficientDecay(
            f"sigma grid too short for m_max={m_max}: |sigma|^m * tail = {reach * tail:.3g}")
    return MomentTable(m_max, directions, M)


def cavalieri_fit(table: MomentTable, m: int) -> MomentFit:
    """Least-squares fit of ``M_m`` by homogeneous degree-m monomials.

    Residual is ``||fit - data|| / max(||data||, 1e-8 ||M_0||)``.
    """
    if not 0 <= m <= table.m_max:
        raise ValueError(f"m must lie in [0, {table.m_max}]")
    n = table.directions.shape[1]
    exps = homogeneous_exponents(n, m)
    need = 2 * comb(n + m - 1, m)
    if len(table.directions) < need:
        raise UnderdeterminedFit(
            f"degree {m} in {n} variables needs >= {need} directions, have {len(table.directions)}")
    A = monomials(table.directions, exps)
    y = table.M[m]
    coeffs, *_ = np.linalg.lstsq(A, y, rcond=None)
    misfit = float(np.linalg.norm(A @ coeffs - y))
    scale = max(float(np.linalg.norm(y)), ZERO_SCALE * float(np.linalg.norm(table.M[0])))
    residual = 0.0 if misfit == 0.0 else misfit / scale if scale > 0 else np.inf
    return MomentFit(m, exps, coeffs, residual)


def cavalieri_report(s: Sinogram, m_max: int, threshold: float = PASS_THRESHOLD) -> CavalieriReport:
    decay = sinogram_decay_report(s)
    table = moment_table(s, m_max)
    fits = tuple(cavalieri_fit(table, m) for m in range(m_max + 1))
    return CavalieriReport(fits, threshold, decay.ratio, decay.flagged)
