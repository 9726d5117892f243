"""Range tests in Stiefel coordinates: the John system and its symbol.

For ``p < n - 1`` functions in the range of the transform are annihilated by
the brackets

    d^2 psi / d xi[i, j] d xi[i', j']  -  d^2 psi / d xi[i, j'] d xi[i', j]

for all row pairs ``(i, i')`` and column pairs ``(j, j')``.  The principal
symbol of the family is the set of 2x2 minors, whose common zero set is the
rank <= 1 locus.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._parallel import pmap
from .errors import EvalFailure, IndexOutOfRange, RadonError
from .geometry import Dimensions, StiefelPoint

CHAR_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class StiefelFunction:
    """A function of the ``(n - p) x (n + 1)`` matrix ``xi``.

    With ``vectorized=True`` the callable receives a stack ``(m, n - p, n + 1)``
    and returns ``m`` values.
    """

    func: Callable
    dims: Dimensions
    degree: Optional[int] = None
    vectorized: bool = False

    def __call__(self, xi):
        return self.func(xi)

    def evaluate_many(self, stack: np.ndarray) -> np.ndarray:
        try:
            if self.vectorized:
                out = np.asarray(self.func(stack))
            else:
                out = np.array([self.func(x) for x in stack])
        except (RadonError, np.linalg.LinAlgError, ValueError, ZeroDivisionError) as exc:
            raise EvalFailure(f"psi could not be evaluated on the stencil: {exc}") from exc
        if not np.all(np.isfinite(out)):
            raise EvalFailure("psi returned non-finite values on the stencil")
        return out


@dataclass(frozen=True, eq=False)
class JohnResidual:
    """Bracket values ``r[i, i', j, j']`` at one Stiefel point (0-based indices)."""

    r: np.ndarray
    h: float
    step: float
    vacuous: bool = False

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.r))) if self.r.size else 0.0

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.abs(self.r) ** 2))) if self.r.size else 0.0

    @property
    def frobenius(self) -> float:
        """Euclidean norm over every index combination (both orderings)."""
        return float(np.sqrt(np.sum(np.abs(self.r) ** 2)))

    def bracket_norm(self, i: int, i2: int, j: int, j2: int) -> float:
        """Norm of one bracket over its four index orderings.

        By antisymmetry this is ``2 |r[i, i', j, j']|`` when ``i != i'``.
        """
        idx = {(i, i2, j, j2), (i, i2, j2, j), (i2, i, j2, j), (i2, i, j, j2)}
        return float(np.sqrt(sum(abs(self.r[t]) ** 2 for t in idx)))

    def rows(self):
        k, _, m, _ = self.r.shape
        for i in range(k):
            for i2 in range(k):
                for j in range(m):
                    for j2 in range(m):
                        yield i, i2, j, j2, self.r[i, i2, j, j2]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "i_prime", "j", "j_prime", "residual"])
            for i, i2, j, j2, v in self.rows():
                w.writerow([i, i2, j, j2, repr(float(np.real(v)))])


@dataclass(frozen=True, eq=False)
class ResidualReport:
    residuals: tuple
    values: np.ndarray
    h: float
    vacuous: bool = False
    order: int = 2

    @property
    def sup(self) -> float:
        return max((r.sup_norm for r in self.residuals), default=0.0)

    @property
    def rms(self) -> float:
        if not self.residuals:
            return 0.0
        return float(np.sqrt(np.mean([r.rms ** 2 for r in self.residuals])))

    @property
    def scale(self) -> float:
        """Largest |psi| over the sample points."""
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0

    def table(self) -> list:
        return [
            {"sample": s, "psi": float(np.real(v)), "sup": r.sup_norm, "rms": r.rms,
             "frobenius": r.frobenius}
            for s, (v, r) in enumerate(zip(self.values, self.residuals))
        ]

    def to_dict(self) -> dict:
        return {"h": self.h, "order": self.order, "samples": len(self.residuals), "sup": self.sup,
                "rms": self.rms, "scale": self.scale, "vacuous": self.vacuous,
                "table": self.table()}

    def to_json(self, path, **extra) -> None:
        data = self.to_dict()
        data.update(extra)
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample", "i", "i_prime", "j", "j_prime", "residual"])
            for s, res in enumerate(self.residuals):
                for i, i2, j, j2, v in res.rows():
                    w.writerow([s, i, i2, j, j2, repr(float(np.real(v)))])


def _xi_scale(xi: np.ndarray) -> float:
    k = xi.shape[0]
    return max(1.0, float(np.linalg.norm(xi)) / np.sqrt(k))


def _stencil(xi: np.ndarray, step: float):
    """Points for the central mixed second differences of every entry pair.

    For ``a <= b`` (flattened entry indices) the four points are
    ``xi + s_a step e_a + s_b step e_b`` with signs ``(+,+), (+,-), (-,+), (-,-)``.
    """
    m = xi.size
    pairs = [(a, b) for a in range(m) for b in range(a, m)]
    flat = xi.ravel()
    pts = np.repeat(flat[None, :], 4 * len(pairs), axis=0)
    signs = ((1, 1), (1, -1), (-1, 1), (-1, -1))
    row = 0
    for a, b in pairs:
        for sa, sb in signs:
            pts[row, a] = pts[row, a] + sa * step
            pts[row, b] = pts[row, b] + sb * step
            row += 1
    return pairs, pts.reshape((-1,) + xi.shape)


def _second_differences(psi: StiefelFunction, xi: np.ndarray, step: float):
    pairs, pts = _stencil(xi, step)
    vals = psi.evaluate_many(pts).reshape(len(pairs), 4)
    return pairs, ((vals[:, 0] - vals[:, 1]) - vals[:, 2] + vals[:, 3]) / (4.0 * step * step)


def john_residual(psi: StiefelFunction, xi, h: float, order: int = 2) -> JohnResidual:
    """Central-difference John brackets at ``xi``.

    The step is ``h`` times ``max(1, ||xi||_F / sqrt(n - p))``.  Mixed
    differences are formed once per unordered entry pair, which makes the
    discrete brackets exactly antisymmetric in ``(j, j')`` and in ``(i, i')``.
    ``order=4`` combines steps ``h`` and ``h/2`` by Richardson extrapolation,
    ``order=6`` adds a third level at ``h/4``.
    When ``n - p = 1`` the system is empty and a zero residual is returned.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    if order not in (2, 4, 6):
        raise ValueError("order must be 2, 4 or 6")
    xi = xi.xi if isinstance(xi, StiefelPoint) else np.asarray(xi)
    xi = np.atleast_2d(xi)
    k, m = xi.shape
    if k == 1:
        return JohnResidual(np.zeros((1, 1, m, m)), h, h, vacuous=True)
    step = h * _xi_scale(xi)
    pairs, d2 = _second_differences(psi, xi, step)
    if order >= 4:
        _, half = _second_differences(psi, xi, 0.5 * step)
        coarse = (4.0 * half - d2) / 3.0
        d2 = coarse
        if order == 6:
            _, quarter = _second_differences(psi, xi, 0.25 * step)
            fine = (4.0 * quarter - half) / 3.0
            d2 = (16.0 * fine - coarse) / 15.0
    size = xi.size
    hess = np.zeros((size, size), dtype=d2.dtype)
    for (a, b), v in zip(pairs, d2):
        hess[a, b] = v
        hess[b, a] = v
    hess = hess.reshape(k, m, k, m)
    # r[i, i', j, j'] = H[(i, j), (i', j')] - H[(i, j'), (i', j)]
    first = np.transpose(hess, (0, 2, 1, 3))
    second = np.transpose(hess, (0, 2, 3, 1))
    return JohnResidual(first - second, h, step)


def john_residual_field(psi: StiefelFunction, xi_samples, h: float,
                        order: int = 2, threads=None) -> ResidualReport:
    samples = list(xi_samples)
    if not samples:
        raise ValueError("need at least one sample")
    mats = [s.xi if isinstance(s, StiefelPoint) else np.atleast_2d(np.asarray(s)) for s in samples]
    residuals = pmap(lambda x: john_residual(psi, x, h, order), mats, threads)
    values = psi.evaluate_many(np.stack(mats))
    vacuous = all(r.vacuous for r in residuals)
    return ResidualReport(tuple(residuals), values, h, vacuous, order)


def symbol_minor(beta, i: int, i2: int, j: int, j2: int):
    """``beta[i, j] beta[i', j'] - beta[i, j'] beta[i', j]`` (0-based)."""
    beta = np.asarray(beta)
    k, m = beta.shape
    for idx, bound in ((i, k), (i2, k), (j, m), (j2, m)):
        if not 0 <= idx < bound:
            raise IndexOutOfRange(f"index {idx} outside [0, {bound})")
    return beta[i, j] * beta[i2, j2] - beta[i, j2] * beta[i2, j]


def all_minors(beta) -> np.ndarray:
    """Tensor of every 2x2 minor, indexed ``[i, i', j, j']``."""
    beta = np.asarray(beta)
    return (np.einsum("ij,kl->ikjl", beta, beta)
            - np.einsum("il,kj->ikjl", beta, beta))


@dataclass(frozen=True)
class CharacteristicResult:
    in_W: bool
    max_minor: float


def characteristic_test(beta, tol: float = CHAR_TOL) -> CharacteristicResult:
    """Is ``beta`` in the rank <= 1 locus (all 2x2 minors vanish)?"""
    beta = np.atleast_2d(np.asarray(beta))
    norm2 = float(np.sum(np.abs(beta) ** 2))
    if beta.shape[0] < 2 or beta.shape[1] < 2:
        return CharacteristicResult(True, 0.0)
    max_minor = float(np.max(np.abs(all_minors(beta))))
    return CharacteristicResult(bool(max_minor <= tol * norm2), max_minor)


def phantom_stiefel_function(phi, quad=None) -> StiefelFunction:
    """Transform of a Gaussian mixture as a function of the Stiefel matrix.

    Uses the closed form by default; pass a ``QuadratureSpec`` to go through
    numerical plane integration instead.
    """
    from .phantoms import analytic_radon_batch
    from .transform import plane_integrals

    if quad is None:
        def func(stack):
            stack = np.asarray(stack, dtype=float)
            return analytic_radon_batch(phi, stack[..., 0], stack[..., 1:])
    else:
        def func(stack):
            stack = np.asarray(stack, dtype=float)
            return np.array([plane_integrals(phi, x[:, 1:], x[None, :, 0], quad)[0]
                             for x in stack])
    return StiefelFunction(func, phi.dims, degree=-1, vectorized=True)
