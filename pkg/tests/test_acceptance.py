"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line; run with ``pytest -s`` to see them.
"""
import time
from math import pi

import numpy as np
import pytest

from radonrange.cli import main as cli_main
from radonrange.geometry import (Dimensions, PlaneChart, equiangular_frames, fibonacci_frames,
                                 gl_act, sample_frames, sample_stiefel_points)
from radonrange.inversion import InversionConfig, fourier_slice, roundtrip_error
from radonrange.moments import cavalieri_report
from radonrange.phantoms import analytic_radon, fourier_transform, random_mixture
from radonrange.projective import (HomogeneousField, extend_homogeneous, kernel_john_check,
                                   kernel_scale, projective_john_residual, projective_radon,
                                   random_complex_frame)
from radonrange.rangecheck import (StiefelFunction, characteristic_test, john_residual,
                                   john_residual_field, phantom_stiefel_function)
from radonrange.transform import QuadratureSpec, SigmaGrid, Sinogram, radon_point, radon_sinogram

from conftest import random_mu, random_plane
from oracles import graph_plane_integral


def verdict(number, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    assert ok, detail


def random_case(rng, n_choices=(2, 3, 4)):
    n = int(rng.choice(n_choices))
    p = int(rng.integers(1, n))
    return n, p


def test_criterion_01_forward_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for case in range(100):
        n, p = random_case(rng)
        phi = random_mixture(Dimensions(n, p), 3, 1000 + case)
        x = random_plane(rng, n, p)
        ref = analytic_radon(phi, x)
        worst = max(worst, abs(radon_point(phi, x) - ref) / abs(ref))
    dense = 0.0
    counts = {1: 2001, 2: 401, 3: 101}
    for case in range(10):
        n, p = random_case(rng)
        phi = random_mixture(Dimensions(n, p), 3, 2000 + case)
        x = random_plane(rng, n, p)
        ref = analytic_radon(phi, x)
        got = graph_plane_integral(phi, x.sigma, x.tau, 12.0, counts[p])
        dense = max(dense, abs(got - ref) / abs(ref))
    elapsed = time.perf_counter() - start
    verdict(1, worst <= 1e-6 and dense <= 1e-4 and elapsed <= 60,
            f"quadrature vs closed form {worst:.2e} (<= 1e-6), closed form vs dense "
            f"{dense:.2e} (<= 1e-4), {elapsed:.1f}s")


def test_criterion_02_homogeneity():
    rng = np.random.default_rng(202)
    quad = QuadratureSpec(nodes_per_axis=16)
    worst_a = worst_q = 0.0
    for case in range(1000):
        n, p = random_case(rng)
        phi = random_mixture(Dimensions(n, p), 2, 3000 + case)
        x = random_plane(rng, n, p)
        mu = random_mu(rng, n - p)
        y = gl_act(x, mu)
        det = abs(np.linalg.det(mu))
        a, b = analytic_radon(phi, y), analytic_radon(phi, x)
        worst_a = max(worst_a, abs(det * a - b) / abs(b))
        a, b = radon_point(phi, y, quad), radon_point(phi, x, quad)
        worst_q = max(worst_q, abs(det * a - b) / abs(b))
    verdict(2, worst_a <= 1e-12 and worst_q <= 1e-12,
            f"analytic {worst_a:.2e}, quadrature {worst_q:.2e} (<= 1e-12)")


def test_criterion_03_john_necessity():
    start = time.perf_counter()
    dims = Dimensions(4, 1)
    psi = phantom_stiefel_function(random_mixture(dims, 3, 303))
    rep = john_residual_field(psi, sample_stiefel_points(dims, 100, 303), 0.05, order=6)
    # non-range control: error of the h and h/2 second-order brackets
    control = StiefelFunction(lambda x: np.sin(x[0, 0] * x[1, 1] + x[0, 2]), dims)
    xi = sample_stiefel_points(dims, 1, 304)[0].xi
    true = john_residual(control, xi, 1e-3, order=6).r
    e1, e2 = [np.abs(john_residual(control, xi, h).r - true).max() for h in (0.1, 0.05)]
    ratio = e1 / e2
    elapsed = time.perf_counter() - start
    verdict(3, rep.rms <= 1e-3 * rep.scale and 3.2 <= ratio <= 4.8 and elapsed <= 300,
            f"rms {rep.rms:.2e} vs 1e-3*scale {1e-3 * rep.scale:.2e}, control ratio "
            f"{ratio:.3f}, {elapsed:.1f}s")


def test_criterion_04_john_discrimination():
    dims = Dimensions(4, 1)
    base = phantom_stiefel_function(random_mixture(dims, 3, 404))
    bumped = StiefelFunction(lambda x: base(x) + 0.1 * x[0, 0] * x[1, 1], dims)
    xi = sample_stiefel_points(dims, 1, 404)[0].xi
    clean = john_residual(base, xi, 0.05, order=6).bracket_norm(0, 1, 0, 1)
    value = john_residual(bumped, xi, 0.05, order=6).bracket_norm(0, 1, 0, 1)
    verdict(4, value >= 0.19, f"perturbed bracket {value:.6f} (>= 0.19), unperturbed {clean:.2e}")


def test_criterion_05_cavalieri():
    wide = SigmaGrid.uniform(1, 14.0, 512)
    worst = 0.0
    sinos = {}
    for n, frames in ((2, equiangular_frames(64)), (3, fibonacci_frames(128))):
        phi = random_mixture(Dimensions(n, n - 1), 3, 500 + n)
        quad = QuadratureSpec(nodes_per_axis=64 if n == 2 else 24)
        s = radon_sinogram(phi, frames, wide, quad)
        sinos[n] = s
        rep = cavalieri_report(s, 6)
        worst = max(worst, max(f.residual for f in rep.fits))
    s = sinos[2]
    tau = s.directions()[:, 0]
    bad = Sinogram(s.dims, s.frames, s.sigma_grid, s.values * (1 + 0.1 * tau[:, :1] ** 4))
    control = max(f.residual for f in cavalieri_report(bad, 6).fits)
    verdict(5, worst <= 1e-5 and control >= 1e-3,
            f"max fit residual {worst:.2e} (<= 1e-5), quartic control {control:.2e} (>= 1e-3)")


def test_criterion_06_injectivity():
    start = time.perf_counter()
    phi = random_mixture(Dimensions(2, 1), 3, 606)
    coarse = roundtrip_error(phi, InversionConfig(frames=256, sigma_count=256, grid_count=128))
    fine = roundtrip_error(phi, InversionConfig(frames=512, sigma_count=512, grid_count=256))
    elapsed = time.perf_counter() - start
    verdict(6, coarse <= 0.02 and fine <= 1.1 * coarse and elapsed <= 120,
            f"relative L2 {coarse:.4%} (<= 2%), refined {fine:.4%}, {elapsed:.1f}s")


def test_criterion_07_fourier_slice():
    dims = Dimensions(2, 1)
    phi = random_mixture(dims, 3, 707)
    frames = sample_frames(dims, 20, 707)
    s = radon_sinogram(phi, frames, SigmaGrid.uniform(1, 10.0, 512))
    nyq = pi / s.sigma_grid.step(0)
    rng = np.random.default_rng(707)
    scale = abs(fourier_transform(phi, np.zeros(2))[0])
    worst = 0.0
    for d in range(20):
        r = rng.uniform(-nyq / 2, nyq / 2)
        k = r * frames[d].tau[0]
        err = abs(fourier_slice(s, d, [r])[0] - fourier_transform(phi, k[None])[0])
        worst = max(worst, err / scale)
    verdict(7, worst <= 1e-4, f"max error {worst:.2e} * |phi_hat(0)| (<= 1e-4)")


def _svd_rank_le_one(beta):
    s = np.linalg.svd(beta, compute_uv=False)
    return s.size < 2 or s[1] <= 1e-8 * s[0]


def test_criterion_08_characteristic_variety():
    rng = np.random.default_rng(808)
    wrong = {1: 0, 2: 0}
    for rank in (1, 2):
        for _ in range(10_000):
            n = int(rng.integers(rank, 7))
            k = int(rng.integers(rank, n + 1))
            beta = sum(np.outer(rng.standard_normal(k), rng.standard_normal(n + 1))
                       for _ in range(rank))
            if characteristic_test(beta).in_W != _svd_rank_le_one(beta):
                wrong[rank] += 1
    verdict(8, wrong[1] == 0 and wrong[2] == 0,
            f"misclassified rank 1: {wrong[1]}, rank 2: {wrong[2]} of 10000 each")


def test_criterion_09_complex_kernel():
    rng = np.random.default_rng(909)
    worst = fd = 0.0
    for case in range(1000):
        n = int(rng.integers(1, 6))
        fr = random_complex_frame(n, int(rng.integers(0, n)), rng)
        worst = max(worst, kernel_john_check(fr, "analytic") / kernel_scale(fr))
        if case % 20 == 0:
            fd = max(fd, kernel_john_check(fr, "finite_difference") / kernel_scale(fr))
    vac = random_complex_frame(3, 2, rng)
    vacuous = kernel_john_check(vac), kernel_john_check(vac, "finite_difference")
    verdict(9, worst <= 1e-12 and fd <= 1e-6 and vacuous == (0.0, 0.0),
            f"analytic {worst:.2e} (<= 1e-12), finite difference {fd:.2e} (<= 1e-6), "
            f"vacuous {vacuous}")


def test_criterion_10_projective():
    one = HomogeneousField(lambda x: np.ones(x.shape[:-1]), 2, 1)
    err_const = abs(projective_radon(one, [[0.0, 0.0, 1.0]]) - pi)
    a = np.array([1.0, 0.5, -0.3, 0.2])
    a /= np.linalg.norm(a)
    f = HomogeneousField(lambda x: 1.0 / (1.0 + (x @ a) ** 2), 3, 1)
    rng = np.random.default_rng(1010)
    pts = [rng.standard_normal((2, 4)) for _ in range(4)]
    rms = [projective_john_residual(f, pts, h).rms for h in (0.1, 0.05, 0.025)]
    ratios = [x / y for x, y in zip(rms, rms[1:])]
    psi = lambda r: projective_radon(f, r, 32)
    agree = 0.0
    for _ in range(50):
        tau = rng.standard_normal((2, 4))
        c = extend_homogeneous(psi, tau, "cholesky")
        agree = max(agree, abs(c - extend_homogeneous(psi, tau, "polar")) / abs(c))
    ok = err_const <= 1e-10 and all(3.2 <= q <= 4.8 for q in ratios) and agree <= 1e-10
    verdict(10, ok, f"constant field error {err_const:.1e}, residual ratios "
                    f"{', '.join(f'{q:.3f}' for q in ratios)}, factorizations {agree:.1e}")


CLI_RUNS = [
    ("phantom", ["phantom", "--n", "2", "--terms", "3", "--seed", "5", "--out", "{d}/g2.json"],
     "g2.json"),
    ("phantom4", ["phantom", "--n", "4", "--p", "1", "--seed", "6", "--out", "{d}/g4.json"],
     "g4.json"),
    ("forward", ["forward", "--phantom", "{d}/g2.json", "--frames", "64", "--frame-kind",
                 "uniform", "--sigma=-14:14:256", "--quad-nodes", "48", "--out", "{d}/s.rdsg",
                 "--csv", "{d}/s.csv"], "s.rdsg"),
    ("john", ["john", "--phantom", "{d}/g4.json", "--samples", "12", "--seed", "2",
              "--out", "{d}/j.json", "--csv", "{d}/j.csv"], "j.json"),
    ("cavalieri", ["cavalieri", "--sinogram", "{d}/s.rdsg", "--m-max", "4",
                   "--out", "{d}/c.json", "--csv", "{d}/c.csv"], "c.json"),
    ("invert", ["invert", "--sinogram", "{d}/s.rdsg", "--grid=-6:6:48", "--phantom",
                "{d}/g2.json", "--out", "{d}/r.rdgr", "--csv", "{d}/r.csv",
                "--report", "{d}/r.json"], "r.rdgr"),
    ("projective", ["projective", "--n", "3", "--samples", "4", "--seed", "3",
                    "--out", "{d}/p.json", "--csv", "{d}/p.csv"], "p.json"),
    ("kernel-check", ["kernel-check", "--n", "4", "--samples", "100", "--fd-samples", "5",
                      "--seed", "4", "--out", "{d}/k.json"], "k.json"),
    ("symbol-check", ["symbol-check", "--samples", "300", "--seed", "5",
                      "--out", "{d}/y.json"], "y.json"),
    ("report", ["report", "--sinogram", "{d}/s.rdsg", "--grid", "{d}/r.rdgr",
                "--json", "{d}/j.json", "--out", "{d}/rep.json"], "rep.json"),
]


def _artifacts(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_criterion_11_cli_determinism(tmp_path):
    outputs = {}
    codes = {}
    for threads in (1, 4, 16):
        for rep in range(2):
            d = tmp_path / f"t{threads}_{rep}"
            d.mkdir()
            for name, argv, _ in CLI_RUNS:
                code = cli_main([a.format(d=d) for a in argv]
                                + ["--threads", str(threads), "--quiet"])
                codes.setdefault(name, set()).add(code)
            outputs[(threads, rep)] = _artifacts(d)
    ref = outputs[(1, 0)]
    differing = sorted({name for art in outputs.values() for name in ref if art.get(name) != ref[name]})
    missing = [f for _, _, f in CLI_RUNS if f not in ref]
    bad_codes = {k: v for k, v in codes.items() if v != {0}}
    verdict(11, not differing and not missing and not bad_codes,
            f"{len(ref)} artifacts over {len(CLI_RUNS)} runs identical at threads 1, 4, 16 "
            f"(differing {differing}, missing {missing}, exit codes {bad_codes})")
