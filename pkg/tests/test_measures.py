import math

import numpy as np
import pytest
from scipy import integrate

from hardrods.measures import (Atom, Component, DomainError, Exponential, Gaussian, QuadratureError, Uniform,
                               VelocityLengthMeasure, diffusivity, gram_matrix, macro_params, mean_functional,
                               moment, parse_dist, project_P, theoretical_covariance, transported_covariance,
                               v_eff, v_eff_integral)
from hardrods.testfunctions import cosine_packet, gaussian_bump, poly_bump


def prod(v, r):
    return VelocityLengthMeasure.product(v, r)


def test_moment_atoms():
    assert moment(prod(0.0, 1.0), lambda v, r: r) == 1.0


def test_moment_gaussian_odd_vanishes():
    assert abs(moment(prod({"gaussian": [0, 1]}, 1.0), lambda v, r: v)) < 1e-14


def test_moment_uniform_against_monte_carlo():
    mu = prod({"uniform": [-1, 1]}, 2.0)
    q = moment(mu, lambda v, r: r * v**2)
    assert q == pytest.approx(2.0 / 3.0, abs=1e-14)
    rng = np.random.default_rng(11)
    v, r = mu.sample(rng, 10**7)
    f = r * v**2
    assert abs(f.mean() - q) < 3 * f.std() / math.sqrt(f.size)


def test_moment_rejects_nonintegrable():
    with pytest.raises(QuadratureError):
        moment(prod({"exponential": 1.0}, 1.0), lambda v, r: np.exp(v * v))


def test_macro_params_examples():
    p = macro_params(1.0, prod({"gaussian": [0, 1]}, 1.0))
    assert (p.sigma, p.rho_bar) == pytest.approx((1.0, 0.5))
    assert abs(p.pi) < 1e-14
    p = macro_params(2.0, prod(1.0, 0.5))
    assert (p.sigma, p.pi, p.rho_bar) == (1.0, 1.0, 1.0)
    p = macro_params(1.0, prod({"uniform": [-1, 1]}, 0.0))
    assert (p.sigma, p.pi, p.rho_bar) == (0.0, 0.0, 1.0)


def test_macro_params_rejects_bad_rho(bench_mu):
    with pytest.raises(ValueError):
        macro_params(0.0, bench_mu)


def test_v_eff_examples(bench):
    free = macro_params(1.0, prod({"uniform": [-1, 1]}, 0.0))
    assert v_eff(0.7, free) == 0.7
    assert v_eff(np.array([-1.0, 0.5]), bench).tolist() == [-2.0, 1.0]
    single = macro_params(2.0, prod(1.0, 0.5))
    assert v_eff(1.0, single) == 1.0
    assert v_eff(0.0, single) == -1.0


@pytest.mark.parametrize("seed", range(5))
def test_v_eff_closed_vs_integral(seed):
    rng = np.random.default_rng(seed)
    mu = VelocityLengthMeasure((
        Component(0.3, Gaussian(rng.normal(), 0.5), Exponential(2.0)),
        Component(0.7, Uniform(-1.0, 2.0), Uniform(0.1, 0.9)),
    ))
    p = macro_params(1.7, mu)
    for v in rng.uniform(-3, 3, 5):
        assert abs(v_eff(v, p) - v_eff_integral(v, 1.7, mu)) < 1e-10


def test_diffusivity_examples(bench_mu):
    assert diffusivity(1.0, 1.0, bench_mu) == 1.0
    assert diffusivity(0.3, 1.0, prod(0.3, {"exponential": 1.0})) == 0.0


def test_diffusivity_gaussian_against_monte_carlo():
    mu = prod({"gaussian": [0, 1]}, 1.0)
    D = diffusivity(0.0, 1.0, mu)
    assert D == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)
    w = np.abs(np.random.default_rng(3).normal(size=10**6))
    assert abs(w.mean() - D) < 3 * w.std() / 1e3


def test_diffusivity_kink_off_center():
    # |v - w| for uniform w on [-1, 2] at v = 0.5: closed form ((1.5)^2 + (1.5)^2) / (2 * 3)
    mu = prod({"uniform": [-1, 2]}, 1.0)
    assert diffusivity(0.5, 1.0, mu) == pytest.approx(0.75, abs=1e-13)


def test_parse_dist_roundtrip():
    for law in (Atom(2.0), Uniform(-1, 3), Gaussian(0.5, 2), Exponential(3.0)):
        assert parse_dist(law.to_dict()) == law
    with pytest.raises(ValueError):
        parse_dist({"cauchy": 1})
    with pytest.raises(ValueError):
        VelocityLengthMeasure.from_dict([{"weight": 0.4, "velocity": 0, "length": 1}])
    with pytest.raises(ValueError):
        prod(0.0, {"uniform": [-1, 1]})


def test_projection(bench):
    mu = bench.mu
    f = gaussian_bump(0.3, 0.7)
    P = project_P(f, bench.rho, bench.sigma, mu)
    y = np.linspace(-3, 3, 41)
    assert np.allclose(P(y), f(y, 0.0, 1.0), atol=1e-14)

    g = gaussian_bump(0.0, 1.0, velocity_poly=(0.2, 1.0, 0.5))
    Pg = project_P(g, bench.rho, bench.sigma, mu)

    class Wrapped:
        def __call__(self, y, v, r):
            return Pg(y, v, r)

    PPg = project_P(Wrapped(), bench.rho, bench.sigma, mu)
    assert np.allclose(PPg(y), Pg(y), atol=1e-14)

    odd = prod({"gaussian": [0, 1]}, 1.0)
    po = macro_params(1.0, odd)
    assert np.max(np.abs(project_P(gaussian_bump(velocity_poly=(0, 1)), 1.0, po.sigma, odd)(y))) < 1e-14
    with pytest.raises(DomainError):
        project_P(f, 1.0, 0.0, mu)


def test_covariance_mark_independent(bench):
    f = gaussian_bump(0.5, 0.8)
    l2, _ = integrate.quad(lambda y: f(y, 0, 1) ** 2, -20, 20, epsabs=1e-14, points=[0.5])
    # C phi = phi / (1 + sigma)
    want = bench.rho_bar * 1.0 * l2 / (1 + bench.sigma) ** 2
    assert theoretical_covariance(f, f, bench) == pytest.approx(want, rel=1e-12)


def test_covariance_against_direct_quadrature(bench):
    # benchmark: C phi(y, v) = phi(y, v) - (rho_bar / 2) (phi(y, 1) + phi(y, -1))
    phi = cosine_packet(-1.0, 2.0, 1.5, velocity_poly=(0.3, 1.0))
    psi = poly_bump(0.5, 3.0, velocity_poly=(1.0, 0.0, 2.0))

    def C(f, y, v):
        return f(y, v, 1.0) - 0.25 * (f(y, 1.0, 1.0) + f(y, -1.0, 1.0))

    def integrand(y):
        return 0.5 * sum(C(phi, y, v) * C(psi, y, v) for v in (1.0, -1.0))

    want, _ = integrate.quad(integrand, -2.5, 3.5, epsabs=1e-13, limit=200)
    assert theoretical_covariance(phi, psi, bench) == pytest.approx(0.5 * want, rel=1e-10, abs=1e-14)


def test_covariance_disjoint_and_sigma_limit(bench):
    a, b = poly_bump(-5, 1), poly_bump(5, 1)
    assert theoretical_covariance(a, b, bench) == 0.0
    mu = prod({"uniform": [-1, 1]}, 1.0)
    phi = gaussian_bump(0, 1, velocity_poly=(1, 1))
    rho = 1e-7
    p = macro_params(rho, mu)
    free = rho * moment(mu, lambda v, r: r**2 * (1 + v) ** 2) * math.sqrt(math.pi)
    assert theoretical_covariance(phi, phi, p) == pytest.approx(free, rel=1e-6)


def test_gram_psd(bench):
    phis = [poly_bump(0, 10), gaussian_bump(1, 1.5, velocity_poly=(0, 1)), cosine_packet(-1, 2, 1.5),
            gaussian_bump(0.5, 1.0, velocity_poly=(1, -1))]
    G = gram_matrix(phis, bench)
    assert np.allclose(G, G.T)
    assert np.linalg.eigvalsh(G).min() > -1e-12
    assert G[0, 1] == pytest.approx(0.0, abs=1e-14)


def test_mean_functional(bench):
    f = poly_bump(0, 10)
    # integral of (1 - u^2)^3 over [-1, 1] is 32/35
    assert mean_functional(f, bench) == pytest.approx(320 / 35, rel=1e-13)


def test_transported_covariance_zero_time(bench):
    phi = gaussian_bump(0.2, 1.0, velocity_poly=(1, 0.5))
    assert transported_covariance(phi, phi, 0.0, bench) == pytest.approx(theoretical_covariance(phi, phi, bench),
                                                                          rel=1e-9)


def test_transported_covariance_against_direct_quadrature(bench):
    # (C phi)(y + 2 v t, v) (C psi)(y, v) on the benchmark, integrated directly
    phi, psi, t = poly_bump(0.0, 4.0), gaussian_bump(1.0, 1.0, velocity_poly=(1, 1)), 0.5

    def C(f, y, v):
        return f(y, v, 1.0) - 0.25 * (f(y, 1.0, 1.0) + f(y, -1.0, 1.0))

    def integrand(y):
        return 0.5 * sum(C(phi, y + 2 * v * t, v) * C(psi, y, v) for v in (1.0, -1.0))

    want, _ = integrate.quad(integrand, -20, 20, epsabs=1e-12, limit=400, points=[-5, -3, 3, 5])
    got = transported_covariance(phi, psi, t, bench)
    assert got == pytest.approx(0.5 * want, rel=1e-6)
