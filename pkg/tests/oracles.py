"""Independent reference computations used by the tests.

Nothing here imports the closed forms under test: densities are rebuilt from
the bare Gaussian amplitude and integrated with QUADPACK (adaptive
Gauss-Kronrod), momentum means come from ``-i d/dz`` in position space.
"""
import math
import warnings

import numpy as np
from scipy.integrate import IntegrationWarning, quad

SQ = 1 / math.sqrt(2)

# <port|arm> straight from the printed splitter transitions
SPLIT = {("B", "D"): SQ, ("B", "D'"): -SQ, ("C", "D"): SQ, ("C", "D'"): SQ}


def f(z, sigma=1.0):
    return (2 * math.pi * sigma**2) ** -0.25 * np.exp(-np.square(z) / (4 * sigma**2))


def coefficients(beta, gamma, arm, port):
    amps = {"B": beta, "C": gamma}
    other = "C" if arm == "B" else "B"
    return SPLIT[arm, port] * amps[arm], SPLIT[other, port] * amps[other]


def phi(beta, gamma, arm, port, g, sigma=1.0):
    ct, co = coefficients(beta, gamma, arm, port)
    return lambda z: ct * f(z - g, sigma) + co * f(z, sigma)


def _quad(fn, lo=-np.inf, hi=np.inf):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        return quad(fn, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)[0]


def port_probability(beta, gamma, arm, port, g, sigma=1.0):
    ph = phi(beta, gamma, arm, port, g, sigma)
    return _quad(lambda z: abs(ph(z)) ** 2)


def position_mean(beta, gamma, arm, port, g, sigma=1.0):
    ph = phi(beta, gamma, arm, port, g, sigma)
    n = _quad(lambda z: abs(ph(z)) ** 2)
    return _quad(lambda z: z * abs(ph(z)) ** 2) / n


def position_variance(beta, gamma, arm, port, g, sigma=1.0):
    ph = phi(beta, gamma, arm, port, g, sigma)
    n = _quad(lambda z: abs(ph(z)) ** 2)
    m = _quad(lambda z: z * abs(ph(z)) ** 2) / n
    return _quad(lambda z: (z - m) ** 2 * abs(ph(z)) ** 2) / n


def momentum_mean(beta, gamma, arm, port, g, sigma=1.0, h=1e-5):
    """``<phi| -i d/dz |phi> / <phi|phi>`` by central differences and quadrature."""
    ph = phi(beta, gamma, arm, port, g, sigma)
    n = _quad(lambda z: abs(ph(z)) ** 2)
    deriv = lambda z: (ph(z + h) - ph(z - h)) / (2 * h)
    return _quad(lambda z: (np.conj(ph(z)) * deriv(z)).imag) / n


def momentum_amplitude_by_fourier(beta, gamma, arm, port, g, p, sigma=1.0):
    """``(2 pi)^-1/2 int exp(-i p z) phi(z) dz`` by quadrature."""
    ph = phi(beta, gamma, arm, port, g, sigma)
    re = _quad(lambda z: (np.exp(-1j * p * z) * ph(z)).real)
    im = _quad(lambda z: (np.exp(-1j * p * z) * ph(z)).imag)
    return complex(re, im) / math.sqrt(2 * math.pi)


def integrate(fn, lo, hi):
    return _quad(fn, lo, hi)


def brute_weak_value(axis, pre, post):
    """<z|a><a|psi>/<z|psi> with plain numpy vectors."""
    axis, pre, post = map(np.asarray, (axis, pre, post))
    return np.vdot(post, axis) * np.vdot(axis, pre) / np.vdot(post, pre)


def random_vector(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))
