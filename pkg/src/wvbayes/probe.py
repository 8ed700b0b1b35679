"""Gaussian meter coupled impulsively to one interferometer arm.

Units: the probe width ``sigma`` sets the length scale and hbar = 1, so the
coupling ``g`` is a dimensionless displacement and ``Var(p) = 1/(4 sigma**2)``.

The coupling ``exp(-i g B p)`` displaces only the glass-arm component of the
probe, so after post-selection on a port the (unnormalized) probe amplitude is

    phi(z) = c_thru * f(z - g) + c_other * f(z)

with ``c_thru``/``c_other`` the second-splitter coefficients of the glass arm
and the other arm into that port.  Everything below is exact in ``g``; the
first-order shifts are available separately from :func:`weak_limit_summary`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ZeroNormPort
from .mzi import GlassPlacement, MziState, check_port, other_arm, splitter_coefficient, theoretical_weak_value

#: below this post-selection probability a port wave cannot be normalized
MIN_PORT_PROBABILITY = 1e-15


@dataclass(frozen=True)
class GaussianProbe:
    sigma: float = 1.0

    def __post_init__(self):
        s = float(self.sigma)
        if not math.isfinite(s) or s <= 0:
            raise ConfigError(f"probe width must be positive, got {self.sigma!r}")
        object.__setattr__(self, "sigma", s)

    @property
    def var_p(self) -> float:
        return 0.25 / self.sigma**2

    @property
    def sigma_p(self) -> float:
        return 0.5 / self.sigma

    def f(self, z):
        """Position amplitude, normalized so that ``|f|**2`` is N(0, sigma**2)."""
        s = self.sigma
        return (2 * math.pi * s * s) ** -0.25 * np.exp(-np.square(z) / (4 * s * s))

    def f_tilde(self, p):
        """Fourier transform of :meth:`f` (real and positive for this probe)."""
        sp = self.sigma_p
        return (2 * math.pi * sp * sp) ** -0.25 * np.exp(-np.square(p) / (4 * sp * sp))

    def overlap(self, g: float) -> float:
        """``<f(. - g)|f>`` which is ``exp(-g**2 / (8 sigma**2))``."""
        return math.exp(-g * g / (8 * self.sigma**2))


@dataclass(frozen=True)
class PortWave:
    c_thru: complex
    c_other: complex
    g: float
    probe: GaussianProbe

    @property
    def cross(self) -> complex:
        return self.c_thru * self.c_other.conjugate()

    @property
    def norm2(self) -> float:
        e = self.probe.overlap(self.g)
        return abs(self.c_thru) ** 2 + abs(self.c_other) ** 2 + 2 * self.cross.real * e

    def amplitude(self, z):
        """Unnormalized post-selected probe amplitude ``phi(z)``."""
        f = self.probe.f
        return self.c_thru * f(np.asarray(z) - self.g) + self.c_other * f(z)

    def momentum_amplitude(self, p):
        p = np.asarray(p)
        return self.probe.f_tilde(p) * (self.c_thru * np.exp(-1j * p * self.g) + self.c_other)


def port_wave(state: MziState, glass: GlassPlacement, probe: GaussianProbe, port: str) -> PortWave:
    port = check_port(port)
    thru, other = glass.arm, other_arm(glass.arm)
    return PortWave(
        c_thru=splitter_coefficient(thru, port) * state.amplitude(thru),
        c_other=splitter_coefficient(other, port) * state.amplitude(other),
        g=glass.g,
        probe=probe,
    )


def exact_port_probability(wave: PortWave) -> float:
    return max(wave.norm2, 0.0)


def _require_norm(wave: PortWave) -> float:
    n2 = exact_port_probability(wave)
    if n2 <= MIN_PORT_PROBABILITY:
        raise ZeroNormPort(f"post-selection probability {n2:.3g} is too small to normalize")
    return n2


class PositionDensity:
    """Normalized ``|phi(z)|**2``; callable on scalars or arrays."""

    def __init__(self, wave: PortWave):
        self.wave = wave
        self.norm2 = _require_norm(wave)

    def __call__(self, z):
        return np.abs(self.wave.amplitude(z)) ** 2 / self.norm2

    def mean(self) -> float:
        w = self.wave
        e = w.probe.overlap(w.g)
        return w.g * (abs(w.c_thru) ** 2 + w.cross.real * e) / self.norm2

    def support(self, width: float = 12.0) -> tuple[float, float]:
        s = self.wave.probe.sigma
        return -width * s - abs(self.wave.g), width * s + abs(self.wave.g)


class MomentumDensity:
    """Normalized ``|phi~(p)|**2``."""

    def __init__(self, wave: PortWave):
        self.wave = wave
        self.norm2 = _require_norm(wave)

    def __call__(self, p):
        return np.abs(self.wave.momentum_amplitude(p)) ** 2 / self.norm2

    def mean(self) -> float:
        w = self.wave
        e = w.probe.overlap(w.g)
        return 2 * w.g * w.probe.var_p * e * w.cross.imag / self.norm2

    def support(self, width: float = 12.0) -> tuple[float, float]:
        sp = self.wave.probe.sigma_p
        return -width * sp, width * sp


def position_density(wave: PortWave) -> PositionDensity:
    return PositionDensity(wave)


def momentum_density(wave: PortWave) -> MomentumDensity:
    return MomentumDensity(wave)


def weak_limit_summary(state: MziState, glass: GlassPlacement, probe: GaussianProbe, port: str) -> tuple[float, float]:
    """First-order mean shifts ``(g Re wv, 2 g Var(p) Im wv)`` for the glass arm."""
    wv = theoretical_weak_value(state, glass.arm, port)
    return glass.g * wv.real, 2 * glass.g * probe.var_p * wv.imag
