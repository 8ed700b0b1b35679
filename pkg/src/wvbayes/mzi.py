"""Two-path Mach-Zehnder model.

Beam-splitter convention (frozen; every derived sign depends on it)::

    |A>  -> (|B> + |C>)/sqrt2        |A'> -> (|B> - |C>)/sqrt2
    |B>  -> (|D> - |D'>)/sqrt2       |C>  -> (|D> + |D'>)/sqrt2

so that ``|A> -> |D>`` and ``|A'> -> -|D'>`` through the whole device.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, InvalidState, OrthogonalPostSelection
from .qcore import ATOL, Ket, Projector, basis_ket, ket

SQRT1_2 = 1.0 / math.sqrt(2.0)

INPUT_PORTS = ("A", "A'")
ARMS = ("B", "C")
PORTS = ("D", "D'")

_ALIASES = {"Ap": "A'", "Dp": "D'", "A'": "A'", "D'": "D'"}


def canonical_label(label: str) -> str:
    label = str(label).strip()
    return _ALIASES.get(label, label)


def check_arm(arm: str) -> str:
    arm = canonical_label(arm)
    if arm not in ARMS:
        raise ConfigError(f"arm must be one of {ARMS}, got {arm!r}")
    return arm


def check_port(port: str) -> str:
    port = canonical_label(port)
    if port not in PORTS:
        raise ConfigError(f"port must be one of {PORTS}, got {port!r}")
    return port


def other_arm(arm: str) -> str:
    return "C" if check_arm(arm) == "B" else "B"


# second-splitter matrix elements <port|arm>
_OUT = {
    ("B", "D"): SQRT1_2,
    ("B", "D'"): -SQRT1_2,
    ("C", "D"): SQRT1_2,
    ("C", "D'"): SQRT1_2,
}


def splitter_coefficient(arm: str, port: str) -> float:
    """``<port|arm>`` for the second beam splitter."""
    return _OUT[check_arm(arm), check_port(port)]


@dataclass(frozen=True)
class MziState:
    """``|psi> = beta|B> + gamma|C>`` on the interferometer arms."""

    beta: complex
    gamma: complex

    def __post_init__(self):
        object.__setattr__(self, "beta", complex(self.beta))
        object.__setattr__(self, "gamma", complex(self.gamma))
        norm2 = abs(self.beta) ** 2 + abs(self.gamma) ** 2
        if abs(norm2 - 1.0) > ATOL:
            raise InvalidState(f"|beta|^2 + |gamma|^2 = {norm2!r}, expected 1")

    @classmethod
    def normalized(cls, beta: complex, gamma: complex) -> "MziState":
        n = math.sqrt(abs(beta) ** 2 + abs(gamma) ** 2)
        if n == 0.0:
            raise InvalidState("beta and gamma both vanish")
        return cls(beta / n, gamma / n)

    def amplitude(self, arm: str) -> complex:
        return self.beta if check_arm(arm) == "B" else self.gamma

    def ket(self) -> Ket:
        return ket(ARMS, [self.beta, self.gamma])


def worked_example_state() -> MziState:
    """beta = sqrt(1/5), gamma = -sqrt(4/5): weak value -1 at port D."""
    return MziState(math.sqrt(1 / 5), -math.sqrt(4 / 5))


@dataclass(frozen=True)
class GlassPlacement:
    """Tilted slide in one arm; ``g`` is the displacement in units of the probe width."""

    arm: str
    g: float

    def __post_init__(self):
        object.__setattr__(self, "arm", check_arm(self.arm))
        g = float(self.g)
        if not math.isfinite(g) or g < 0:
            raise ConfigError(f"coupling g must be finite and >= 0, got {self.g!r}")
        object.__setattr__(self, "g", g)


def arm_ket(arm: str) -> Ket:
    return basis_ket(ARMS, check_arm(arm))


def port_ket(port: str) -> Ket:
    """Output-port state expressed in the arm basis."""
    port = check_port(port)
    return ket(ARMS, [splitter_coefficient("B", port), splitter_coefficient("C", port)])


def port_amplitude(state: MziState, port: str) -> complex:
    port = check_port(port)
    return splitter_coefficient("B", port) * state.beta + splitter_coefficient("C", port) * state.gamma


def beam_splitter_out(state: MziState) -> tuple[complex, complex]:
    """Amplitudes at (D, D') after the second splitter."""
    return port_amplitude(state, "D"), port_amplitude(state, "D'")


def first_splitter_in(amp_a: complex, amp_ap: complex) -> MziState:
    """Arm state produced by the first splitter from input-port amplitudes."""
    beta = (amp_a + amp_ap) * SQRT1_2
    gamma = (amp_a - amp_ap) * SQRT1_2
    return MziState(beta, gamma)


def port_probability(state: MziState, port: str) -> float:
    return abs(port_amplitude(state, port)) ** 2


def theoretical_weak_value(state: MziState, arm: str, port: str) -> complex:
    """Closed-form ``<port|arm><arm|psi> / <port|psi>``.

    (B,D): b/(b+g), (C,D): g/(b+g), (B,D'): b/(b-g), (C,D'): -g/(b-g).
    """
    arm, port = check_arm(arm), check_port(port)
    b, c = state.beta, state.gamma
    denom = b + c if port == "D" else b - c
    if abs(denom) * SQRT1_2 <= 1e-12:
        raise OrthogonalPostSelection(f"port {port} is dark for this state", which=port)
    if arm == "B":
        return b / denom
    return c / denom if port == "D" else -c / denom


def arm_projector(arm: str) -> Projector:
    return Projector(arm_ket(arm))


def port_projector(port: str) -> Projector:
    return Projector(port_ket(port))
