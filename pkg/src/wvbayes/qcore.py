"""Small labeled Hilbert spaces: kets, inner products and rank-1 projectors.

Amplitudes are plain Python ``complex`` numbers.  A :class:`Ket` owns an
ordered tuple of basis labels; two kets live in the same space exactly when
their label tuples are equal.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import BasisMismatch, InvalidState, ZeroNorm

#: absolute tolerance for analytic identities between O(1) quantities
ATOL = 1e-12

Amplitude = complex


@dataclass(frozen=True, eq=False)
class Ket:
    labels: tuple
    components: np.ndarray
    normalized: bool = field(default=False)

    def __post_init__(self):
        labels = tuple(str(label) for label in self.labels)
        comps = np.array(self.components, dtype=complex).reshape(-1)
        if len(labels) < 1 or len(labels) != comps.shape[0]:
            raise InvalidState(
                f"need one component per label, got {len(labels)} labels and {comps.shape[0]} components"
            )
        if len(set(labels)) != len(labels):
            raise InvalidState(f"duplicate basis labels in {labels!r}")
        if not np.all(np.isfinite(comps)):
            raise InvalidState("ket components must be finite")
        if self.normalized and abs(float(np.vdot(comps, comps).real) - 1.0) > ATOL:
            raise InvalidState("ket flagged normalized does not have unit norm")
        comps.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return len(self.labels)

    def norm(self) -> float:
        return math.sqrt(float(np.vdot(self.components, self.components).real))

    def __getitem__(self, label) -> complex:
        return complex(self.components[self.labels.index(label)])

    def scaled(self, factor: complex) -> "Ket":
        return Ket(self.labels, self.components * factor)

    def __add__(self, other: "Ket") -> "Ket":
        _check_basis(self, other)
        return Ket(self.labels, self.components + other.components)

    def __sub__(self, other: "Ket") -> "Ket":
        _check_basis(self, other)
        return Ket(self.labels, self.components - other.components)

    def allclose(self, other: "Ket", atol: float = ATOL) -> bool:
        return self.labels == other.labels and bool(
            np.allclose(self.components, other.components, rtol=0.0, atol=atol)
        )

    def __repr__(self):
        body = ", ".join(f"{l}: {c:.6g}" for l, c in zip(self.labels, self.components))
        return f"Ket({body})"


def ket(labels: Sequence, components: Iterable) -> Ket:
    return Ket(tuple(labels), np.asarray(list(components), dtype=complex))


def basis_ket(labels: Sequence, label) -> Ket:
    labels = tuple(str(l) for l in labels)
    comps = np.zeros(len(labels), dtype=complex)
    comps[labels.index(str(label))] = 1.0
    return Ket(labels, comps, normalized=True)


def standard_basis(labels: Sequence) -> list[Ket]:
    return [basis_ket(labels, label) for label in labels]


def _check_basis(a: Ket, b: Ket) -> None:
    if a.labels != b.labels:
        raise BasisMismatch(a.labels, b.labels)


def inner(bra: Ket, ket: Ket) -> complex:
    """Return ``<bra|ket>``; the bra is conjugated."""
    _check_basis(bra, ket)
    return complex(np.vdot(bra.components, ket.components))


def normalize(k: Ket) -> Ket:
    n = k.norm()
    if n == 0.0:
        raise ZeroNorm(f"cannot normalize zero-norm ket over {k.labels!r}")
    return Ket(k.labels, k.components / n, normalized=True)


@dataclass(frozen=True, eq=False)
class Projector:
    """Rank-1 projector ``|axis><axis|``."""

    axis: Ket

    def __post_init__(self):
        if abs(self.axis.norm() - 1.0) > ATOL:
            raise InvalidState("projector axis must be a normalized ket")

    @property
    def labels(self) -> tuple:
        return self.axis.labels

    def matrix(self) -> np.ndarray:
        v = self.axis.components
        return np.outer(v, v.conj())

    def expectation(self, k: Ket) -> float:
        """``<k|P|k>`` which for a projector equals ``|<axis|k>|**2``."""
        return abs(inner(self.axis, k)) ** 2


def apply_projector(p: Projector, k: Ket) -> Ket:
    return p.axis.scaled(inner(p.axis, k))


def projector_onto(k: Ket) -> Projector:
    return Projector(normalize(k))


def sandwich(bra: Ket, ops: Sequence[Projector], k: Ket) -> complex:
    """``<bra| P_1 P_2 ... P_n |k>`` for a product of rank-1 projectors."""
    out = k
    for p in reversed(ops):
        out = apply_projector(p, out)
    return inner(bra, out)


def random_ket(labels: Sequence, rng: np.random.Generator) -> Ket:
    """Haar-random normalized ket (complex Gaussian direction)."""
    d = len(labels)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return normalize(Ket(tuple(labels), v))


def phase_of(z: complex) -> float:
    """Argument of ``z`` in ``(-pi, pi]``."""
    a = cmath.phase(z)
    return math.pi if a == -math.pi else a
