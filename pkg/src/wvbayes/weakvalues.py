"""Analytic weak values of rank-1 projectors and their Bayes-relation duals.

Naming note: for an observable axis ``a`` and a post-selected state ``z`` the
module talks about the *forward* weak value ``<z|A|psi>/<z|psi>`` and the
*reverse* weak value ``<a|Z|psi>/<a|psi>``.  Which of the two deserves the
label ``P(z|a)`` and which ``P(a|z)`` is a matter of interpretation; the code
only exposes the algebraic objects and the identity linking them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateLoop, IncompleteBasis, OrthogonalPostSelection
from .qcore import (
    ATOL,
    Ket,
    Projector,
    apply_projector,
    inner,
    phase_of,
    sandwich,
    _check_basis,
)

#: overlaps at or below this magnitude count as zero
OVERLAP_CUTOFF = 1e-12


@dataclass(frozen=True)
class WeakValueResult:
    value: complex
    pre: Ket
    post: Ket
    observable: Projector

    @property
    def real_part(self) -> float:
        return self.value.real

    @property
    def imag_part(self) -> float:
        return self.value.imag


@dataclass(frozen=True)
class BayesDecomposition:
    forward_wv: complex
    reverse_wv: complex
    p_a: float
    p_z: float

    def residual(self) -> float:
        """``|forward * p_z - conj(reverse) * p_a|``, zero up to rounding."""
        return abs(self.forward_wv * self.p_z - self.reverse_wv.conjugate() * self.p_a)


def _overlap(post: Ket, pre: Ket, which: str) -> complex:
    amp = inner(post, pre)
    if abs(amp) <= OVERLAP_CUTOFF:
        raise OrthogonalPostSelection(
            f"weak value undefined: |{which}| = {abs(amp):.3g} <= {OVERLAP_CUTOFF:g}", which=which
        )
    return amp


def weak_value(observable: Projector, pre: Ket, post: Ket) -> WeakValueResult:
    _check_basis(observable.axis, pre)
    denom = _overlap(post, pre, "<post|pre>")
    value = inner(post, apply_projector(observable, pre)) / denom
    return WeakValueResult(value, pre, post, observable)


def _check_complete(basis: Sequence[Ket], tol: float = 1e-10) -> None:
    if not basis:
        raise IncompleteBasis("empty basis")
    d = basis[0].dim
    total = np.zeros((d, d), dtype=complex)
    for b in basis:
        _check_basis(basis[0], b)
        total += np.outer(b.components, b.components.conj())
    if not np.allclose(total, np.eye(d), rtol=0.0, atol=tol):
        raise IncompleteBasis(
            f"sum of basis projectors deviates from identity by {np.abs(total - np.eye(d)).max():.3g}"
        )


def partial_amplitude_portion(observable: Projector, pre: Ket, post: Ket, basis: Sequence[Ket]) -> complex:
    """Weak value written as one path's share of the summed partial amplitudes."""
    _check_complete(basis)
    if not any(abs(abs(inner(b, observable.axis)) - 1.0) <= 1e-10 for b in basis):
        raise IncompleteBasis("observable axis is not a member of the supplied basis")
    terms = [inner(post, m) * inner(m, pre) for m in basis]
    total = sum(terms)
    if abs(total) <= OVERLAP_CUTOFF:
        raise OrthogonalPostSelection("sum of partial amplitudes vanishes", which="<post|pre>")
    a = observable.axis
    return inner(post, a) * inner(a, pre) / total


def bayes_decompose(observable_axis: Ket, pre: Ket, post: Ket) -> BayesDecomposition:
    _check_basis(observable_axis, pre)
    _check_basis(post, pre)
    z_psi = _overlap(post, pre, "<z|psi>")
    a_psi = _overlap(observable_axis, pre, "<a|psi>")
    z_a = inner(post, observable_axis)
    forward = z_a * a_psi / z_psi
    reverse = z_a.conjugate() * z_psi / a_psi
    return BayesDecomposition(forward, reverse, abs(a_psi) ** 2, abs(z_psi) ** 2)


@dataclass(frozen=True)
class SumRuleResult:
    value: float
    # basis indices whose <a|psi> vanished and were summed in unnormalized form
    unnormalized_terms: tuple = ()


def sum_rule_check(post: Ket, pre: Ket, basis: Sequence[Ket]) -> SumRuleResult:
    """Sum over a of ``Re[<a|Z|psi>/<a|psi>] * P(a)``; should equal ``|<z|psi>|**2``."""
    _check_complete(basis)
    total = 0.0
    flagged = []
    for i, a in enumerate(basis):
        a_psi = inner(a, pre)
        a_z_psi = inner(a, post) * inner(post, pre)
        if abs(a_psi) <= OVERLAP_CUTOFF:
            flagged.append(i)
            total += (a_psi.conjugate() * a_z_psi).real
        else:
            total += (a_z_psi / a_psi).real * abs(a_psi) ** 2
    return SumRuleResult(total, tuple(flagged))


def joint_quasi_probability(observable: Projector, post_proj: Projector, pre: Ket) -> complex:
    """``<psi|Z A|psi>``."""
    return sandwich(pre, [post_proj, observable], pre)


def _post_probability(post_proj: Projector, pre: Ket) -> float:
    p_z = post_proj.expectation(pre)
    if p_z <= OVERLAP_CUTOFF:
        raise OrthogonalPostSelection(f"P(z) = {p_z:.3g} <= {OVERLAP_CUTOFF:g}", which="P(z)")
    return p_z


def imag_via_commutator(observable: Projector, post_proj: Projector, pre: Ket) -> float:
    p_z = _post_probability(post_proj, pre)
    za = sandwich(pre, [post_proj, observable], pre)
    az = sandwich(pre, [observable, post_proj], pre)
    commutator = (za - az) / 2j
    return commutator.real / p_z


def projector_spread(p: Projector, k: Ket) -> float:
    """Standard deviation of a projector in state ``k`` (uses P**2 == P)."""
    mean = p.expectation(k)
    return math.sqrt(max(mean - mean * mean, 0.0))


def uncertainty_bound_check(observable: Projector, post_proj: Projector, pre: Ket) -> tuple[float, float]:
    """Return ``(|Im wv|, dZ * dA / P(z))``; the first never exceeds the second."""
    p_z = _post_probability(post_proj, pre)
    lhs = abs(weak_value(observable, pre, post_proj.axis).imag_part)
    rhs = projector_spread(post_proj, pre) * projector_spread(observable, pre) / p_z
    return lhs, rhs


def geometric_phase(pre: Ket, mid: Ket, post: Ket) -> float:
    """Phase of the Bargmann invariant ``<psi|z><z|a><a|psi>`` in ``(-pi, pi]``."""
    bargmann = inner(pre, post) * inner(post, mid) * inner(mid, pre)
    if abs(bargmann) <= OVERLAP_CUTOFF:
        raise DegenerateLoop("Bargmann invariant of the loop vanishes")
    return phase_of(bargmann)


def weak_values_complete(pre: Ket, post: Ket, basis: Sequence[Ket]) -> complex:
    """Sum of weak values over every projector of ``basis``; exactly 1 in theory."""
    return sum(weak_value(Projector(b), pre, post).value for b in basis)


__all__ = [
    "ATOL",
    "OVERLAP_CUTOFF",
    "WeakValueResult",
    "BayesDecomposition",
    "SumRuleResult",
    "weak_value",
    "partial_amplitude_portion",
    "bayes_decompose",
    "sum_rule_check",
    "joint_quasi_probability",
    "imag_via_commutator",
    "projector_spread",
    "uncertainty_bound_check",
    "geometric_phase",
    "weak_values_complete",
]
