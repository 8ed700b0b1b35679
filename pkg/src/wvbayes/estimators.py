"""Weak values, priors and state tomography reconstructed from shift sums.

Error bars use the first-order delta method.  Sums are treated as totals over
all ``N`` photons of a run (``Z_port = sum z * [port]``), so their variance
``S2 - S1**2/N`` already accounts for the random port counts, and the two ports
of one run are negatively correlated (``cov = -S1_D * S1_D' / N``).  Position
and momentum sums come from separate runs and are independent, as are the
glass-in-B and glass-in-C experiments.

All g-free estimators carry an O(g) (in practice O(g**2)) bias that is not
corrected here; ``wvbayes sweep`` shows it as a function of ``g``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateDenominator, InsufficientSamples, MismatchedRuns, ZeroCoupling
from .mc import ShiftAccumulator, standard_errors
from .mzi import PORTS, GlassPlacement, MziState, check_arm, check_port, port_projector, arm_projector
from .probe import GaussianProbe, exact_port_probability, momentum_density, port_wave, position_density
from .weakvalues import projector_spread

#: denominators must exceed this many standard errors
DENOMINATOR_SIGMAS = 3.0


@dataclass(frozen=True)
class EstimateReport:
    point: complex
    std_error: float
    formula_id: str
    n_used: int = 0
    g: Optional[float] = None
    seed: Optional[int] = None
    se_re: float = math.nan
    se_im: float = math.nan
    inputs_digest: dict = field(default_factory=dict, compare=False)

    @property
    def real(self) -> float:
        return complex(self.point).real

    @property
    def imag(self) -> float:
        return complex(self.point).imag

    def to_dict(self) -> dict:
        p = complex(self.point)
        return {
            "formula_id": self.formula_id,
            "point_re": p.real,
            "point_im": p.imag,
            "std_error": self.std_error,
            "n_used": self.n_used,
            "g": self.g,
            "seed": self.seed,
        }


# -- complex shifts -------------------------------------------------------------


@dataclass(frozen=True)
class ArmShifts:
    """Complex shifts ``xi_port = Z_port + i P_port / (2 Var(p))`` for one glass arm.

    ``cov`` is the 4x4 covariance of ``(Re xi_D, Re xi_D', Im xi_D, Im xi_D')``.
    """

    arm: str
    xi: dict
    cov: np.ndarray
    n_total: int
    g: float
    seed: Optional[int] = None
    n_port: dict = field(default_factory=dict)

    def __getitem__(self, port: str) -> complex:
        return self.xi[check_port(port)]

    def flipped(self, port: str, part: str = "both") -> "ArmShifts":
        """Copy with one shift's sign corrupted (``part`` is 'both', 're' or 'im')."""
        port = check_port(port)
        x = self.xi[port]
        new = {"both": -x, "re": complex(-x.real, x.imag), "im": x.conjugate()}[part]
        return replace(self, xi={**self.xi, port: new})


def _sum_variance(total, sumsq, n_total: int) -> float:
    return max(sumsq - total * total / n_total, 0.0)


def _observable_cov(acc: ShiftAccumulator, scale: float) -> np.ndarray:
    obs = acc.mode
    n = acc.n_total
    s = [acc.ports[p].sums(obs) for p in PORTS]
    cov = np.empty((2, 2))
    cov[0, 0] = _sum_variance(*s[0], n)
    cov[1, 1] = _sum_variance(*s[1], n)
    cov[0, 1] = cov[1, 0] = -s[0][0] * s[1][0] / n
    return cov * scale * scale


def xi_from_runs(acc_pos: ShiftAccumulator, acc_mom: ShiftAccumulator, probe: GaussianProbe) -> ArmShifts:
    if acc_pos.mode != "position" or acc_mom.mode != "momentum":
        raise MismatchedRuns("need one position-mode and one momentum-mode accumulator")
    if not acc_pos.config.same_experiment(acc_mom.config):
        raise MismatchedRuns("position and momentum runs used different states, glass or probe")
    if acc_pos.config.probe != probe:
        raise MismatchedRuns("probe does not match the runs")
    two_var = 2 * probe.var_p
    xi = {
        port: complex(acc_pos.ports[port].z_sum, acc_mom.ports[port].p_sum / two_var) for port in PORTS
    }
    cov = np.zeros((4, 4))
    cov[:2, :2] = _observable_cov(acc_pos, 1.0)
    cov[2:, 2:] = _observable_cov(acc_mom, 1.0 / two_var)
    return ArmShifts(
        arm=acc_pos.glass_arm,
        xi=xi,
        cov=cov,
        n_total=acc_pos.n_total,
        g=acc_pos.g,
        seed=acc_pos.config.seed,
        n_port={port: acc_pos.ports[port].n for port in PORTS},
    )


def expected_shifts(state: MziState, probe: GaussianProbe, g: float, n_total: int, arm: str) -> ArmShifts:
    """Noise-free shifts: ``N * P(port) * <z>_port`` from the exact densities."""
    glass = GlassPlacement(check_arm(arm), g)
    xi = {}
    n_port = {}
    for port in PORTS:
        wave = port_wave(state, glass, probe, port)
        prob = exact_port_probability(wave)
        n_port[port] = n_total * prob
        if prob <= 1e-15:
            xi[port] = 0j
            continue
        z = position_density(wave).mean()
        p = momentum_density(wave).mean()
        xi[port] = n_total * prob * complex(z, p / (2 * probe.var_p))
    return ArmShifts(glass.arm, xi, np.zeros((4, 4)), n_total, g, None, n_port)


# -- delta method ---------------------------------------------------------------


def _joint_cov(shifts: Sequence[ArmShifts]) -> np.ndarray:
    """Covariance over (Re of every xi, then Im of every xi), arms independent."""
    k = 2 * len(shifts)
    cov = np.zeros((2 * k, 2 * k))
    for i, s in enumerate(shifts):
        re = [2 * i, 2 * i + 1]
        im = [k + 2 * i, k + 2 * i + 1]
        idx = re + im
        cov[np.ix_(idx, idx)] = s.cov
    return cov


def _propagate(grads: Sequence[complex], cov: np.ndarray) -> tuple[float, float]:
    """Variance of (Re f, Im f) for holomorphic f with complex partials ``grads``."""
    a = np.asarray(grads, dtype=complex)
    jac = np.block([[a.real[None, :], -a.imag[None, :]], [a.imag[None, :], a.real[None, :]]])
    c = jac @ cov @ jac.T
    return max(c[0, 0], 0.0), max(c[1, 1], 0.0)


def _grads(shifts: Sequence[ArmShifts], partials: dict) -> list:
    """Order ``{(arm, port): d f / d xi}`` the way :func:`_joint_cov` lays out variables."""
    out = []
    for s in shifts:
        for port in PORTS:
            out.append(partials.get((s.arm, port), 0j))
    return out


def _check_denominator(value: complex, var_re: float, var_im: float, what: str) -> None:
    se = math.sqrt(var_re + var_im)
    if not abs(value) > DENOMINATOR_SIGMAS * se or value == 0:
        raise DegenerateDenominator(
            f"{what} = {value:.4g} is within {DENOMINATOR_SIGMAS:g} standard errors ({se:.3g}) of zero"
        )


def _report(point, var_re, var_im, formula_id, n_used, g, seed, **digest) -> EstimateReport:
    return EstimateReport(
        point=point,
        std_error=math.sqrt(var_re + var_im),
        formula_id=formula_id,
        n_used=int(n_used),
        g=g,
        seed=seed,
        se_re=math.sqrt(var_re),
        se_im=math.sqrt(var_im),
        inputs_digest=digest,
    )


def _ratio_partials(num_key, other_key, num: complex, other: complex) -> dict:
    """Partials of ``num / (num + other)``."""
    d2 = (num + other) ** 2
    return {num_key: other / d2, other_key: -num / d2}


def _same_arm_pair(xi_b: ArmShifts, xi_c: ArmShifts) -> None:
    if xi_b.arm != "B" or xi_c.arm != "C":
        raise MismatchedRuns(f"expected shifts for arms (B, C), got ({xi_b.arm}, {xi_c.arm})")
    if xi_b.g != xi_c.g or xi_b.n_total != xi_c.n_total:
        raise MismatchedRuns("glass-B and glass-C runs used different g or photon budgets")


# -- position-only estimators --------------------------------------------------------


def _position_only(acc: ShiftAccumulator) -> None:
    if acc.mode != "position":
        raise MismatchedRuns("this estimator needs a position-mode accumulator")


def wv_from_shift(acc: ShiftAccumulator, port: str, g: Optional[float] = None) -> EstimateReport:
    """``Re wv = Z_port / (g n_port)``; needs the coupling to be known."""
    _position_only(acc)
    port = check_port(port)
    g = acc.g if g is None else float(g)
    if g == 0:
        raise ZeroCoupling("g = 0: a vanishing shift cannot be inverted")
    s = acc.ports[port]
    if s.n < 2:
        raise InsufficientSamples(f"port {port} has {s.n} photon(s)")
    se_z = standard_errors(acc, strict=False)[port][0]
    point = s.z_sum / (g * s.n)
    se = se_z / g
    return _report(point, se * se, 0.0, "shift", s.n, g, acc.config.seed, arm=acc.glass_arm, port=port)


def counterfactual_wv(acc: ShiftAccumulator) -> EstimateReport:
    """``Z_D / (Z_D + Z_D')`` from one run; estimates ``Re <psi|D|X>/<psi|X>``."""
    _position_only(acc)
    cov = _observable_cov(acc, 1.0)
    zd, zdp = acc.ports["D"].z_sum, acc.ports["D'"].z_sum
    den = zd + zdp
    _check_denominator(den, float(cov.sum()), 0.0, "Z_D + Z_D'")
    grad = np.array([zdp / den**2, -zd / den**2])
    var = float(grad @ cov @ grad)
    return _report(zd / den, var, 0.0, "counterfactual", acc.n_total, acc.g, acc.config.seed, arm=acc.glass_arm)


def wv_ratio_across_arms(
    acc_b: ShiftAccumulator, acc_c: ShiftAccumulator, port: str, arm: str = "B"
) -> EstimateReport:
    """``Z^X_port / (Z^B_port + Z^C_port)`` for ``X = arm``, free of ``g``."""
    _position_only(acc_b)
    _position_only(acc_c)
    port = check_port(port)
    arm = check_arm(arm)
    if acc_b.glass_arm != "B" or acc_c.glass_arm != "C":
        raise MismatchedRuns("expected a glass-B run and a glass-C run")
    if acc_b.config.state != acc_c.config.state or acc_b.g != acc_c.g:
        raise MismatchedRuns("glass-B and glass-C runs differ in state or g")
    i = PORTS.index(port)
    vb = _observable_cov(acc_b, 1.0)[i, i]
    vc = _observable_cov(acc_c, 1.0)[i, i]
    zb, zc = acc_b.ports[port].z_sum, acc_c.ports[port].z_sum
    den = zb + zc
    _check_denominator(den, vb + vc, 0.0, f"Z^B_{port} + Z^C_{port}")
    # both arms share one variance: d(zb/den) = -d(zc/den)
    var = (zc / den**2) ** 2 * vb + (zb / den**2) ** 2 * vc
    num = zb if arm == "B" else zc
    return _report(
        num / den, var, 0.0, "ratio_across_arms", acc_b.n_total + acc_c.n_total, acc_b.g, acc_b.config.seed,
        port=port, arm=arm,
    )


# -- complex-shift estimators --------------------------------------------------------


def eta(xi: ArmShifts) -> EstimateReport:
    """``xi_D / (xi_D + xi_D')``.

    Estimates ``<psi|D|X>/<psi|X>``, the complex conjugate of the reverse weak
    value ``<X|D|psi>/<X|psi>``.
    """
    d, dp = xi["D"], xi["D'"]
    cov = _joint_cov([xi])
    vr, vi = _propagate(_grads([xi], {(xi.arm, "D"): 1, (xi.arm, "D'"): 1}), cov)
    _check_denominator(d + dp, vr, vi, "xi_D + xi_D'")
    grads = _grads([xi], _ratio_partials((xi.arm, "D"), (xi.arm, "D'"), d, dp))
    vr, vi = _propagate(grads, cov)
    return _report(d / (d + dp), vr, vi, "eta", xi.n_total, xi.g, xi.seed, arm=xi.arm)


def complex_wv(xi_b: ArmShifts, xi_c: ArmShifts, port: str = "D") -> EstimateReport:
    """``xi^B_port / (xi^B_port + xi^C_port)``: the full complex weak value of path B."""
    _same_arm_pair(xi_b, xi_c)
    port = check_port(port)
    shifts = [xi_b, xi_c]
    cov = _joint_cov(shifts)
    b, c = xi_b[port], xi_c[port]
    vr, vi = _propagate(_grads(shifts, {("B", port): 1, ("C", port): 1}), cov)
    _check_denominator(b + c, vr, vi, f"xi^B_{port} + xi^C_{port}")
    vr, vi = _propagate(_grads(shifts, _ratio_partials(("B", port), ("C", port), b, c)), cov)
    return _report(b / (b + c), vr, vi, "complex_wv", 2 * xi_b.n_total, xi_b.g, xi_b.seed, port=port)


def complex_wv_via_bayes(xi_b: ArmShifts, xi_c: ArmShifts) -> complex:
    """``eta^B P(B) / (eta^B P(B) + eta^C P(C))`` evaluated without error checks."""
    etas, priors = [], []
    for xi in (xi_b, xi_c):
        total = xi["D"] + xi["D'"]
        etas.append(xi["D"] / total)
        priors.append(total / (xi.g * xi.n_total))
    num = etas[0] * priors[0]
    return num / (num + etas[1] * priors[1])


def prior_from_shifts(xi: ArmShifts, g: Optional[float] = None, n_total: Optional[int] = None) -> EstimateReport:
    """``P(X) = (xi_D + xi_D') / (g N)``."""
    g = xi.g if g is None else float(g)
    n_total = xi.n_total if n_total is None else int(n_total)
    if g == 0:
        raise ZeroCoupling("g = 0: the prior cannot be read off vanishing shifts")
    if n_total < 1:
        raise InsufficientSamples("n_total must be at least 1")
    scale = 1.0 / (g * n_total)
    vr, vi = _propagate(_grads([xi], {(xi.arm, "D"): scale, (xi.arm, "D'"): scale}), _joint_cov([xi]))
    return _report((xi["D"] + xi["D'"]) * scale, vr, vi, "prior", n_total, g, xi.seed, arm=xi.arm)


def tomography(xi_b: ArmShifts, xi_c: ArmShifts, port: str = "D") -> EstimateReport:
    """Estimate ``gamma/beta``.

    At D the ratio is ``xi^C_D / xi^B_D``; at D' the weak values are
    ``beta/(beta-gamma)`` and ``-gamma/(beta-gamma)``, giving ``-xi^C_D' / xi^B_D'``.
    """
    _same_arm_pair(xi_b, xi_c)
    port = check_port(port)
    shifts = [xi_b, xi_c]
    cov = _joint_cov(shifts)
    b, c = xi_b[port], xi_c[port]
    vr, vi = _propagate(_grads(shifts, {("B", port): 1}), cov)
    _check_denominator(b, vr, vi, f"xi^B_{port}")
    sign = 1.0 if port == "D" else -1.0
    partials = {("C", port): sign / b, ("B", port): -sign * c / b**2}
    vr, vi = _propagate(_grads(shifts, partials), cov)
    return _report(sign * c / b, vr, vi, "tomography", 2 * xi_b.n_total, xi_b.g, xi_b.seed, port=port)


def combined_tomography(xi_b: ArmShifts, xi_c: ArmShifts) -> EstimateReport:
    """Inverse-variance average of the D and D' ratio estimates that are usable."""
    parts = []
    for port in PORTS:
        try:
            parts.append(tomography(xi_b, xi_c, port))
        except DegenerateDenominator:
            continue
    if not parts:
        raise DegenerateDenominator("both ports give degenerate tomography ratios")
    var = np.array([r.std_error**2 for r in parts])
    # noise-free inputs (analytic shifts) get equal weights
    w = (var == 0).astype(float) if np.any(var == 0) else 1.0 / var
    w /= w.sum()
    point = complex(sum(wi * r.point for wi, r in zip(w, parts)))
    # the two ports are nearly independent; ignore their small correlation
    vr = float(sum(wi * wi * r.se_re**2 for wi, r in zip(w, parts)))
    vi = float(sum(wi * wi * r.se_im**2 for wi, r in zip(w, parts)))
    return _report(point, vr, vi, "tomography_combined", 2 * xi_b.n_total, xi_b.g, xi_b.seed)


def state_from_ratio(ratio: complex) -> MziState:
    """Normalized ``(beta, gamma)`` with ``beta`` real and non-negative."""
    ratio = complex(ratio)
    beta = 1.0 / math.sqrt(1.0 + abs(ratio) ** 2)
    return MziState(beta, ratio * beta)


def fidelity(a: MziState, b: MziState) -> float:
    return abs(a.beta.conjugate() * b.beta + a.gamma.conjugate() * b.gamma) ** 2


@dataclass(frozen=True)
class ConsistencyResult:
    residual: float
    std_error: float
    k: float
    passed: bool
    ratio_d: complex
    ratio_dp: complex


def consistency_check(xi_b: ArmShifts, xi_c: ArmShifts, k: float = 3.0) -> ConsistencyResult:
    """``|xi^B_D/xi^C_D + xi^B_D'/xi^C_D'|`` against ``k`` propagated standard errors."""
    _same_arm_pair(xi_b, xi_c)
    shifts = [xi_b, xi_c]
    cov = _joint_cov(shifts)
    for port in PORTS:
        vr, vi = _propagate(_grads(shifts, {("C", port): 1}), cov)
        _check_denominator(xi_c[port], vr, vi, f"xi^C_{port}")
    partials = {}
    ratios = {}
    for port in PORTS:
        b, c = xi_b[port], xi_c[port]
        ratios[port] = b / c
        partials["B", port] = 1 / c
        partials["C", port] = -b / c**2
    r = ratios["D"] + ratios["D'"]
    vr, vi = _propagate(_grads(shifts, partials), cov)
    se = math.sqrt(vr + vi)
    return ConsistencyResult(abs(r), se, k, abs(r) <= k * se, ratios["D"], ratios["D'"])


@dataclass(frozen=True)
class InequalityResult:
    lhs: float
    rhs: float
    std_error: float
    passed: bool


def uncertainty_inequality_check(
    acc_mom: ShiftAccumulator,
    g: Optional[float] = None,
    probe: Optional[GaussianProbe] = None,
    state: Optional[MziState] = None,
    port: str = "D",
    normalize_by: str = "N",
    k: float = 3.0,
) -> InequalityResult:
    """``P^X_port / (2 g Var(p) N) <= dX * d(port)``.

    ``normalize_by='N'`` divides by all photons as displayed in the inequality;
    ``'N_port'`` divides by the photons detected at the port instead, which
    estimates ``Im wv`` itself and is compared with ``dX dD / P(port)``.
    """
    if acc_mom.mode != "momentum":
        raise MismatchedRuns("this check needs a momentum-mode accumulator")
    g = acc_mom.g if g is None else float(g)
    probe = acc_mom.config.probe if probe is None else probe
    state = acc_mom.config.state if state is None else state
    port = check_port(port)
    if g == 0:
        raise ZeroCoupling("g = 0: the momentum shift carries no information")
    s = acc_mom.ports[port]
    n_all = acc_mom.n_total
    denom_n = n_all if normalize_by == "N" else s.n
    if denom_n < 1:
        raise InsufficientSamples(f"no photons at port {port}")
    scale = 1.0 / (2 * g * probe.var_p * denom_n)
    lhs = s.p_sum * scale
    i = PORTS.index(port)
    se = math.sqrt(_observable_cov(acc_mom, scale)[i, i])
    psi = state.ket()
    rhs = projector_spread(arm_projector(acc_mom.glass_arm), psi) * projector_spread(port_projector(port), psi)
    if normalize_by != "N":
        rhs /= port_projector(port).expectation(psi)
    return InequalityResult(lhs, rhs, se, abs(lhs) <= rhs + k * se)
