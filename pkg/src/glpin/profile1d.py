"""Interface profile in the stretched variable and the pinned radial minimizer.

Two 1-D problems underpin everything else:

* the canonical interface equation on the line,
  ``-U'' = (1 - U^2) U`` for x < 0 and ``-U'' = (a - U^2) U`` for x > 0,
  with C1 matching at 0 and limits 1 (left) and sqrt(a) (right);
* the zero-field radial minimizer u_eps of the pinned energy on the disc,
  ``-u'' - u'/r = (p(r) - u^2) u / eps^2`` with Neumann ends.

The canonical solution is built from the two one-parameter families of
heteroclinic tails.  Each tail lies on the zero-energy level set of its
phase plane (first integral ``U'^2/2 = (U^2 - L)^2 / 4`` with L the limit
value), so prescribing the junction value w forces both one-sided slopes,
and the C1 matching condition collapses to a scalar root-find in w.  The
printed closed forms for the profile constants fail their own sign table
on desk evaluation, so they are only audited here, never used.

The radial minimizer is solved by damped Newton on the conservative
finite-volume system whose discrete energy coincides with the radial
restriction of the 2-D mesh energy in :mod:`glpin.gl2d`; that shared
discretization is what makes the 2-D energy-splitting identity hold to
machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .errors import (
    ConfigurationError,
    DegenerateModelError,
    DomainError,
    PostconditionError,
    SolverError,
)
from .model import PinningModel, RadialGrid

__all__ = [
    "CanonicalProfile",
    "ClosedFormAudit",
    "RadialProfile",
    "EnergyScalar",
    "solve_canonical_profile",
    "degennes_gamma",
    "solve_radial_minimizer",
    "energy_c0",
    "interface_decay_rate",
    "interface_derivative",
    "robin_gap",
]

_BOUND_SLACK = 1e-12  # roundoff allowance on strict pointwise bounds

SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class EnergyScalar:
    """A single energy value in the units of the disc functional."""

    value: float

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise PostconditionError(f"energy is not finite: {self.value}")


@dataclass(frozen=True)
class ClosedFormAudit:
    """Verbatim evaluation of the printed profile formulas vs the solver.

    ``matched`` is True only if the printed constants reproduce the
    matched heteroclinic pointwise to 1e-6.  Otherwise the deviations are
    reported here; they are never silently accepted.
    """

    matched: bool
    max_deviation: float
    printed_alpha: float
    printed_beta1: float
    printed_beta2: float
    printed_gamma: float
    c1_mismatch: float
    note: str


@dataclass(frozen=True)
class CanonicalProfile:
    """Matched interface solution U with its tail constants.

    beta1 and beta2 are the Möbius coefficients of the computed left and
    right tails; alpha is the constant linking them through
    ``beta2 = -alpha^2 * beta1``.  gamma is the effective boundary
    coefficient -U'(0)/U(0) (positive for a < 1, negative for a > 1).
    """

    a: float
    beta1: float
    beta2: float
    alpha: float
    gamma: float
    u0: float
    du0: float
    residual: float
    evaluator: Callable[[np.ndarray], np.ndarray]
    audit: ClosedFormAudit

    def __call__(self, x):
        return self.evaluator(x)


def _tail_coefficients(a: float, u0: float) -> tuple[float, float]:
    v0 = u0 / np.sqrt(a)
    c1 = (1.0 - u0) / (1.0 + u0)
    c2 = (v0 - 1.0) / (v0 + 1.0)
    return c1, c2


def _make_evaluator(a: float, u0: float) -> Callable[[np.ndarray], np.ndarray]:
    sa = float(np.sqrt(a))
    rate_r = float(np.sqrt(2.0 * a))
    c1, c2 = _tail_coefficients(a, u0)

    def U(x):
        x = np.asarray(x, dtype=float)
        left = np.exp(SQRT2 * np.minimum(x, 0.0))
        right = np.exp(-rate_r * np.maximum(x, 0.0))
        u_left = (1.0 - c1 * left) / (1.0 + c1 * left)
        u_right = sa * (1.0 + c2 * right) / (1.0 - c2 * right)
        out = np.where(x <= 0.0, u_left, u_right)
        return float(out) if out.ndim == 0 else out

    return U


def _printed_forms(a: float) -> tuple[float, float, float, float, Callable]:
    # verbatim transcription of the published constants, audited only
    sa = np.sqrt(a)
    alpha = (1.0 + sa - np.sqrt(2.0 * (1.0 + a))) / (1.0 - sa)
    beta1 = alpha * (1.0 + alpha * sa) / (alpha - sa)
    beta2 = -(alpha**2) * beta1
    gamma = alpha * (a * alpha**3 + sa * alpha**2 + a * alpha + sa) / (
        alpha**3 + (4.0 - sa) * alpha**2 - 3.0 * sa * alpha + a
    )

    def U_printed(x):
        x = np.asarray(x, dtype=float)
        left = beta1 * np.exp(-SQRT2 * np.minimum(x, 0.0))
        right = beta2 * np.exp(np.sqrt(2.0 / a) * np.maximum(x, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            u_left = (left - 1.0) / (left + 1.0)
            u_right = sa * (right - 1.0) / (right + 1.0)
        return np.where(x <= 0.0, u_left, u_right)

    return alpha, beta1, beta2, gamma, U_printed


def solve_canonical_profile(a: float) -> CanonicalProfile:
    """Solve the canonical interface equation for pinning level a.

    Two-sided construction on the heteroclinic tail families: the left
    tail satisfies U' = (U^2 - 1)/sqrt(2), the right tail
    U' = -(U^2 - a)/sqrt(2); C1 matching at the junction reduces to the
    scalar equation (w^2 - 1) + (w^2 - a) = 0 solved by bracketed
    root-finding between the two limit values.

    Returns
    -------
    CanonicalProfile
        Matched solution with evaluator, tail constants, gamma, the
        matching residual, and the closed-form audit report.

    Raises
    ------
    DegenerateModelError
        If a = 1 (the unique bounded solution is the constant 1).
    SolverError
        If the bracketed matching solve fails to converge.
    """
    if not a > 0.0:
        raise DomainError(f"pinning level a must be positive, got {a}")
    if a == 1.0:
        raise DegenerateModelError("a = 1: the interface equation only has the flat solution")
    lo, hi = min(1.0, np.sqrt(a)), max(1.0, np.sqrt(a))

    def mismatch(w):
        # U'(0-) - U'(0+) up to the 1/sqrt(2) factor
        return (w * w - 1.0) + (w * w - a)

    try:
        u0 = brentq(mismatch, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    except (ValueError, RuntimeError) as exc:  # pragma: no cover - bracket is sign-definite
        raise SolverError(f"canonical matching solve failed for a={a}: {exc}") from exc
    residual = abs(mismatch(u0)) / SQRT2
    if residual > 1e-10:
        raise SolverError(f"canonical matching residual {residual:.3e} exceeds 1e-10 for a={a}")
    du0 = (u0 * u0 - 1.0) / SQRT2
    gamma = -du0 / u0
    c1, c2 = _tail_coefficients(a, u0)
    beta1 = 1.0 / c1
    beta2 = -1.0 / c2
    alpha = float(np.sqrt(-beta2 / beta1)) if beta2 / beta1 < 0 else float("nan")
    evaluator = _make_evaluator(a, u0)

    p_alpha, p_beta1, p_beta2, p_gamma, U_printed = _printed_forms(a)
    xs = np.linspace(-12.0, 12.0, 4001)
    with np.errstate(all="ignore"):
        dev = np.nanmax(np.abs(U_printed(xs) - evaluator(xs)))
        eps_fd = 1e-6
        c1_gap = abs(
            (U_printed(np.array(0.0)) - U_printed(np.array(-eps_fd))) / eps_fd
            - (U_printed(np.array(eps_fd)) - U_printed(np.array(0.0))) / eps_fd
        )
    dev = float(dev) if np.isfinite(dev) else float("inf")
    matched = dev <= 1e-6
    note = "printed constants reproduce the matched tails" if matched else (
        "printed constants disagree with the matched heteroclinic; "
        "solver output is authoritative"
    )
    audit = ClosedFormAudit(
        matched=matched,
        max_deviation=dev,
        printed_alpha=float(p_alpha),
        printed_beta1=float(p_beta1),
        printed_beta2=float(p_beta2),
        printed_gamma=float(p_gamma),
        c1_mismatch=float(c1_gap),
        note=note,
    )
    return CanonicalProfile(
        a=float(a),
        beta1=float(beta1),
        beta2=float(beta2),
        alpha=alpha,
        gamma=float(gamma),
        u0=float(u0),
        du0=float(du0),
        residual=float(residual),
        evaluator=evaluator,
        audit=audit,
    )


def degennes_gamma(profile: CanonicalProfile) -> float:
    """Effective interface boundary coefficient -U'(0)/U(0)."""
    if profile.u0 <= 0.0:
        raise DomainError("invalid canonical profile")
    return -profile.du0 / profile.u0


@dataclass(frozen=True)
class RadialProfile:
    """Radial density samples on a grid, pinned between the two phases.

    ``model`` may be None only for synthetic coefficient overrides built
    through :meth:`from_values` (e.g. the constant-coefficient Bessel
    oracle); those skip the physical bound checks.
    """

    grid: RadialGrid
    values: np.ndarray
    model: PinningModel | None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.grid.n,):
            raise ConfigurationError("profile values do not match the grid")
        if np.any(values <= 0.0):
            raise PostconditionError("radial profile must be strictly positive")
        if self.model is not None:
            _check_profile_bounds(self.model, values)
        values.setflags(write=False)

    @classmethod
    def from_values(cls, grid: RadialGrid, values: np.ndarray) -> "RadialProfile":
        """Wrap raw positive samples without a pinning model (oracle use)."""
        return cls(grid=grid, values=np.asarray(values, dtype=float), model=None)


def _check_profile_bounds(model: PinningModel, u: np.ndarray) -> None:
    lo, hi = model.u_min, model.u_max
    if np.any(u < lo - _BOUND_SLACK) or np.any(u > hi + _BOUND_SLACK):
        raise PostconditionError(
            f"radial profile leaves ({lo}, {hi}): range [{u.min()}, {u.max()}]"
        )
    du = np.diff(u)
    if model.a < 1.0:
        if np.any(du > _BOUND_SLACK):
            raise PostconditionError("radial profile must be nonincreasing for a < 1")
    else:
        if np.any(du < -_BOUND_SLACK):
            raise PostconditionError("radial profile must be nondecreasing for a > 1")


def _fv_coefficients(grid: RadialGrid, a: float):
    r = grid.nodes
    h = grid.spacings
    kin = 0.5 * (r[:-1] + r[1:]) / h  # link conductances r_{i+1/2}/h_i
    w_in, w_out = grid.interface_split_weights()
    # side-split step term: w p = w_in * 1 + w_out * a exactly at the jump
    wp = w_in + a * w_out
    w = w_in + w_out
    return kin, w, wp


def _residual(u, kin, w, wp, eps):
    flux = kin * np.diff(u)
    F = np.zeros_like(u)
    F[:-1] -= flux
    F[1:] += flux
    F -= (wp - w * u * u) * u / eps**2
    return F


def solve_radial_minimizer(model: PinningModel, grid: RadialGrid) -> RadialProfile:
    """Pinned radial minimizer of the zero-field energy on the given grid.

    Damped Newton on the conservative finite-volume system

        k_{i-1}(u_i - u_{i-1}) - k_i(u_{i+1} - u_i)
            = w_i (p_i - u_i^2) u_i / eps^2,

    with k the r_{i+1/2}/h_i link conductances and w the r-weighted
    trapezoid masses (natural Neumann ends, flux continuity across R).
    Initialized from the canonical profile in the stretched variable,
    clamped strictly inside the two-phase bounds.

    Raises
    ------
    ConfigurationError
        If the grid does not resolve the epsilon-layer.
    SolverError
        On Newton divergence (the residual history is reported).
    PostconditionError
        If the converged solution violates bounds or monotonicity.
    """
    if grid.interface != model.R:
        raise ConfigurationError("grid interface differs from the model interface radius")
    eps = model.epsilon
    iR = grid.interface_index
    near = grid.spacings[max(iR - 1, 0): iR + 1]
    if near.size == 0 or np.max(near) > 0.5 * eps:
        raise ConfigurationError("grid spacing next to the interface exceeds eps/2")

    r = grid.nodes
    kin, w, wp = _fv_coefficients(grid, model.a)
    canon = solve_canonical_profile(model.a)
    lo, hi = model.u_min + 1e-6, model.u_max - 1e-6
    u = np.clip(canon((r - model.R) / eps), lo, hi)

    interior = w > 0.0

    def scaled_residual(F):
        # BVP residual in equation units, scaled by eps^2 per contract
        return eps**2 * float(np.max(np.abs(F[interior]) / w[interior]))

    F = _residual(u, kin, w, wp, eps)
    n = grid.n
    band = np.zeros((3, n))
    for _ in range(60):
        scaled = scaled_residual(F)
        if scaled <= 1e-12:
            break
        band[:] = 0.0
        band[0, 1:] = -kin  # superdiagonal
        band[2, :-1] = -kin  # subdiagonal
        diag = np.zeros(n)
        diag[:-1] += kin
        diag[1:] += kin
        diag -= (wp - 3.0 * w * u * u) / eps**2
        band[1, :] = diag
        step = solve_banded((1, 1), band, -F)
        norm = float(np.max(np.abs(F)))
        t = 1.0
        for _ in range(30):
            trial = u + t * step
            F_trial = _residual(trial, kin, w, wp, eps)
            if np.max(np.abs(F_trial)) < norm:
                break
            t *= 0.5
        else:
            # damping cannot reduce further: accept only at the roundoff floor
            if scaled <= 1e-9:
                break
            raise SolverError(
                f"Newton stalled: scaled residual {scaled:.3e} not reduced by damping"
            )
        u, F = trial, F_trial

    scaled = scaled_residual(F)
    if scaled > 1e-8:
        raise SolverError(f"converged residual {scaled:.3e} exceeds the 1e-8 contract")
    _check_profile_bounds(model, u)
    return RadialProfile(grid=grid, values=u, model=model)


def energy_c0(u: RadialProfile) -> EnergyScalar:
    """Zero-field energy 2 pi int (u'^2 + (p - u^2)^2 / 2 eps^2) r dr.

    Uses the same link/node quadrature as the solver (and as the 2-D mesh
    energy), so the value is exactly the 2-D energy of the radial lift.
    """
    if u.model is None:
        raise ConfigurationError("energy requires a profile with a pinning model")
    grid, model = u.grid, u.model
    kin, _, _ = _fv_coefficients(grid, model.a)
    w_in, w_out = grid.interface_split_weights()
    kinetic = float(np.sum(kin * np.diff(u.values) ** 2))
    sq = u.values**2
    potential = float(np.sum(w_in * (1.0 - sq) ** 2 + w_out * (model.a - sq) ** 2))
    potential /= 2.0 * model.epsilon**2
    total = 2.0 * np.pi * (kinetic + potential)
    if total < 0.0:
        raise PostconditionError("zero-field energy must be nonnegative")
    return EnergyScalar(value=total)


def interface_decay_rate(u: RadialProfile, side: str = "inner") -> float:
    """Fitted exponential decay rate of the interface deviation.

    Log-linear fit of |1 - u| over R - 10 eps <= r <= R - 3 eps (inner
    side) or of |sqrt(a) - u| over the mirrored outer window, against the
    stretched distance |r - R| / eps.  Returns the positive rate.
    """
    if u.model is None:
        raise ConfigurationError("decay fit requires a profile with a pinning model")
    model = u.model
    R, eps = model.R, model.epsilon
    r = u.grid.nodes
    if side == "inner":
        mask = (r >= R - 10.0 * eps) & (r <= R - 3.0 * eps)
        dev = np.abs(1.0 - u.values[mask])
    elif side == "outer":
        mask = (r >= R + 3.0 * eps) & (r <= R + 10.0 * eps)
        dev = np.abs(model.sqrt_a - u.values[mask])
    else:
        raise DomainError(f"side must be 'inner' or 'outer', got {side!r}")
    x = np.abs(r[mask] - R) / eps
    good = dev > 1e-290
    if np.count_nonzero(good) < 3:
        raise ConfigurationError("decay-fit window holds fewer than 3 usable nodes (eps too large?)")
    slope = np.polyfit(x[good], np.log(dev[good]), 1)[0]
    rate = -float(slope)
    if rate <= 0.0:
        raise PostconditionError(f"fitted decay rate is not positive: {rate}")
    return rate


def interface_derivative(u: RadialProfile, side: str = "inner") -> float:
    """One-sided 3-point derivative of u at the interface radius."""
    i = u.grid.interface_index
    r, vals = u.grid.nodes, u.values
    if side == "inner":
        idx = [i - 2, i - 1, i]
    elif side == "outer":
        idx = [i, i + 1, i + 2]
    else:
        raise DomainError(f"side must be 'inner' or 'outer', got {side!r}")
    if idx[0] < 0 or idx[-1] >= r.size:
        raise ConfigurationError("not enough nodes for a one-sided interface derivative")
    x0, x1, x2 = r[idx]
    t = r[i]
    # Lagrange derivative weights at t
    w0 = (2 * t - x1 - x2) / ((x0 - x1) * (x0 - x2))
    w1 = (2 * t - x0 - x2) / ((x1 - x0) * (x1 - x2))
    w2 = (2 * t - x0 - x1) / ((x2 - x0) * (x2 - x1))
    return float(w0 * vals[idx[0]] + w1 * vals[idx[1]] + w2 * vals[idx[2]])


def robin_gap(u: RadialProfile, gamma: float) -> float:
    """Defect eps u'(R)/u(R) + gamma of the effective boundary condition."""
    i = u.grid.interface_index
    if u.model is None:
        raise ConfigurationError("robin gap requires a profile with a pinning model")
    du = interface_derivative(u, side="inner")
    return float(u.model.epsilon * du / u.values[i] + gamma)
