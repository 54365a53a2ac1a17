"""Weighted London field, pinning landscape, and the vortex attractor set.

Solves the radial boundary-value problem

    -(r h' / u^2)' / r + h = 0,   h'(0) = 0,  h(1) = 1,

in conservative (flux) form, so the physically continuous quantity
h'/u^2 stays single-valued across the interface where u' jumps.  From the
solution the module derives the landscape xi = (h - 1)/u^2, its depth
lambda = max|xi|, the critical-field constant k = 1/(2 lambda), and the
argmax set (a circle for small pinning levels, the center for a > 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError, NotApplicableError, PostconditionError, SolverError
from .model import RadialGrid
from .profile1d import EnergyScalar, RadialProfile

__all__ = [
    "CenterPoint",
    "Circle",
    "LondonSolution",
    "GapReport",
    "solve_london",
    "pinning_landscape",
    "locate_attractor",
    "j0_energy",
    "landscape_gap",
    "gap_margin_at",
    "flux_continuity_gap",
]

_GRAD_SLACK = 1e-8  # discretization allowance on the |h'/u^2| <= 1 bound


@dataclass(frozen=True)
class CenterPoint:
    """Attractor at the disc center."""


@dataclass(frozen=True)
class Circle:
    """Attractor circle of radius ``radius``."""

    radius: float


@dataclass(frozen=True)
class LondonSolution:
    """Solved London field with its derived landscape quantities.

    ``flux`` holds the single-valued link values of h'/u^2 (one per grid
    interval); ``xi`` the nodal landscape; ``attractor`` the classified
    argmax set of |xi|.
    """

    grid: RadialGrid
    u: RadialProfile
    h: np.ndarray
    flux: np.ndarray
    xi: np.ndarray
    lambda_eps: float
    k_eps: float
    attractor: CenterPoint | Circle

    def __post_init__(self):
        self.h.setflags(write=False)
        self.xi.setflags(write=False)
        self.flux.setflags(write=False)


def _london_system(u: RadialProfile):
    grid = u.grid
    r, h_sp = grid.nodes, grid.spacings
    rm = 0.5 * (r[:-1] + r[1:])
    u_mid = 0.5 * (u.values[:-1] + u.values[1:])
    cond = rm / (h_sp * u_mid**2)
    r_half = np.concatenate(([0.0], rm, [1.0]))
    vol = 0.5 * (r_half[1:] ** 2 - r_half[:-1] ** 2)
    return cond, vol


def solve_london(u: RadialProfile) -> LondonSolution:
    """Solve the weighted London equation with coefficient profile u.

    Conservative finite volumes with harmonic link placement of the
    coefficient; natural no-flux condition at the center; Dirichlet
    h(1) = 1.  The solved field is verified against the maximum-principle
    bounds 0 < h < 1, radial monotonicity, and the gradient bound
    |h'/u^2| <= 1 before the landscape is derived.

    Raises
    ------
    SolverError
        If the linear solve leaves a residual above 1e-10.
    PostconditionError
        If any verified bound fails (never silently clipped).
    """
    grid = u.grid
    n = grid.n
    cond, vol = _london_system(u)
    band = np.zeros((3, n))
    rhs = np.zeros(n)
    band[0, 1:] = -cond
    band[2, :-1] = -cond
    diag = np.zeros(n)
    diag[:-1] += cond
    diag[1:] += cond
    diag += vol
    band[1, :] = diag
    # Dirichlet boundary row (band[2, -2] is A[n-1, n-2]; the superdiagonal
    # entry band[0, -1] belongs to the interior row above and must stay)
    band[1, -1] = 1.0
    band[2, -2] = 0.0
    rhs[-1] = 1.0

    def residual(h):
        flux_links = cond * np.diff(h)  # r_{i+1/2} * (h'/u^2) at links
        res = np.zeros(n)
        res[:-1] -= flux_links
        res[1:] += flux_links
        res += vol * h
        res[-1] = h[-1] - 1.0
        # max-norm residual relative to the assembled equation scale
        scale = max(1.0, float(np.max(np.abs(flux_links))), float(np.max(vol * np.abs(h))))
        return res, float(np.max(np.abs(res))) / scale

    h = solve_banded((1, 1), band, rhs)
    # stiff coefficient ratio (1/u^2 vs volumes) benefits from refinement
    for _ in range(3):
        res, max_res = residual(h)
        if max_res <= 1e-13:
            break
        h = h - solve_banded((1, 1), band, res)
    _, max_res = residual(h)
    if max_res > 1e-10:
        raise SolverError(f"London solve residual {max_res:.3e} exceeds 1e-10")

    if h[-1] != 1.0 and abs(h[-1] - 1.0) > 1e-14:
        raise PostconditionError("boundary value h(1) != 1")
    if np.any(h[:-1] <= 0.0) or np.any(h[:-1] >= 1.0):
        raise PostconditionError(f"London field leaves (0, 1): range [{h.min()}, {h.max()}]")
    if np.any(np.diff(h) < -1e-14):
        raise PostconditionError("London field is not nondecreasing")
    rm = 0.5 * (grid.nodes[:-1] + grid.nodes[1:])
    q = cond * np.diff(h) / rm  # h'/u^2 per link
    if np.max(np.abs(q)) > 1.0 + _GRAD_SLACK:
        raise PostconditionError(f"gradient bound violated: max |h'/u^2| = {np.max(np.abs(q))}")

    xi = (h - 1.0) / u.values**2
    lam = float(np.max(np.abs(xi)))
    if lam <= 0.0:
        raise PostconditionError("landscape is identically zero")
    k = 1.0 / (2.0 * lam)
    sol = LondonSolution(
        grid=grid, u=u, h=h, flux=q, xi=xi, lambda_eps=lam, k_eps=k,
        attractor=CenterPoint(),
    )
    object.__setattr__(sol, "attractor", locate_attractor(sol))
    return sol


def pinning_landscape(sol: LondonSolution) -> tuple[np.ndarray, float, float]:
    """Landscape xi = (h-1)/u^2 with its depth and the field constant.

    Returns (xi, lambda_eps, k_eps) where lambda_eps = max|xi| and
    k_eps = 1/(2 lambda_eps).
    """
    return sol.xi, sol.lambda_eps, sol.k_eps


def locate_attractor(sol: LondonSolution) -> CenterPoint | Circle:
    """Classify the argmax set of |xi|.

    Ties within 1e-12 of the maximum resolve to the smallest radius; an
    argmax within one grid cell of the center classifies as the center
    point, anything else as a circle whose radius is refined by a 3-point
    parabola through the neighbouring nodes.
    """
    mag = np.abs(sol.xi)
    top = float(np.max(mag))
    candidates = np.nonzero(mag >= top - 1e-12)[0]
    j = int(candidates[np.argmin(sol.grid.nodes[candidates])])
    r = sol.grid.nodes
    if j == 0 or r[j] <= r[1] + 1e-15:
        return CenterPoint()
    if 0 < j < r.size - 1:
        coeffs = np.polyfit(r[j - 1: j + 2], mag[j - 1: j + 2], 2)
        if coeffs[0] < 0.0:
            vertex = -0.5 * coeffs[1] / coeffs[0]
            if r[j - 1] <= vertex <= r[j + 1]:
                return Circle(radius=float(vertex))
    return Circle(radius=float(r[j]))


def j0_energy(sol: LondonSolution) -> EnergyScalar:
    """Meissner response energy 2 pi int ((h')^2/u^2 + (h-1)^2) r dr.

    Quadrature matches the 2-D mesh energy of the Meissner configuration
    (link form for the gradient, r-weighted trapezoid for the nodal term).
    """
    grid = sol.grid
    cond, _ = _london_system(sol.u)
    kinetic = float(np.sum(cond * np.diff(sol.h) ** 2))
    tw = grid.trapezoid_weights()
    nodal = float(np.sum(tw * (sol.h - 1.0) ** 2))
    total = 2.0 * np.pi * (kinetic + nodal)
    if total <= 0.0:
        raise PostconditionError("Meissner response energy must be positive")
    return EnergyScalar(value=total)


@dataclass(frozen=True)
class GapReport:
    """Landscape gap g = xi + lambda with its margin away from the interface.

    ``margin`` is the minimum of g over the nodes with |r - R| at least
    ``threshold`` = |ln eps|^(-1/4); positive by contract.  At desk-scale
    eps that band can swallow the whole disc, in which case the contract
    is vacuous (``vacuous`` is set and the margin is +inf).
    """

    g: np.ndarray
    threshold: float
    margin: float
    vacuous: bool


def landscape_gap(sol: LondonSolution) -> GapReport:
    """Gap of the landscape above its minimum, away from the interface.

    Raises
    ------
    NotApplicableError
        If the attractor is the center point (a > 1 regime).
    PostconditionError
        If the gap fails to be positive outside the interface band.
    """
    if isinstance(sol.attractor, CenterPoint):
        raise NotApplicableError("landscape gap is defined for the circle-attractor regime only")
    if sol.u.model is None:
        raise ConfigurationError("landscape gap needs the pinning model (for eps and R)")
    model = sol.u.model
    g = sol.xi + sol.lambda_eps
    if np.min(g) < -1e-12:
        raise PostconditionError("xi + lambda dips below zero")
    threshold = model.abs_log_eps ** (-0.25)
    mask = np.abs(sol.grid.nodes - model.R) >= threshold
    if not np.any(mask):
        return GapReport(g=g, threshold=threshold, margin=float("inf"), vacuous=True)
    margin = float(np.min(g[mask]))
    if margin <= 0.0:
        raise PostconditionError(f"landscape gap margin {margin} is not positive")
    return GapReport(g=g, threshold=threshold, margin=margin, vacuous=False)


def gap_margin_at(sol: LondonSolution, distance: float) -> float:
    """Minimum of xi + lambda over the nodes with |r - R| >= distance.

    Fixed-distance variant of the contract margin, usable for trend
    sweeps at desk-scale eps where the contract band is empty.
    """
    if sol.u.model is None:
        raise ConfigurationError("gap margin needs the pinning model")
    g = sol.xi + sol.lambda_eps
    mask = np.abs(sol.grid.nodes - sol.u.model.R) >= distance
    if not np.any(mask):
        raise ConfigurationError(f"no nodes at distance {distance} from the interface")
    return float(np.min(g[mask]))


def flux_continuity_gap(sol: LondonSolution) -> float:
    """Conservation defect of the flux r h'/u^2 at the interface node.

    The conservative discretization makes the link flux single-valued;
    the defect of the discrete balance (flux out - flux in - volume term)
    at r = R, normalized by the local flux scale, certifies continuity.
    """
    grid = sol.grid
    i = grid.interface_index
    rm = 0.5 * (grid.nodes[:-1] + grid.nodes[1:])
    rflux = rm * sol.flux
    _, vol = _london_system(sol.u)
    defect = rflux[i] - rflux[i - 1] - vol[i] * sol.h[i]
    scale = max(abs(rflux[i]), abs(rflux[i - 1]), 1e-30)
    return float(abs(defect) / scale)
