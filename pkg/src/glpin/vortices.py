"""Vortex detection, winding degrees, field sweeps, and the interface defect.

Vortices are located as connected components of the low-density set
{|phi| < threshold} of the normalized order parameter phi = psi / u,
enclosed in disjoint balls, and assigned the integer winding of the phase
on the ball boundary.  Balls reaching the outer boundary carry degree 0
by convention.  On top of the detection sit the degree statistics, the
first-critical-field bracketing sweep, and the effective Robin boundary
defect on the interface circle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import gl2d
from .errors import (
    ConfigurationError,
    NotApplicableError,
    SweepRangeError,
    UndefinedDegreeError,
)
from .gl2d import Field2D, Gauge2D, MinimizeOptions
from .london import Circle, LondonSolution, solve_london
from .model import DiscMesh, PinningModel, graded_radial_grid
from .profile1d import RadialProfile, solve_radial_minimizer

__all__ = [
    "VortexBall",
    "DegreeStats",
    "CriticalFieldEstimate",
    "SweepPoint",
    "winding_degree",
    "detect_vortices",
    "degree_statistics",
    "normalized_field",
    "critical_field_sweep",
    "robin_residual",
    "attractor_seed_points",
]


@dataclass(frozen=True)
class VortexBall:
    """One vortex ball: center, radius and the winding degree on its rim."""

    center: tuple[float, float]
    radius: float
    degree: int
    touches_boundary: bool = False

    @property
    def center_radius(self) -> float:
        return float(np.hypot(*self.center))


@dataclass(frozen=True)
class DegreeStats:
    """Totals of the ball degrees, split by sign and interface proximity."""

    d_plus: int
    d_minus: int
    d_total: int
    d_near_interface: int


def normalized_field(psi: Field2D, u: RadialProfile) -> Field2D:
    """phi = psi / u, the density-normalized order parameter."""
    if psi.mesh.rgrid is not u.grid:
        raise ConfigurationError("profile grid differs from the field mesh")
    return Field2D(mesh=psi.mesh, psi=psi.psi / u.values[:, None])


def _interp_complex(field: Field2D, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of the complex field at Cartesian points."""
    mesh = field.mesh
    r = np.hypot(x, y)
    th = np.mod(np.arctan2(y, x), 2.0 * np.pi)
    nodes = mesh.r
    i1 = np.clip(np.searchsorted(nodes, r), 1, mesh.n_r - 1)
    i0 = i1 - 1
    tr = (r - nodes[i0]) / (nodes[i1] - nodes[i0])
    tr = np.clip(tr, 0.0, 1.0)
    jt = th / mesh.dtheta
    j0 = np.floor(jt).astype(int) % mesh.n_theta
    j1 = (j0 + 1) % mesh.n_theta
    tt = jt - np.floor(jt)
    P = field.psi
    return (
        P[i0, j0] * (1 - tr) * (1 - tt)
        + P[i1, j0] * tr * (1 - tt)
        + P[i0, j1] * (1 - tr) * tt
        + P[i1, j1] * tr * tt
    )


def winding_degree(phi: Field2D, center: tuple[float, float], radius: float,
                   samples: int = 64) -> int:
    """Winding number of phi/|phi| on the circle (center, radius).

    Sum of principal-branch phase increments over >= 64 interpolated
    samples, rounded to the nearest integer.

    Raises
    ------
    UndefinedDegreeError
        If |phi| nearly vanishes on the circle or the phase sum is not
        close to an integer (rounding residual > 0.2).
    """
    if samples < 64:
        samples = 64
    ang = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    x = center[0] + radius * np.cos(ang)
    y = center[1] + radius * np.sin(ang)
    if np.any(np.hypot(x, y) > 1.0):
        raise UndefinedDegreeError("winding circle leaves the unit disc")
    vals = _interp_complex(phi, x, y)
    if np.min(np.abs(vals)) < 1e-8:
        raise UndefinedDegreeError("order parameter nearly vanishes on the winding circle")
    ratios = np.roll(vals, -1) / vals
    total = float(np.sum(np.angle(ratios))) / (2.0 * np.pi)
    deg = int(np.rint(total))
    if abs(total - deg) > 0.2:
        raise UndefinedDegreeError(f"phase sum {total:.3f} is not integer-quantized")
    return deg


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[rj] = ri


def _low_density_components(mask: np.ndarray) -> list[np.ndarray]:
    """4-connected components of a nodal mask, periodic in theta, with the
    duplicated-center row treated as a single point."""
    labels, n = ndimage.label(mask)
    if n == 0:
        return []
    uf = _UnionFind(n + 1)
    seam = mask[:, 0] & mask[:, -1]
    for i in np.nonzero(seam)[0]:
        uf.union(labels[i, 0], labels[i, -1])
    center_labels = np.unique(labels[0, :][mask[0, :]])
    for lab in center_labels[1:]:
        uf.union(center_labels[0], lab)
    roots = {}
    comps: list[list[tuple[int, int]]] = []
    it = np.nonzero(labels)
    for i, j in zip(*it):
        r = uf.find(labels[i, j])
        if r not in roots:
            roots[r] = len(comps)
            comps.append([])
        comps[roots[r]].append((i, j))
    return [np.array(c) for c in comps]


def _merge_overlaps(balls: list[tuple[float, float, float]]) -> list[tuple[float, float, float]]:
    balls = list(balls)
    merged = True
    while merged:
        merged = False
        out = []
        while balls:
            cx, cy, rad = balls.pop()
            for k, (ox, oy, orad) in enumerate(balls):
                d = np.hypot(cx - ox, cy - oy)
                if d < rad + orad:
                    # circumscribe the pair
                    if d < 1e-14:
                        nx, ny, nr = cx, cy, max(rad, orad)
                    else:
                        nr = 0.5 * (d + rad + orad)
                        t = (nr - rad) / d
                        nx, ny = cx + t * (ox - cx), cy + t * (oy - cy)
                    balls.pop(k)
                    balls.append((nx, ny, nr))
                    merged = True
                    break
            else:
                out.append((cx, cy, rad))
        balls = out
    return balls


def detect_vortices(phi: Field2D, threshold: float = 0.5) -> list[VortexBall]:
    """Enclose the low-density set of phi in disjoint balls with degrees.

    Connected components of {|phi| < threshold} (threshold in (0,1),
    default 1/2) are wrapped in bounding circles inflated by two local
    cells; overlapping circles are merged by circumscription.  Interior
    balls carry the winding of phi/|phi| on their boundary; balls touching
    the outer boundary keep degree 0 and are flagged.
    """
    if not (0.0 < threshold < 1.0):
        raise ConfigurationError("detection threshold must lie in (0, 1)")
    mesh = phi.mesh
    mask = np.abs(phi.psi) < threshold
    comps = _low_density_components(mask)
    if not comps:
        return []
    x, y = mesh.nodes_xy()
    h_r = mesh.rgrid.spacings
    raw = []
    for comp in comps:
        ii, jj = comp[:, 0], comp[:, 1]
        px, py = x[ii, jj], y[ii, jj]
        cx, cy = float(px.mean()), float(py.mean())
        spread = float(np.max(np.hypot(px - cx, py - cy)))
        hr_loc = float(np.max(h_r[np.clip(ii, 0, h_r.size - 1)]))
        ht_loc = float(np.max(mesh.r[ii]) * mesh.dtheta)
        raw.append((cx, cy, spread + 2.0 * max(hr_loc, ht_loc)))
    balls = []
    for cx, cy, rad in _merge_overlaps(raw):
        c = (float(cx), float(cy))
        if np.hypot(cx, cy) + rad >= 1.0:
            balls.append(VortexBall(center=c, radius=float(rad), degree=0, touches_boundary=True))
            continue
        ball = None
        grow = rad
        for _ in range(3):
            try:
                deg = winding_degree(phi, c, grow)
                ball = VortexBall(center=c, radius=float(grow), degree=deg)
                break
            except UndefinedDegreeError:
                grow *= 1.5
                if np.hypot(cx, cy) + grow >= 1.0:
                    break
        if ball is None:
            ball = VortexBall(center=c, radius=float(rad), degree=0, touches_boundary=True)
        balls.append(ball)
    return balls


def degree_statistics(balls: list[VortexBall], R: float, tol: float) -> DegreeStats:
    """Signed degree totals and the near-interface count.

    ``d_near_interface`` counts |d| over balls whose center radius lies
    within ``tol`` of the interface radius R.
    """
    d_plus = sum(b.degree for b in balls if b.degree > 0)
    d_minus = sum(-b.degree for b in balls if b.degree < 0)
    near = sum(abs(b.degree) for b in balls if abs(b.center_radius - R) <= tol)
    return DegreeStats(
        d_plus=int(d_plus),
        d_minus=int(d_minus),
        d_total=int(d_plus + d_minus),
        d_near_interface=int(near),
    )


def attractor_seed_points(sol: LondonSolution, n: int, offset: float = 0.0) -> np.ndarray:
    """n equally spaced seed locations on the vortex attractor set.

    On the circle attractor the points sit at the attractor radius; for
    the center attractor they huddle on a small circle around the origin
    (one point lands exactly at the center when n = 1).
    """
    if n < 1:
        raise ConfigurationError("need at least one seed point")
    if isinstance(sol.attractor, Circle):
        rad = sol.attractor.radius
    else:
        rad = 0.0 if n == 1 else 3.0 * sol.grid.spacings[0]
    ang = offset + 2.0 * np.pi * np.arange(n) / n
    return np.column_stack((rad * np.cos(ang), rad * np.sin(ang)))


@dataclass(frozen=True)
class SweepPoint:
    H: float
    energy: float
    d_total: int
    d_plus: int
    d_near_interface: int


@dataclass(frozen=True)
class CriticalFieldEstimate:
    """Bracket of the first nucleation field from a sweep.

    ``ratio`` compares the bracket midpoint against the leading-order
    prediction k_eps |ln eps|.
    """

    H_lo: float
    H_hi: float
    k_eps_ref: float
    ratio: float
    table: tuple[SweepPoint, ...]

    def __post_init__(self):
        if not self.H_lo < self.H_hi:
            raise ConfigurationError("invalid bracket")
        if not self.ratio > 0:
            raise ConfigurationError("invalid ratio")


def _best_minimization(model, H, inits, opts):
    best = None
    for psi0, gauge0 in inits:
        res = gl2d.minimize(model, H, (psi0, gauge0), opts)
        if best is None or res.energy.total < best.energy.total:
            best = res
    return best


def critical_field_sweep(
    model: PinningModel,
    H_grid: np.ndarray,
    mesh: DiscMesh | None = None,
    u: RadialProfile | None = None,
    sol: LondonSolution | None = None,
    opts: MinimizeOptions | None = None,
    n_seed: int | None = None,
    detection_tol: float | None = None,
) -> CriticalFieldEstimate:
    """Bracket the first nucleation field on an increasing H grid.

    Each field value is minimized from the vortex-free reference, from a
    vortex-seeded reference (seeds on the attractor set), and from the
    previous field's winner (warm start); the lowest-energy state wins
    and its total detected degree is recorded.  Returns the bracketing
    pair around the first 0 -> >=1 transition of the total degree.

    Raises
    ------
    SweepRangeError
        If no transition happens inside the grid (the observed degree
        profile is attached to the error).
    """
    H_grid = np.asarray(H_grid, dtype=float)
    if H_grid.ndim != 1 or H_grid.size < 2 or np.any(np.diff(H_grid) <= 0):
        raise ConfigurationError("H grid must be increasing with at least two points")
    if mesh is None:
        mesh = DiscMesh(rgrid=graded_radial_grid(model, 96), n_theta=128)
    if u is None:
        u = solve_radial_minimizer(model, mesh.rgrid)
    if sol is None:
        sol = solve_london(u)
    if opts is None:
        opts = MinimizeOptions(max_iter=4000, step0=1.0)
    if n_seed is None:
        n_seed = max(1, int(np.log(model.abs_log_eps)))
    if detection_tol is None:
        detection_tol = model.abs_log_eps ** (-0.25)

    table = []
    warm = None
    for H in H_grid:
        psi_m, gauge_m = gl2d.meissner_configuration(u, sol, H, mesh)
        seeds = attractor_seed_points(sol, n_seed)
        psi_s = gl2d.seed_vortices(psi_m, seeds, core=model.epsilon)
        inits = [(psi_m, gauge_m), (psi_s, gauge_m)]
        if warm is not None:
            inits.append(warm)
        best = _best_minimization(model, H, inits, opts)
        warm = (best.psi, best.gauge)
        phi = normalized_field(best.psi, u)
        balls = detect_vortices(phi)
        stats = degree_statistics(balls, model.R, detection_tol)
        table.append(
            SweepPoint(
                H=float(H),
                energy=best.energy.total,
                d_total=stats.d_total,
                d_plus=stats.d_plus,
                d_near_interface=stats.d_near_interface,
            )
        )

    k_ref = sol.k_eps * model.abs_log_eps
    for prev, cur in zip(table, table[1:]):
        if prev.d_total == 0 and cur.d_total >= 1:
            mid = 0.5 * (prev.H + cur.H)
            return CriticalFieldEstimate(
                H_lo=prev.H, H_hi=cur.H, k_eps_ref=sol.k_eps,
                ratio=mid / k_ref, table=tuple(table),
            )
    raise SweepRangeError(
        "no nucleation transition inside the sweep range",
        table=tuple(table),
    )


def robin_residual(psi: Field2D, gauge: Gauge2D, u: RadialProfile, gamma: float) -> float:
    """Interface defect eps || n.(grad - iA)psi + (gamma/eps) psi ||_L2(r=R).

    The covariant radial derivative at R is one-sided from the inner
    phase: node values along each spoke are parallel-transported to the
    interface with the accumulated link phases, then differentiated with
    the 3-point one-sided stencil.  Defined for vortex-free states only.
    """
    mesh = psi.mesh
    if mesh.rgrid is not u.grid:
        raise ConfigurationError("profile grid differs from the field mesh")
    if u.model is None:
        raise ConfigurationError("robin residual needs the pinning model")
    phi = normalized_field(psi, u)
    balls = detect_vortices(phi)
    if any(b.degree != 0 or b.touches_boundary for b in balls):
        raise NotApplicableError("robin residual is defined for vortex-free states")
    lat = gl2d._lattice(mesh)
    tr, _ = lat.link_phases(gauge.a_r, gauge.a_theta)
    i = mesh.rgrid.interface_index
    if i < 2:
        raise ConfigurationError("not enough inner nodes for the one-sided stencil")
    r = mesh.r
    # transport psi(i-2), psi(i-1) to the interface radius
    f2 = psi.psi[i - 2, :] * np.exp(1j * (tr[i - 2, :] + tr[i - 1, :]))
    f1 = psi.psi[i - 1, :] * np.exp(1j * tr[i - 1, :])
    f0 = psi.psi[i, :]
    x0, x1, x2 = r[i - 2], r[i - 1], r[i]
    w2 = (2 * x2 - x1 - x2) / ((x0 - x1) * (x0 - x2))
    w1 = (2 * x2 - x0 - x2) / ((x1 - x0) * (x1 - x2))
    w0 = (2 * x2 - x0 - x1) / ((x2 - x0) * (x2 - x1))
    dpsi = w2 * f2 + w1 * f1 + w0 * f0
    eps = u.model.epsilon
    res = dpsi + (gamma / eps) * f0
    norm = float(np.sqrt(np.sum(np.abs(res) ** 2) * u.model.R * mesh.dtheta))
    return eps * norm
