"""Problem parameters, step pinning term, and the shared disc geometry.

The model is a two-phase superconducting disc: preferred density 1 on the
inner disc r <= R, level ``a`` on the annulus R < r < 1, with coherence
length ``epsilon``.  Every solver in the package consumes the same three
numbers plus a radial grid (1-D problems) or a polar tensor mesh (2-D
problems).  The interface layer has width O(epsilon), so radial grids are
graded around r = R.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateModelError, DomainError

__all__ = [
    "PinningModel",
    "RadialGrid",
    "DiscMesh",
    "step_potential",
    "graded_radial_grid",
]


@dataclass(frozen=True)
class PinningModel:
    """The triple (a, R, epsilon) defining one pinned-disc problem.

    Parameters
    ----------
    a : float
        Pinning level on the outer annulus; positive and != 1.
    R : float
        Interface radius, in (0, 1).
    epsilon : float
        Coherence-length parameter, in (0, 1).
    """

    a: float
    R: float
    epsilon: float

    def __post_init__(self):
        if not (self.a > 0):
            raise DomainError(f"pinning level a must be positive, got {self.a}")
        if self.a == 1.0:
            raise DegenerateModelError("a = 1 is degenerate: the interface problem has the trivial flat solution")
        if not (0.0 < self.R < 1.0):
            raise DomainError(f"interface radius R must lie in (0, 1), got {self.R}")
        if not (0.0 < self.epsilon < 1.0):
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    @property
    def sqrt_a(self) -> float:
        return float(np.sqrt(self.a))

    @property
    def u_min(self) -> float:
        """Lower pointwise bound min(1, sqrt(a)) for the pinned density."""
        return min(1.0, self.sqrt_a)

    @property
    def u_max(self) -> float:
        """Upper pointwise bound max(1, sqrt(a))."""
        return max(1.0, self.sqrt_a)

    @property
    def abs_log_eps(self) -> float:
        return float(abs(np.log(self.epsilon)))


def step_potential(model: PinningModel, r):
    """Step pinning term: 1 on the closed inner disc r <= R, a outside.

    The closure convention p(R) = 1 keeps the inner phase on the closed
    ball.  Accepts scalars or arrays; radii outside [0, 1] raise.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError("radius outside the unit disc")
    vals = np.where(arr <= model.R, 1.0, model.a)
    if np.isscalar(r) or arr.ndim == 0:
        return float(vals)
    return vals


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing radii spanning [0, 1] with r = R as a node.

    ``interface`` records the radius the grid is graded around; it must
    appear exactly once among the nodes.
    """

    nodes: np.ndarray
    interface: float
    interface_index: int = field(init=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ConfigurationError("radial grid needs at least two nodes")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ConfigurationError("radial grid must start at 0 and end at 1")
        if np.any(np.diff(nodes) <= 0.0):
            raise ConfigurationError("radial grid nodes must be strictly increasing")
        hits = np.nonzero(nodes == self.interface)[0]
        if hits.size != 1:
            raise ConfigurationError(
                f"interface radius {self.interface} must appear exactly once as a node (found {hits.size})"
            )
        object.__setattr__(self, "interface_index", int(hits[0]))
        nodes.setflags(write=False)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.nodes)

    def trapezoid_weights(self) -> np.ndarray:
        """Nodal weights w_i with sum_i w_i f(r_i) ~ int_0^1 f(r) r dr.

        Trapezoid rule applied to f(r)·r; exact for constants (the weights
        sum to 1/2 to machine precision).
        """
        h = self.spacings
        tw = np.zeros(self.n)
        tw[:-1] += 0.5 * h
        tw[1:] += 0.5 * h
        return tw * self.nodes

    def interface_split_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Trapezoid masses split by side of the interface radius.

        The interface node's weight is divided into its inner and outer
        half-cells, so quadrature of integrands that jump across R (the
        step term and its powers) is exact for piecewise constants.
        Returns (inner, outer) with inner + outer = trapezoid_weights().
        """
        h = self.spacings
        i = self.interface_index
        inner = np.zeros(self.n)
        outer = np.zeros(self.n)
        tw = self.trapezoid_weights()
        inner[: i] = tw[: i]
        outer[i + 1:] = tw[i + 1:]
        inner[i] = 0.5 * h[i - 1] * self.nodes[i]
        outer[i] = tw[i] - inner[i]
        return inner, outer


def _geometric_side(length: float, h0: float, m: int) -> np.ndarray:
    """m interval widths covering ``length``, starting near h0 and growing
    geometrically.  Returns the widths ordered from the fine end."""
    if m <= 0:
        raise ConfigurationError("side of the graded grid received no intervals")
    if h0 * m >= length:
        return np.full(m, length / m)

    def total(q):
        # h0 (q^m - 1)/(q - 1), guarded against overflow for large m
        if m * np.log(q) > 500.0:
            return np.inf
        return h0 * (q**m - 1.0) / (q - 1.0)

    # solve total(q) = length for the growth ratio q > 1
    lo, hi = 1.0 + 1e-12, 2.0
    while total(hi) < length:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) < length:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    widths = h0 * q ** np.arange(m)
    return widths * (length / widths.sum())


def graded_radial_grid(model: PinningModel, n: int) -> RadialGrid:
    """Radial grid of exactly n nodes, refined in the interface layer.

    The layer [R - w, R + w] with w ~ 5 epsilon receives a uniform fine
    band (spacing <= epsilon/4, at least 20 nodes within 5 epsilon of R,
    R exactly at a node); the two outer segments are geometrically
    stretched away from the band.

    Raises
    ------
    ConfigurationError
        If n < 64 or the budget cannot honor the grading rule.
    """
    if n < 64:
        raise ConfigurationError(f"graded grid needs n >= 64 nodes, got {n}")
    R, eps = model.R, model.epsilon
    w = min(5.0 * eps, 0.45 * R, 0.45 * (1.0 - R))
    # fine-band half-counts: spacing <= eps/4 and >= 10 points per side of R
    half = max(int(np.ceil(w / (eps / 4.0))), 10)
    # let large budgets buy extra layer resolution, but keep > 1/3 outside
    half = max(half, int(round(0.15 * n)))
    n_layer = 2 * half + 1
    n_out = n - n_layer
    if n_out < 8:
        raise ConfigurationError(f"n = {n} too small to grade the epsilon-layer (needs {n_layer + 8})")
    left_len, right_len = R - w, 1.0 - R - w
    m_left = max(4, int(round(n_out * left_len / (left_len + right_len))))
    m_right = n_out - m_left
    if m_right < 4:
        m_right = 4
        m_left = n_out - m_right
    h_band = w / half
    layer = R + h_band * np.arange(-half, half + 1)
    left_w = _geometric_side(left_len, h_band, m_left)
    right_w = _geometric_side(right_len, h_band, m_right)
    left = (R - w) - np.concatenate(([0.0], np.cumsum(left_w)))
    right = (R + w) + np.cumsum(right_w)
    nodes = np.concatenate((left[::-1][:-1], layer, right))
    nodes[0], nodes[-1] = 0.0, 1.0
    nodes[half + m_left] = R  # exact interface node
    return RadialGrid(nodes=nodes, interface=R)


@dataclass(frozen=True, eq=False)
class DiscMesh:
    """Polar tensor mesh on the closed unit disc.

    Nodes are (r_i, theta_j) with theta uniform on [0, 2 pi) and the radial
    line set taken from a :class:`RadialGrid` (so r = R is a grid line).
    ``weights[i, j]`` are nodal quadrature weights; they sum to the disc
    area pi exactly up to roundoff.  The r = 0 ring is a single physical
    point stored once per angle with zero quadrature weight.
    """

    rgrid: RadialGrid
    n_theta: int
    theta: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n_theta < 8:
            raise ConfigurationError("disc mesh needs at least 8 angular nodes")
        theta = 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta
        tw = self.rgrid.trapezoid_weights()
        weights = np.outer(tw, np.full(self.n_theta, self.dtheta))
        total = weights.sum()
        if abs(total - np.pi) > 1e-10 * np.pi:
            raise ConfigurationError(f"mesh quadrature mass {total!r} deviates from pi")
        theta.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "weights", weights)

    @property
    def r(self) -> np.ndarray:
        return self.rgrid.nodes

    @property
    def n_r(self) -> int:
        return self.rgrid.n

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.n_theta

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_theta)

    def integrate(self, f: np.ndarray) -> float:
        """Quadrature of a nodal scalar field over the disc."""
        if f.shape != self.shape:
            raise ConfigurationError(f"field shape {f.shape} does not match mesh {self.shape}")
        return float(np.sum(self.weights * f))

    def nodes_xy(self) -> tuple[np.ndarray, np.ndarray]:
        """Cartesian coordinates of every mesh node, shaped like fields."""
        rr = self.r[:, None]
        return rr * np.cos(self.theta)[None, :], rr * np.sin(self.theta)[None, :]
