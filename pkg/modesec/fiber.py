"""
Fiber mode model.

Guided LP modes of a weakly-guiding step-index fiber. The modes make up the mode domain in which
transmission matrices are expressed, so the ordering of the basis defines the channel numbering used
by everything else.

A FiberSpec holds the fiber geometry. solve_modes() finds every root of the LP dispersion relation
and returns a ModeBasis, with one LPMode per channel. l > 0 roots contribute two channels (cosine
and sine orientation). Channels are ordered by l, then m, then cosine before sine.

The basis also knows how to sample its (normalized) fields on a Cartesian grid, which is what
decompose_field() and synthesize_field() use to go between complex fields and mode coefficients.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property

import numpy as np
from scipy import special
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import bisect

# Logging setup
logger = logging.getLogger("fiber")

DEFAULT_CORE_INDEX = 1.46
DEFAULT_RHO = 0.8

# Root search tolerance on u, and distance kept from poles / cutoff when bracketing.
U_TOLERANCE = 1e-12
BRACKET_MARGIN = 1e-10

# Relative difference between full and half resolution radial quadrature considered converged.
QUADRATURE_TOLERANCE = 1e-3


# ---------------------------
# Exceptions
# ---------------------------
@dataclass
class FiberException(Exception):
    value: str


class Orientation(StrEnum):
    """Azimuthal orientation of an LP mode. l = 0 modes are always cosine."""

    cosine = "cos"
    sine = "sin"


# ---------------------------
# Classes - Implementation
# ---------------------------
@dataclass(frozen=True)
class FiberSpec:
    """Step-index fiber. Lengths in meters.

    :raises:
    FiberException: If any parameter is non-positive, or NA >= core index.
    """

    core_radius: float
    numerical_aperture: float
    wavelength: float
    core_index: float = DEFAULT_CORE_INDEX

    def __post_init__(self) -> None:
        for name in ["core_radius", "numerical_aperture", "wavelength", "core_index"]:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise FiberException(f"Fiber {name} must be strictly positive, got {value}")
        if self.numerical_aperture >= self.core_index:
            raise FiberException(
                f"Numerical aperture {self.numerical_aperture} must be below core index {self.core_index}"
            )

    @property
    def cladding_index(self) -> float:
        return math.sqrt(self.core_index**2 - self.numerical_aperture**2)

    def external(self) -> dict:
        fields = ["core_radius", "numerical_aperture", "wavelength", "core_index"]
        result = {k: self.__dict__[k] for k in fields}
        result["cladding_index"] = self.cladding_index
        result["v_number"] = v_number(self)
        return result


@dataclass(frozen=True)
class LPMode:
    """A solved LP_{l,m} mode.

    u and w are the normalized transverse parameters in core and cladding (u^2 + w^2 = V^2).
    """

    l: int
    m: int
    orientation: Orientation
    u: float
    w: float
    channel_index: int = -1

    @property
    def label(self) -> str:
        if self.l == 0:
            return f"LP{self.l}{self.m}"
        return f"LP{self.l}{self.m}{'a' if self.orientation == Orientation.cosine else 'b'}"

    def external(self) -> dict:
        fields = ["l", "m", "u", "w", "channel_index"]
        result = {k: self.__dict__[k] for k in fields}
        result["orientation"] = str(self.orientation)
        return result


@dataclass(frozen=True)
class GridSpec:
    """Sampling grids.

    points x points Cartesian samples spanning [-extent*a, extent*a] in both directions, used for
    field decomposition. radial_points samples over [0, radial_extent*a] used for power quadrature.
    """

    points: int = 512
    extent: float = 1.5
    radial_points: int = 4096
    radial_extent: float = 3.0

    def __post_init__(self) -> None:
        if self.points < 2 or self.radial_points < 3:
            raise FiberException(f"Grid too small: {self}")
        if self.extent <= 0 or self.radial_extent <= 0:
            raise FiberException(f"Grid extents must be positive: {self}")

    def normalized_axis(self) -> np.ndarray:
        """Cartesian axis in units of the core radius"""
        return np.linspace(-self.extent, self.extent, self.points)


@dataclass(frozen=True)
class ModeBasis:
    """Ordered set of guided modes of a fiber together with the sampling grid."""

    fiber: FiberSpec
    modes: tuple[LPMode, ...]
    grid: GridSpec = field(default_factory=GridSpec)

    def __len__(self) -> int:
        return len(self.modes)

    def labels(self) -> list[str]:
        return [mode.label for mode in self.modes]

    @cached_property
    def sampled_fields(self) -> np.ndarray:
        """All mode fields on the Cartesian grid, shape (N, points, points), each with unit sum of squares."""
        axis = self.grid.normalized_axis()
        x, y = np.meshgrid(axis, axis, indexing="xy")
        rn = np.hypot(x, y)
        phi = np.arctan2(y, x)
        fields = np.empty((len(self.modes), self.grid.points, self.grid.points))
        for i, mode in enumerate(self.modes):
            f = _radial_profile(mode, rn) * _azimuthal(mode, phi)
            fields[i] = f / np.sqrt(np.sum(f * f))
        logger.debug(f"Sampled {len(self.modes)} mode fields on a {self.grid.points}x{self.grid.points} grid")
        return fields

    def external(self, rho: float = DEFAULT_RHO) -> dict:
        """Structured document: fiber parameters followed by one record per mode"""
        records = []
        for mode in self.modes:
            record = mode.external()
            record["label"] = mode.label
            record["edge_power_fraction"] = edge_power_fraction(mode, self.fiber, rho, grid=self.grid)
            records.append(record)
        return {"fiber": self.fiber.external(), "rho": rho, "mode_count": len(self.modes), "modes": records}

    def __str__(self) -> str:
        return f"ModeBasis({len(self.modes)} modes, V={v_number(self.fiber):.4f})"


# ---------------------------
# Mode solving
# ---------------------------
def v_number(fiber: FiberSpec) -> float:
    """Normalized frequency 2*pi*a*NA/lambda"""
    return 2.0 * math.pi * fiber.core_radius * fiber.numerical_aperture / fiber.wavelength


def dispersion(l: int, u: float, v: float) -> float:
    """LP eigenvalue function u*J_{l-1}(u)/J_l(u) + w*K_{l-1}(w)/K_l(w), zero at guided modes.

    Strictly decreasing in u between consecutive zeros of J_l.
    """
    w = math.sqrt(max(v * v - u * u, 0.0))
    return u * special.jv(l - 1, u) / special.jv(l, u) + w * special.kv(l - 1, w) / special.kv(l, w)


def _brackets(l: int, v: float) -> list[tuple[float, float]]:
    """Intervals between consecutive zeros of J_l, clipped to (0, V)."""
    zeros = special.jn_zeros(l, int(v / math.pi) + 3)
    edges = [0.0] + [float(z) for z in zeros]
    margin = BRACKET_MARGIN * max(v, 1.0)
    result = []
    for lo_edge, hi_edge in zip(edges[:-1], edges[1:]):
        if lo_edge >= v:
            break
        lo = lo_edge + margin
        hi = min(hi_edge, v) - margin
        if lo < hi:
            result.append((lo, hi))
    return result


def solve_roots(l: int, v: float) -> list[float]:
    """All roots u of the dispersion relation for azimuthal order l, ascending (m = 1, 2, ...)."""
    roots = []
    for lo, hi in _brackets(l, v):
        f_lo = dispersion(l, lo, v)
        f_hi = dispersion(l, hi, v)
        # Modes at (or numerically at) cutoff leave no sign change in the last bracket and are excluded.
        if not (f_lo > 0.0 and f_hi < 0.0):
            continue
        roots.append(bisect(lambda u: dispersion(l, u, v), lo, hi, xtol=U_TOLERANCE, maxiter=400))
    return roots


def solve_modes(fiber: FiberSpec, grid: GridSpec = None) -> ModeBasis:
    """Solve all guided LP modes of fiber.

    :raises:
    FiberException: If no mode is guided.
    """
    v = v_number(fiber)
    modes: list[LPMode] = []
    l = 0
    while True:
        roots = solve_roots(l, v)
        if not roots and l > 0:
            break  # Cutoffs grow with l, so no higher order is guided either.
        for m, u in enumerate(roots, start=1):
            w = math.sqrt(v * v - u * u)
            if w <= 0.0:
                continue
            modes.append(LPMode(l=l, m=m, orientation=Orientation.cosine, u=u, w=w))
            if l > 0:
                modes.append(LPMode(l=l, m=m, orientation=Orientation.sine, u=u, w=w))
        if not roots:
            break
        l += 1

    if not modes:
        e = f"No guided modes for V={v:.6f}"
        logger.error(e)
        raise FiberException(e)

    modes.sort(key=lambda mode: (mode.l, mode.m, 0 if mode.orientation == Orientation.cosine else 1))
    ordered = tuple(
        LPMode(l=mode.l, m=mode.m, orientation=mode.orientation, u=mode.u, w=mode.w, channel_index=i)
        for i, mode in enumerate(modes)
    )
    logger.info(f"Solved {len(ordered)} LP modes for V={v:.4f} (max l={ordered[-1].l})")
    return ModeBasis(fiber=fiber, modes=ordered, grid=grid if grid is not None else GridSpec())


# ---------------------------
# Fields
# ---------------------------
def _radial_profile(mode: LPMode, rn: np.ndarray) -> np.ndarray:
    """Radial field at normalized radius rn = r/a. Bessel J in the core, scaled Bessel K outside."""
    rn = np.asarray(rn, dtype=float)
    out = np.empty_like(rn)
    inside = rn <= 1.0
    out[inside] = special.jv(mode.l, mode.u * rn[inside])
    amplitude = special.jv(mode.l, mode.u) / special.kv(mode.l, mode.w)
    out[~inside] = amplitude * special.kv(mode.l, mode.w * rn[~inside])
    return out


def _azimuthal(mode: LPMode, phi):
    if mode.orientation == Orientation.sine:
        return np.sin(mode.l * np.asarray(phi, dtype=float))
    return np.cos(mode.l * np.asarray(phi, dtype=float))


def mode_field(mode: LPMode, fiber: FiberSpec, r, phi):
    """Real field amplitude of mode at radius r (meters) and angle phi (radians). Accepts arrays."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise FiberException("Radius must be non-negative")
    value = _radial_profile(mode, np.atleast_1d(r_arr / fiber.core_radius)) * _azimuthal(mode, phi)
    return float(value[0]) if np.ndim(r) == 0 and np.ndim(phi) == 0 else value.reshape(np.broadcast(r_arr, phi).shape)


def edge_power_fraction(mode: LPMode, fiber: FiberSpec, rho: float = DEFAULT_RHO, grid: GridSpec = None) -> float:
    """Fraction of the mode power located at r >= rho*a.

    The azimuthal factor is identical in numerator and denominator, so only the radial integral
    of |R(r)|^2 r dr is evaluated, over [0, radial_extent*a].

    :raises:
    FiberException: rho outside [0, 1], radial extent too short, or quadrature not converged.
    """
    grid = grid if grid is not None else GridSpec()
    if not 0.0 <= rho <= 1.0:
        raise FiberException(f"Edge parameter rho must be in [0, 1], got {rho}")
    if grid.radial_extent < 3.0:
        raise FiberException(f"Radial quadrature must extend to at least 3 core radii, got {grid.radial_extent}")

    rn = np.linspace(0.0, grid.radial_extent, grid.radial_points)
    integrand = _radial_profile(mode, rn) ** 2 * rn
    cumulative = cumulative_trapezoid(integrand, rn, initial=0.0)
    total = cumulative[-1]

    # Convergence check against half resolution
    coarse = np.trapezoid(integrand[::2], rn[::2])
    if not (np.isfinite(total) and total > 0) or abs(coarse - total) > QUADRATURE_TOLERANCE * total:
        e = (
            f"Radial quadrature for {mode.label} did not converge: total {total}, half-resolution {coarse},"
            f" grid {grid.radial_points} points to {grid.radial_extent}a"
        )
        logger.error(e)
        raise FiberException(e)

    inner = float(np.interp(rho, rn, cumulative))
    return float(min(max((total - inner) / total, 0.0), 1.0))


def decompose_field(field: np.ndarray, basis: ModeBasis) -> np.ndarray:
    """Mode coefficients of a complex field sampled on basis.grid (discrete inner products).

    :raises:
    FiberException: If field is not sampled on the basis grid.
    """
    field = np.asarray(field)
    expected = (basis.grid.points, basis.grid.points)
    if field.shape != expected:
        raise FiberException(f"Field grid {field.shape} does not match basis grid {expected}")
    fields = basis.sampled_fields.reshape(len(basis), -1)
    return fields @ field.reshape(-1).astype(complex)


def synthesize_field(coefficients, basis: ModeBasis) -> np.ndarray:
    """Complex field sum_i c_i e_i on basis.grid."""
    coefficients = np.asarray(coefficients, dtype=complex)
    if coefficients.shape != (len(basis),):
        raise FiberException(f"Expected {len(basis)} coefficients, got shape {coefficients.shape}")
    fields = basis.sampled_fields.reshape(len(basis), -1)
    return (coefficients @ fields).reshape(basis.grid.points, basis.grid.points)


def gram_matrix(basis: ModeBasis) -> np.ndarray:
    """Discrete overlap matrix of the normalized sampled fields (identity up to grid error)."""
    fields = basis.sampled_fields.reshape(len(basis), -1)
    return fields @ fields.T
