"""Discrete model of the periodic strip T x (0,1) with a degenerate radial weight.

The continuous state lives on the cylinder surface: an angle theta on the
torus and a radius r in (0,1), with diffusion coefficient w(r) = r^alpha
vanishing at r = 0. Fields are represented two ways and the maps between
them are exact at the discrete level:

* a tensor grid of values, uniform in theta and graded in r, and
* one radial coefficient vector per Fourier mode in theta.

The angular basis is orthonormal on the torus: the constant mode is
1/sqrt(2*pi) and each oscillating mode cos(n theta)/sqrt(pi) or
sin(n theta)/sqrt(pi). With a uniform angular quadrature of at least
2*n_theta_max + 2 points, analysis and synthesis are exact on the span of
the retained modes, so the round trip is the identity and the discrete
Parseval identity holds to rounding.

The radial grid is graded toward r = 0 as r_i = (i/n_r)^g because the
natural eigenfunctions of the degenerate operator behave like a fractional
power of r there. Half nodes follow the same map at half-integer indices;
interior cell measures m_i = r_{i+1/2} - r_{i-1/2} define the radial inner
product used by every module.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ModelConfig:
    """Scenario parameters. Validated on construction, immutable after."""

    alpha: float
    T_horizon: float
    n_theta_max: int
    n_r: int
    grid_power: float = 0.0   # 0 means: use the resolving default 2/(2-alpha)
    n_time: int = 64
    theta_quad_points: int = 0  # 0 means: default 4*n_theta_max + 8

    def __post_init__(self):
        def real(name, value):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name} must be a real number, got {value!r}")
            return float(value)

        def integer(name, value):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
            return value

        object.__setattr__(self, "alpha", real("alpha", self.alpha))
        object.__setattr__(self, "T_horizon", real("T_horizon", self.T_horizon))
        object.__setattr__(self, "n_theta_max", integer("n_theta_max", self.n_theta_max))
        object.__setattr__(self, "n_r", integer("n_r", self.n_r))
        object.__setattr__(self, "grid_power", real("grid_power", self.grid_power))
        object.__setattr__(self, "n_time", integer("n_time", self.n_time))
        object.__setattr__(self, "theta_quad_points",
                           integer("theta_quad_points", self.theta_quad_points))

        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha out of range (0,1): {self.alpha!r}")
        if self.T_horizon <= 0.0:
            raise ConfigError(f"T_horizon must be positive: {self.T_horizon!r}")
        if self.n_theta_max < 0:
            raise ConfigError(f"n_theta_max must be >= 0: {self.n_theta_max!r}")
        if self.n_r < 8:
            raise ConfigError(f"n_r must be >= 8: {self.n_r!r}")
        if self.grid_power == 0.0:
            object.__setattr__(self, "grid_power", 2.0 / (2.0 - self.alpha))
        if self.grid_power < 1.0:
            raise ConfigError(f"grid_power must be >= 1: {self.grid_power!r}")
        if self.n_time < 2:
            raise ConfigError(f"n_time must be >= 2: {self.n_time!r}")
        if self.theta_quad_points == 0:
            object.__setattr__(self, "theta_quad_points", 4 * self.n_theta_max + 8)
        q_min = 2 * self.n_theta_max + 2
        if self.theta_quad_points < q_min:
            raise ConfigError(
                f"theta_quad_points must be >= {q_min}: {self.theta_quad_points!r}")


def _frozen(arr):
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class RadialGrid:
    """Graded radial mesh with half nodes, weight samples and cell measures.

    nodes holds the interior points r_1 < ... < r_{n_r-1}; the Dirichlet
    endpoints r_0 = 0 and r_{n_r} = 1 are implicit. half_nodes holds
    r_{i+1/2} = ((i+1/2)/n_r)^g for i = 0..n_r-1, so half_nodes[i] sits
    between nodes i and i+1 of the full mesh. mass[i-1] is the measure of
    the cell around interior node i.
    """

    n_r: int
    grid_power: float
    alpha: float
    nodes: np.ndarray
    cell_widths: np.ndarray    # h_{i+1/2} = r_{i+1} - r_i, length n_r
    half_nodes: np.ndarray     # length n_r
    half_weights: np.ndarray   # w(r_{i+1/2}) = r_{i+1/2}^alpha, length n_r
    mass: np.ndarray           # length n_r - 1


def build_radial_grid(alpha: float, n_r: int, grid_power: float) -> RadialGrid:
    idx = np.arange(0, n_r + 1, dtype=float)
    full = (idx / n_r) ** grid_power
    half = ((idx[:-1] + 0.5) / n_r) ** grid_power
    grid = RadialGrid(
        n_r=n_r,
        grid_power=grid_power,
        alpha=alpha,
        nodes=_frozen(full[1:-1]),
        cell_widths=_frozen(np.diff(full)),
        half_nodes=_frozen(half),
        half_weights=_frozen(half ** alpha),
        mass=_frozen(half[1:] - half[:-1]),
    )
    if not np.all(np.diff(grid.nodes) > 0.0):
        raise ConfigError("radial nodes are not strictly increasing")
    if not (np.all(grid.mass > 0.0) and np.all(grid.half_weights > 0.0)):
        raise ConfigError("degenerate radial cells")
    return grid


@dataclass(frozen=True, order=True)
class ModeIndex:
    """One angular Fourier mode: parity 'cos' or 'sin' and frequency n.

    Ordering is (parity, n) with 'cos' before 'sin', the canonical
    reduction order for anything aggregated over modes.
    """

    parity: str
    n: int

    def __post_init__(self):
        if self.parity not in ("cos", "sin"):
            raise ConfigError(f"parity must be 'cos' or 'sin': {self.parity!r}")
        if self.n < 0 or (self.parity == "sin" and self.n == 0):
            raise ConfigError(f"invalid mode ({self.parity}, {self.n})")

    def sort_key(self):
        return (0 if self.parity == "cos" else 1, self.n)


def mode_set(n_theta_max: int) -> tuple:
    cos_part = [ModeIndex("cos", n) for n in range(0, n_theta_max + 1)]
    sin_part = [ModeIndex("sin", n) for n in range(1, n_theta_max + 1)]
    return tuple(cos_part + sin_part)


def angular_basis_value(mode: ModeIndex, theta):
    """Evaluate the orthonormal torus basis function of one mode."""
    theta = np.asarray(theta, dtype=float)
    if mode.parity == "cos":
        if mode.n == 0:
            return np.full_like(theta, 1.0 / math.sqrt(TWO_PI))
        return np.cos(mode.n * theta) / math.sqrt(math.pi)
    return np.sin(mode.n * theta) / math.sqrt(math.pi)


@dataclass(frozen=True)
class Model:
    """Everything fixed by a ModelConfig: grids, quadrature, mode bookkeeping."""

    config: ModelConfig
    grid: RadialGrid
    theta_nodes: np.ndarray
    theta_weight: float            # uniform quadrature weight 2*pi/Q
    modes: tuple                   # ordered ModeIndex tuple
    basis_matrix: np.ndarray       # shape (Q, n_modes), column per mode

    @property
    def n_radial(self) -> int:
        return self.grid.n_r - 1

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def mode_position(self, mode: ModeIndex) -> int:
        return self._mode_lookup[mode]

    def __post_init__(self):
        lookup = {m: i for i, m in enumerate(self.modes)}
        object.__setattr__(self, "_mode_lookup", lookup)


def build_model(config: ModelConfig) -> Model:
    grid = build_radial_grid(config.alpha, config.n_r, config.grid_power)
    q = config.theta_quad_points
    theta = np.arange(q, dtype=float) * (TWO_PI / q)
    modes = mode_set(config.n_theta_max)
    basis = np.column_stack([angular_basis_value(m, theta) for m in modes])
    return Model(
        config=config,
        grid=grid,
        theta_nodes=_frozen(theta),
        theta_weight=TWO_PI / q,
        modes=modes,
        basis_matrix=_frozen(basis),
    )


@dataclass(frozen=True)
class Field2D:
    """Grid values of a scalar field, shape (theta_quad_points, n_r - 1)."""

    model: Model
    values: np.ndarray

    def __post_init__(self):
        expected = (self.model.config.theta_quad_points, self.model.n_radial)
        if self.values.shape != expected:
            raise ConfigError(
                f"field shape {self.values.shape} does not match grid {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("field contains non-finite entries")


@dataclass(frozen=True)
class ModeCoeffs:
    """Radial coefficient vectors for the complete mode set, one row per mode."""

    model: Model
    data: np.ndarray    # shape (n_modes, n_r - 1)

    def __post_init__(self):
        expected = (self.model.n_modes, self.model.n_radial)
        if self.data.shape != expected:
            raise ConfigError(
                f"coefficient shape {self.data.shape} does not match {expected}")
        if not np.all(np.isfinite(self.data)):
            raise ConfigError("coefficients contain non-finite entries")

    def vector(self, mode: ModeIndex) -> np.ndarray:
        return self.data[self.model.mode_position(mode)]


def zero_coeffs(model: Model) -> ModeCoeffs:
    return ModeCoeffs(model, np.zeros((model.n_modes, model.n_radial)))


def project_modes(fld: Field2D) -> ModeCoeffs:
    """Angular analysis: quadrature of the field against each basis function.

    The rectangle rule on the uniform periodic grid integrates products of
    retained modes exactly, so on their span this is the true L2(T) pairing.
    """
    model = fld.model
    coeffs = model.theta_weight * (model.basis_matrix.T @ fld.values)
    return ModeCoeffs(model, coeffs)


def synthesize_field(coeffs: ModeCoeffs) -> Field2D:
    """Angular synthesis: pointwise mode sum on the tensor grid."""
    model = coeffs.model
    return Field2D(model, model.basis_matrix @ coeffs.data)


def coeffs_inner(a: ModeCoeffs, b: ModeCoeffs) -> float:
    """Discrete L2 inner product over the strip, mass weighted in r."""
    mass = a.model.grid.mass
    return float(np.sum(a.data * b.data * mass[None, :]))


def coeffs_norm(a: ModeCoeffs) -> float:
    return math.sqrt(max(coeffs_inner(a, a), 0.0))


def field_norm2(fld: Field2D) -> float:
    """Quadrature of the squared field over the strip."""
    mass = fld.model.grid.mass
    sq = fld.values ** 2
    return float(fld.model.theta_weight * np.sum(sq * mass[None, :]))
