"""Exact few-body bosonic dynamics on a torus grid with a rescaled
three-body interaction.

The Hamiltonian is

    H = sum_j (-Lap_j) + (1/N^2) sum_{i<j<k} V_scaled(x_i, x_j, x_k)

where V_scaled is the periodic extension of N^(2 d beta) V(N^beta u, N^beta v)
in the relative coordinates, symmetrised over the choice of centre particle so
that H maps the bosonic sector to itself.  States are dense complex tensors
over (grid)^N; propagation uses a Lanczos (Krylov) approximation of
exp(-i t H) with a matrix-free H.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.linalg import eigh_tridiagonal

from .grids import GridSpec, TorusField, _xi_squared

MEMORY_BUDGET = 2**24  # max complex entries in a dense state tensor


class UnderResolvedError(ValueError):
    """The rescaled interaction is narrower than the grid can represent."""


class MemoryBudgetError(ValueError):
    pass


class PropagationToleranceError(RuntimeError):
    pass


def _bump(r2: np.ndarray, radius: float) -> np.ndarray:
    """Classic mollifier factor exp(1 - 1/(1 - (r/radius)^2)) inside the ball,
    zero outside; C-infinity with compact support, equal to 1 at r = 0."""
    out = np.zeros_like(r2, dtype=np.float64)
    s = r2 / radius**2
    inside = s < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside]))
    return out


@dataclass(frozen=True)
class GaussianPotential:
    """Smoothly truncated Gaussian product profile on R^d x R^d:

        V(u, v) = c * exp(-(|u|^2 + |v|^2) / (2 sigma^2)) g(|u|) g(|v|)

    where g is a mollifier vanishing to all orders at |.| = 3 sigma, so V is
    genuinely smooth and compactly supported.  c defaults to the value making
    the continuum mass integral V du dv equal to one.  Symmetric in (u, v)
    and nonnegative by construction.
    """

    sigma: float = 0.5
    amplitude: float | None = None

    @property
    def support_radius(self) -> float:
        return 3.0 * self.sigma

    def _radial(self, r2: np.ndarray) -> np.ndarray:
        return np.exp(-r2 / (2.0 * self.sigma**2)) * _bump(r2, self.support_radius)

    def ball_integral(self, d: int) -> float:
        """integral over R^d of the radial factor."""
        rad = lambda r: float(self._radial(np.array([r * r]))[0])
        if d == 1:
            val, _ = integrate.quad(rad, -self.support_radius, self.support_radius)
            return val
        surface = 2 * np.pi if d == 2 else 4 * np.pi
        val, _ = integrate.quad(
            lambda r: r ** (d - 1) * rad(r), 0.0, self.support_radius
        )
        return surface * val

    def normalization(self, d: int) -> float:
        if self.amplitude is not None:
            return self.amplitude
        return 1.0 / self.ball_integral(d) ** 2

    def evaluate(self, u: np.ndarray, v: np.ndarray, d: int) -> np.ndarray:
        """V on batches of relative coordinates; u, v have shape (..., d)."""
        ru2 = np.sum(u * u, axis=-1)
        rv2 = np.sum(v * v, axis=-1)
        return self.normalization(d) * self._radial(ru2) * self._radial(rv2)


@dataclass(frozen=True)
class ConstantPotential:
    """V identically equal to a constant on the torus (test fixture; already
    periodic, so no rescaling or lattice sum applies)."""

    value: float = 1.0


@dataclass(frozen=True)
class ManyBodyConfig:
    grid: GridSpec
    N: int
    beta: float
    potential: GaussianPotential | ConstantPotential = field(default_factory=GaussianPotential)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("particle count must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")

    @property
    def state_shape(self) -> tuple[int, ...]:
        return self.grid.shape * self.N

    def check_budget(self):
        """Dense state tensors are capped; sweeps beyond the cap may still
        tabulate potentials, which need only (n^d)^2 entries."""
        if self.grid.size**self.N > MEMORY_BUDGET:
            raise MemoryBudgetError(
                f"state tensor would hold {self.grid.size**self.N} entries "
                f"(budget {MEMORY_BUDGET})"
            )


def _wrapped_relative_coords(grid: GridSpec) -> np.ndarray:
    """Relative coordinates of each grid point, wrapped to [-pi, pi)^d;
    shape (n^d, d)."""
    ax = grid.axis_points()
    wrapped = np.mod(ax + np.pi, 2 * np.pi) - np.pi
    grids = np.meshgrid(*([wrapped] * grid.d), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=-1)


@functools.lru_cache(maxsize=None)
def _relative_index_table(d: int, n: int) -> np.ndarray:
    """rel[a, b] = flat grid index of (x_a - x_b) mod 2 pi; shape (n^d, n^d)."""
    m = n**d
    multi = np.array(np.unravel_index(np.arange(m), (n,) * d))  # (d, m)
    diff = (multi[:, :, None] - multi[:, None, :]) % n  # (d, m, m)
    return np.ravel_multi_index(tuple(diff), (n,) * d)


def build_potential(config: ManyBodyConfig) -> np.ndarray:
    """Tabulate the rescaled, periodised two-relative-coordinate interaction.

    Returns W of shape (n^d, n^d) with W[a, b] the interaction strength at
    relative offsets (x_a, x_b).  The scaling exponent N^(2 d beta) preserves
    the total mass integral W da db at the continuum level.
    """
    grid, N, beta = config.grid, config.N, config.beta
    pot = config.potential
    if isinstance(pot, ConstantPotential):
        return np.full((grid.size, grid.size), float(pot.value))
    scale = float(N) ** beta
    if pot.support_radius / scale < grid.dx / 2.0:
        raise UnderResolvedError(
            f"rescaled support radius {pot.support_radius / scale:.3g} is below "
            f"half a grid spacing {grid.dx / 2.0:.3g}"
        )
    rel = _wrapped_relative_coords(grid)  # (m, d)
    m = grid.size
    W = np.zeros((m, m))
    shifts = np.array(list(itertools.product((-1, 0, 1), repeat=grid.d))) * 2 * np.pi
    for su in shifts:
        u = scale * (rel + su)  # (m, d)
        if np.min(np.sqrt(np.sum(u * u, axis=-1))) > pot.support_radius:
            continue
        for sv in shifts:
            v = scale * (rel + sv)
            if np.min(np.sqrt(np.sum(v * v, axis=-1))) > pot.support_radius:
                continue
            W += pot.evaluate(u[:, None, :], v[None, :, :], grid.d)
    return scale ** (2 * grid.d) * W


@functools.lru_cache(maxsize=16)
def _cached_potential_table(config: ManyBodyConfig) -> np.ndarray:
    return build_potential(config)


def potential_mass(config: ManyBodyConfig) -> float:
    """b0: the grid quadrature of the tabulated interaction, reused downstream
    as the mean-field coupling."""
    W = _cached_potential_table(config)
    return float(W.sum() * config.grid.cell_volume**2)


@functools.lru_cache(maxsize=8)
def _cached_tables_impl(config: ManyBodyConfig):
    config.check_budget()
    grid, N = config.grid, config.N
    W = _cached_potential_table(config)
    rel = _relative_index_table(grid.d, grid.n)
    m = grid.size
    # symmetrised three-body values on the diagonal of the full state grid
    diag = np.zeros((m,) * N) if N >= 3 else None
    if N >= 3:
        flat = [np.arange(m).reshape((1,) * s + (m,) + (1,) * (N - 1 - s)) for s in range(N)]
        for i, j, k in itertools.combinations(range(N), 3):
            a, b, c = flat[i], flat[j], flat[k]
            vbar = (
                W[rel[a, b], rel[a, c]]
                + W[rel[b, a], rel[b, c]]
                + W[rel[c, a], rel[c, b]]
            ) / 3.0
            diag = diag + vbar
        diag = diag / N**2
        diag = diag.reshape(config.state_shape)
    # kinetic multiplier sum_j |xi_j|^2 on the full spectral grid
    one = _xi_squared(grid.d, grid.n)
    kin = np.zeros(config.state_shape)
    for s in range(N):
        shape = [1] * (grid.d * N)
        shape[s * grid.d : (s + 1) * grid.d] = list(grid.shape)
        kin = kin + one.reshape(shape)
    return W, diag, kin


def _cached_tables(config: ManyBodyConfig):
    return _cached_tables_impl(config)


def symmetrized_triple_value(config: ManyBodyConfig) -> np.ndarray:
    """Centre-averaged interaction on triples of flat grid indices, shape
    (m, m, m); used by the Hamiltonian diagonal and hierarchy contractions."""
    W = _cached_potential_table(config)
    rel = _relative_index_table(config.grid.d, config.grid.n)
    m = config.grid.size
    if m**3 > MEMORY_BUDGET:
        raise MemoryBudgetError("triple-value table exceeds the memory budget")
    a = np.arange(m)[:, None, None]
    b = np.arange(m)[None, :, None]
    c = np.arange(m)[None, None, :]
    return (
        W[rel[a, b], rel[a, c]] + W[rel[b, a], rel[b, c]] + W[rel[c, a], rel[c, b]]
    ) / 3.0


class BosonicState:
    """Symmetric N-particle complex tensor on (grid)^N.

    amps has shape grid.shape * N; slot j occupies axes [j*d, (j+1)*d).
    """

    def __init__(self, config: ManyBodyConfig, amps: np.ndarray, normalize: bool = False):
        config.check_budget()
        self.config = config
        amps = np.asarray(amps, dtype=np.complex128).reshape(config.state_shape)
        if normalize:
            nrm = np.sqrt(np.sum(np.abs(amps) ** 2) * config.grid.cell_volume**config.N)
            if nrm == 0:
                raise ValueError("cannot normalize the zero state")
            amps = amps / nrm
        self.amps = amps

    # -- constructors ----------------------------------------------------

    @classmethod
    def factorized(cls, config: ManyBodyConfig, phi: TorusField) -> "BosonicState":
        v = phi.values.reshape(-1)
        v = v / np.sqrt(np.sum(np.abs(v) ** 2) * config.grid.cell_volume)
        amps = v
        for _ in range(config.N - 1):
            amps = np.multiply.outer(amps, v)
        return cls(config, amps)

    @classmethod
    def random_symmetric(
        cls, config: ManyBodyConfig, rng: np.random.Generator, band: int | None = None
    ) -> "BosonicState":
        grid = config.grid
        shape = config.state_shape
        raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        if band is not None:
            raw = np.fft.fftn(raw)
            mask_1 = np.abs(grid.axis_frequencies()) <= band
            for ax in range(grid.d * config.N):
                sl = [None] * (grid.d * config.N)
                sl[ax] = slice(None)
                raw *= mask_1.reshape([(grid.n if ax == a else 1) for a in range(grid.d * config.N)])
            raw = np.fft.ifftn(raw)
        st = cls(config, raw)
        return st.symmetrized()

    # -- structure --------------------------------------------------------

    def norm(self) -> float:
        return float(
            np.sqrt(np.sum(np.abs(self.amps) ** 2) * self.config.grid.cell_volume**self.config.N)
        )

    def _slot_permuted(self, perm: tuple[int, ...]) -> np.ndarray:
        d, N = self.config.grid.d, self.config.N
        axes = []
        for slot in perm:
            axes.extend(range(slot * d, (slot + 1) * d))
        return np.transpose(self.amps, axes)

    def symmetrized(self) -> "BosonicState":
        N = self.config.N
        acc = np.zeros_like(self.amps)
        for perm in itertools.permutations(range(N)):
            acc += self._slot_permuted(perm)
        acc /= math.factorial(N)
        return BosonicState(self.config, acc, normalize=True)

    def symmetry_residual(self) -> float:
        N = self.config.N
        nrm = self.norm()
        if N == 1 or nrm == 0:
            return 0.0
        worst = 0.0
        for s in range(N - 1):
            perm = list(range(N))
            perm[s], perm[s + 1] = perm[s + 1], perm[s]
            diff = self.amps - self._slot_permuted(tuple(perm))
            worst = max(
                worst,
                np.sqrt(np.sum(np.abs(diff) ** 2) * self.config.grid.cell_volume**N) / nrm,
            )
        return float(worst)

    def inner(self, other: "BosonicState") -> complex:
        return complex(
            np.vdot(self.amps, other.amps) * self.config.grid.cell_volume**self.config.N
        )


# -- Hamiltonian --------------------------------------------------------


def apply_hamiltonian_raw(config: ManyBodyConfig, amps: np.ndarray) -> np.ndarray:
    """H amps, matrix-free: spectral kinetic part plus diagonal potential."""
    _, diag, kin = _cached_tables(config)
    out = np.fft.ifftn(kin * np.fft.fftn(amps))
    if diag is not None:
        out = out + diag * amps
    return out


def apply_hamiltonian(psi: BosonicState) -> np.ndarray:
    return apply_hamiltonian_raw(psi.config, psi.amps)


def hamiltonian_norm_estimate(config: ManyBodyConfig) -> float:
    _, diag, kin = _cached_tables(config)
    est = float(kin.max())
    if diag is not None:
        est += float(diag.max())
    return est


def energy(psi: BosonicState) -> float:
    return float(np.real(np.vdot(psi.amps, apply_hamiltonian(psi)))
                 * psi.config.grid.cell_volume**psi.config.N)


def energy_per_particle(psi: BosonicState) -> float:
    return energy(psi) / psi.config.N


def energy_moment(psi: BosonicState, k: int) -> float:
    """<psi, (H/N + 1)^k psi>, by repeated application of H."""
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    v = psi.amps
    for _ in range(k):
        v = apply_hamiltonian_raw(psi.config, v) / psi.config.N + v
    val = np.vdot(psi.amps, v) * psi.config.grid.cell_volume**psi.config.N
    return float(np.real(val))


# -- Lanczos propagation ---------------------------------------------------


def _lanczos_expm_step(config, v: np.ndarray, t: float, kdim: int, tol: float):
    """One Krylov step: approximate exp(-i t H) v; returns (result, err_est)."""
    shape = v.shape
    v0 = v.reshape(-1)
    beta0 = np.linalg.norm(v0)
    if beta0 == 0.0:
        return v, 0.0
    basis = [v0 / beta0]
    alphas: list[float] = []
    betas: list[float] = []
    for j in range(kdim):
        w = apply_hamiltonian_raw(config, basis[j].reshape(shape)).reshape(-1)
        a = np.real(np.vdot(basis[j], w))
        w = w - a * basis[j]
        if j > 0:
            w = w - betas[j - 1] * basis[j - 1]
        # full reorthogonalization (kdim is small, states are large)
        for b in basis:
            w = w - np.vdot(b, w) * b
        alphas.append(float(a))
        b = float(np.linalg.norm(w))
        if b < 1e-14 * max(abs(a), 1.0):
            betas.append(0.0)
            break
        betas.append(b)
        basis.append(w / b)
    mdim = len(alphas)
    evals, evecs = eigh_tridiagonal(np.array(alphas), np.array(betas[: mdim - 1]))
    e1 = evecs[0, :]
    small = evecs @ (np.exp(-1j * t * evals) * e1)
    out = np.zeros_like(v0)
    for c, b in zip(small, basis[:mdim]):
        out += c * b
    # a posteriori estimate: weight escaping the Krylov space in the last
    # direction, scaled by the next off-diagonal coupling
    err = abs(small[-1]) * (betas[mdim - 1] if mdim - 1 < len(betas) else 0.0) * abs(t)
    return (beta0 * out).reshape(shape), float(err)


def propagate(
    psi: BosonicState,
    t: float,
    steps: int | None = None,
    kdim: int = 20,
    tol: float = 1e-11,
    max_retries: int = 3,
) -> BosonicState:
    """exp(-i t H) psi via Lanczos substeps.

    The substep count defaults to keeping ||H|| * dt <= 2, which with the
    default Krylov dimension puts the local error well below tol; if the
    a posteriori estimate still exceeds the budget the substep is split.
    """
    if t == 0.0:
        return BosonicState(psi.config, psi.amps.copy())
    if steps is None:
        hnorm = hamiltonian_norm_estimate(psi.config)
        steps = max(1, int(np.ceil(abs(t) * hnorm / 2.0)))
    for attempt in range(max_retries + 1):
        dt = t / steps
        amps = psi.amps
        budget = tol / steps
        ok = True
        for _ in range(steps):
            amps, err = _lanczos_expm_step(psi.config, amps, dt, kdim, budget)
            if err > budget:
                ok = False
                break
        if ok:
            return BosonicState(psi.config, amps)
        steps *= 2
    raise PropagationToleranceError(
        f"Krylov propagation failed to meet tol={tol} after {max_retries} substep splits"
    )


# -- energy-moment inequality probe ----------------------------------------


def _sobolev_slot_weights(config: ManyBodyConfig, orders: list[float]) -> np.ndarray:
    """prod_j (1+|xi_j|^2)^(orders[j]/2) on the full spectral grid."""
    grid, N = config.grid, config.N
    one = 1.0 + _xi_squared(grid.d, grid.n)
    out = np.ones(config.state_shape)
    for s, a in enumerate(orders):
        if a == 0.0:
            continue
        shape = [1] * (grid.d * N)
        shape[s * grid.d : (s + 1) * grid.d] = list(grid.shape)
        out = out * one.reshape(shape) ** (a / 2.0)
    return out


def weighted_sobolev_norm_sq(psi: BosonicState, orders: list[float]) -> float:
    """|| prod_j <grad_j>^{orders[j]} psi ||^2, computed spectrally."""
    grid, N = psi.config.grid, psi.config.N
    coeffs = np.fft.fftn(psi.amps) / grid.size**N
    w = _sobolev_slot_weights(psi.config, orders)
    return float(grid.volume**N * np.sum(w**2 * np.abs(coeffs) ** 2))


def stability_check(psi: BosonicState, k: int, c1: float) -> dict:
    """Compare the k-th energy moment with the weighted Sobolev lower bound.

    lhs = <psi, (H/N + 1)^k psi>;
    rhs = c1^k ( ||S^(1,k) psi||^2 + (1/N) ||S_1 S^(1,k-1) psi||^2 )
    where S^(1,k) weights slots 1..k by <grad> and S_1 adds one more power
    on slot 1.  The bound is a large-N statement: at desk-scale N the
    satisfied flag is reported, not asserted.
    """
    N = psi.config.N
    if not 0.0 <= c1 <= 1.0:
        raise ValueError("c1 must lie in [0, 1]")
    if not 1 <= k <= N:
        raise ValueError("requires 1 <= k <= N")
    lhs = energy_moment(psi, k)
    orders_a = [1.0] * k + [0.0] * (N - k)
    if k == 1:
        orders_b = [1.0] + [0.0] * (N - 1)
    else:
        orders_b = [2.0] + [1.0] * (k - 2) + [0.0] * (N - k + 1)
    term_a = weighted_sobolev_norm_sq(psi, orders_a)
    term_b = weighted_sobolev_norm_sq(psi, orders_b)
    rhs = c1**k * (term_a + term_b / N)
    return {"lhs": lhs, "rhs": rhs, "satisfied": bool(lhs >= rhs)}
