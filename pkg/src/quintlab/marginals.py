"""Marginal density matrices, trace metrics, hierarchy residuals, and the
propagation-of-chaos experiment.

Marginals carry the quadrature weight dx^d per particle folded into the
matrix, so the matrix trace equals the kernel-integral trace and operator
compositions can be written as plain matrix products.

The coupled evolution equations satisfied by the marginals of an N-body
state, for the Hamiltonian of the manybody module, are assembled here with
their exact finite-N coefficients (derived, and verified in the tests, by
differentiating the partial trace):

  i d/dt g^(k) = sum_{j<=k} [-Lap_j, g^(k)]
               + (1/N^2)           sum_{i<j<l<=k} [Vbar_{ijl}, g^(k)]
               + (N-k)/N^2         sum_{i<j<=k}   Tr_{k+1} [Vbar_{i,j,k+1}, g^(k+1)]
               + (N-k)(N-k-1)/(2 N^2) sum_{j<=k}  Tr_{k+1,k+2} [Vbar_{j,k+1,k+2}, g^(k+2)]

The mean-field counterpart replaces the last contraction with the on-diagonal
collapse weighted by the coupling b0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .grids import GridSpec, TorusField, _mask_leq, _xi_squared
from .manybody import (
    BosonicState,
    ManyBodyConfig,
    energy_per_particle,
    potential_mass,
    propagate,
    symmetrized_triple_value,
)
from .nls import NlsConfig, Trajectory, evolve


@dataclass
class KthMarginal:
    """Reduced density matrix over the k-particle grid basis.

    matrix has shape (n^d)^k x (n^d)^k and includes the quadrature weight
    (2 pi / n)^(d k), making it trace-one for a normalized state.
    """

    k: int
    grid: GridSpec
    matrix: np.ndarray

    @property
    def dx_weight(self) -> float:
        return self.grid.cell_volume

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_residual(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T)).min())

    def permutation_residual(self) -> float:
        """Deviation from bosonic symmetry under simultaneous slot swaps."""
        if self.k == 1:
            return 0.0
        m = self.grid.size
        t = self.matrix.reshape((m,) * (2 * self.k))
        worst = 0.0
        scale = np.abs(self.matrix).max()
        for s in range(self.k - 1):
            perm = list(range(2 * self.k))
            perm[s], perm[s + 1] = perm[s + 1], perm[s]
            perm[self.k + s], perm[self.k + s + 1] = perm[self.k + s + 1], perm[self.k + s]
            worst = max(worst, float(np.abs(t - np.transpose(t, perm)).max()))
        return worst / max(scale, 1e-300)


def marginal(psi: BosonicState, k: int) -> KthMarginal:
    """Partial trace of |psi><psi| over slots k+1..N, quadrature-weighted."""
    N = psi.config.N
    if not 1 <= k <= N:
        raise ValueError(f"require 1 <= k <= N, got k={k}, N={N}")
    m = psi.config.grid.size
    a = psi.amps.reshape(m**k, m ** (N - k))
    mat = (a @ a.conj().T) * psi.config.grid.cell_volume**N
    return KthMarginal(k, psi.config.grid, mat)


def rank_one_marginal(phi: TorusField, k: int = 1) -> KthMarginal:
    """|phi><phi|^(x)k as a weighted matrix (phi is normalized first)."""
    v = phi.values.reshape(-1)
    v = v / np.sqrt(np.sum(np.abs(v) ** 2) * phi.grid.cell_volume)
    vk = v
    for _ in range(k - 1):
        vk = np.multiply.outer(vk, v).reshape(-1)
    mat = np.outer(vk, vk.conj()) * phi.grid.cell_volume**k
    return KthMarginal(k, phi.grid, mat)


def partial_trace_last(g: KthMarginal) -> KthMarginal:
    """Tr_{k} g^(k) -> g^(k-1); weights are already folded in."""
    if g.k < 2:
        raise ValueError("nothing left to trace out")
    m = g.grid.size
    t = g.matrix.reshape(m ** (g.k - 1), m, m ** (g.k - 1), m)
    return KthMarginal(g.k - 1, g.grid, np.trace(t, axis1=1, axis2=3))


def trace_distance(a: KthMarginal, b: KthMarginal) -> float:
    """Tr |a - b|: the sum of singular values of the difference."""
    if a.matrix.shape != b.matrix.shape:
        raise ValueError("marginals have different shapes")
    return float(np.linalg.svd(a.matrix - b.matrix, compute_uv=False).sum())


# -- hierarchy residuals ---------------------------------------------------


def _kinetic_commutator(mat: np.ndarray, grid: GridSpec, k: int) -> np.ndarray:
    """sum_{j<=k} [-Lap_j, g] on a weighted marginal matrix."""
    m = grid.size
    t = mat.reshape(grid.shape * (2 * k))
    xi2 = _xi_squared(grid.d, grid.n)
    out = np.zeros_like(t)
    for j in range(k):
        row_axes = tuple(range(j * grid.d, (j + 1) * grid.d))
        col_axes = tuple(range((k + j) * grid.d, (k + j + 1) * grid.d))
        shape_row = [1] * (2 * k * grid.d)
        for i, ax in enumerate(row_axes):
            shape_row[ax] = grid.n
        shape_col = [1] * (2 * k * grid.d)
        for i, ax in enumerate(col_axes):
            shape_col[ax] = grid.n
        lap_row = np.fft.ifftn(
            xi2.reshape(shape_row) * np.fft.fftn(t, axes=row_axes), axes=row_axes
        )
        lap_col = np.fft.ifftn(
            xi2.reshape(shape_col) * np.fft.fftn(t, axes=col_axes), axes=col_axes
        )
        out = out + lap_row - lap_col
    return out.reshape(m**k, m**k)


def _letters(count: int) -> list[str]:
    return list("abcdefghijklmnopqrstuvwxyz"[:count])


def _contract_once(gmat: np.ndarray, vbar: np.ndarray, grid: GridSpec, k: int,
                   i: int, j: int) -> np.ndarray:
    """Tr_{k+1} [Vbar(x_i, x_j, x_{k+1}), g^(k+1)] for slot labels i<j<=k."""
    m = grid.size
    t = gmat.reshape((m,) * (2 * (k + 1)))
    rows = _letters(k + 1)
    cols = [c.upper() for c in rows]
    rows[-1] = "z"
    cols[-1] = "z"
    spec_in = "".join(rows) + "".join(cols)
    out_rows = "".join(rows[:-1])
    out_cols = "".join(cols[:-1])
    # V on the row variables of slots i, j and the traced slot
    plus = np.einsum(f"{rows[i]}{rows[j]}z,{spec_in}->{out_rows}{out_cols}", vbar, t)
    # V on the column (primed) variables of slots i, j and the traced slot
    minus = np.einsum(f"{spec_in},{cols[i]}{cols[j]}z->{out_rows}{out_cols}", t, vbar)
    return (plus - minus).reshape(m**k, m**k)


def _contract_twice(gmat: np.ndarray, vbar: np.ndarray, grid: GridSpec, k: int,
                    j: int) -> np.ndarray:
    """Tr_{k+1,k+2} [Vbar(x_j, x_{k+1}, x_{k+2}), g^(k+2)] for slot j<=k."""
    m = grid.size
    t = gmat.reshape((m,) * (2 * (k + 2)))
    rows = _letters(k + 2)
    cols = [c.upper() for c in rows]
    rows[-2], rows[-1] = "y", "z"
    cols[-2], cols[-1] = "y", "z"
    spec_in = "".join(rows) + "".join(cols)
    out_rows = "".join(rows[:-2])
    out_cols = "".join(cols[:-2])
    plus = np.einsum(f"{rows[j]}yz,{spec_in}->{out_rows}{out_cols}", vbar, t)
    minus = np.einsum(f"{spec_in},{cols[j]}yz->{out_rows}{out_cols}", t, vbar)
    return (plus - minus).reshape(m**k, m**k)


def bbgky_rhs(config: ManyBodyConfig, psi: BosonicState, k: int) -> np.ndarray:
    """Right-hand side of the k-th marginal evolution equation at a state."""
    N = config.N
    if k > N - 2:
        raise ValueError("two-contraction term needs k <= N - 2")
    grid = config.grid
    gk = marginal(psi, k).matrix
    gk1 = marginal(psi, k + 1).matrix
    gk2 = marginal(psi, k + 2).matrix
    vbar = symmetrized_triple_value(config)
    rhs = _kinetic_commutator(gk, grid, k).astype(np.complex128)
    # intra-cluster commutator (diagonal multiplication on rows minus columns)
    if k >= 3:
        m = grid.size
        t = gk.reshape((m,) * (2 * k))
        for i, j, l in itertools.combinations(range(k), 3):
            rows = _letters(k)
            cols = [c.upper() for c in rows]
            spec = "".join(rows) + "".join(cols)
            vr = f"{rows[i]}{rows[j]}{rows[l]}"
            vc = f"{cols[i]}{cols[j]}{cols[l]}"
            comm = np.einsum(f"{vr},{spec}->{spec}", vbar, t) - np.einsum(
                f"{spec},{vc}->{spec}", t, vbar
            )
            rhs += (1.0 / N**2) * comm.reshape(m**k, m**k)
    if k >= 2:
        coef = (N - k) / N**2
        for i, j in itertools.combinations(range(k), 2):
            rhs += coef * _contract_once(gk1, vbar, grid, k, i, j)
    coef2 = (N - k) * (N - k - 1) / (2.0 * N**2)
    for j in range(k):
        rhs += coef2 * _contract_twice(gk2, vbar, grid, k, j)
    return rhs


def bbgky_residual(snapshots: list[BosonicState], times: np.ndarray, k: int) -> float:
    """Frobenius norm of i d/dt g^(k) minus the hierarchy right-hand side.

    The time derivative is a centred difference at the middle snapshot, so at
    least three uniformly spaced snapshots are required.
    """
    if len(snapshots) < 3:
        raise ValueError("need at least 3 snapshots")
    times = np.asarray(times, dtype=float)
    h = times[1] - times[0]
    if not np.allclose(np.diff(times), h, rtol=1e-8):
        raise ValueError("snapshots must be uniformly spaced")
    mid = len(snapshots) // 2
    config = snapshots[mid].config
    gp = marginal(snapshots[mid + 1], k).matrix
    gm = marginal(snapshots[mid - 1], k).matrix
    lhs = 1j * (gp - gm) / (2.0 * h)
    rhs = bbgky_rhs(config, snapshots[mid], k)
    return float(np.linalg.norm(lhs - rhs))


# -- mean-field (factorized) hierarchy --------------------------------------


def collapse_contraction(gmat: np.ndarray, grid: GridSpec, k: int, j: int,
                         primed: bool) -> np.ndarray:
    """On-diagonal collapse of slots k+1, k+2 onto slot j of g^(k+2).

    Pins both collapsed coordinates (rows and columns) to the slot-j row
    coordinate (primed=False) or column coordinate (primed=True); each
    collapsed pair contributes a dx^(-d) weight so the output matrix keeps
    the k-particle weight convention.
    """
    m = grid.size
    t = gmat.reshape((m,) * (2 * (k + 2)))
    rows = _letters(k + 2)
    cols = [c.upper() for c in rows]
    anchor = rows[j] if not primed else cols[j]
    rows[-2] = rows[-1] = anchor
    cols[-2] = cols[-1] = anchor
    spec_in = "".join(rows) + "".join(cols)
    out = "".join(rows[:-2]) + "".join(cols[:-2])
    diag = np.einsum(f"{spec_in}->{out}", t)
    return diag.reshape(m**k, m**k) / grid.cell_volume**2


def gp_rhs(phi: TorusField, k: int, b0: float) -> np.ndarray:
    """Mean-field hierarchy right-hand side at a factorized state."""
    grid = phi.grid
    gk = rank_one_marginal(phi, k).matrix
    gk2 = rank_one_marginal(phi, k + 2).matrix
    rhs = _kinetic_commutator(gk, grid, k).astype(np.complex128)
    for j in range(k):
        bplus = collapse_contraction(gk2, grid, k, j, primed=False)
        bminus = collapse_contraction(gk2, grid, k, j, primed=True)
        rhs += b0 * (bplus - bminus)
    return rhs


def gp_residual(phi_traj: Trajectory, k: int, b0: float) -> float:
    """Frobenius residual of the factorized mean-field hierarchy at the middle
    snapshot of an NLS trajectory."""
    if len(phi_traj) < 3:
        raise ValueError("need at least 3 snapshots")
    mid = len(phi_traj) // 2
    h = phi_traj.spacing
    gp = rank_one_marginal(phi_traj.states[mid + 1], k).matrix
    gm = rank_one_marginal(phi_traj.states[mid - 1], k).matrix
    lhs = 1j * (gp - gm) / (2.0 * h)
    rhs = gp_rhs(phi_traj.states[mid], k, b0)
    return float(np.linalg.norm(lhs - rhs))


def nls_residual_lifted(phi_traj: Trajectory, b0: float) -> float:
    """The k=1 factorized hierarchy residual assembled directly from fields:
    i d/dt (phi phi*) against |h phi><phi| - |phi><h phi| with
    h phi = -Lap phi + b0 |phi|^4 phi.  Algebraically identical to
    gp_residual(traj, 1, b0); kept as an independent assembly route."""
    mid = len(phi_traj) // 2
    h = phi_traj.spacing
    grid = phi_traj.states[mid].grid

    def unit_values(f):
        v = f.values.reshape(-1)
        return v / np.sqrt(np.sum(np.abs(v) ** 2) * grid.cell_volume)

    vp = unit_values(phi_traj.states[mid + 1])
    vm = unit_values(phi_traj.states[mid - 1])
    v0 = unit_values(phi_traj.states[mid])
    lhs = 1j * (np.outer(vp, vp.conj()) - np.outer(vm, vm.conj())) / (2.0 * h)
    xi2 = _xi_squared(grid.d, grid.n)
    lap = (np.fft.ifftn(xi2 * np.fft.fftn(v0.reshape(grid.shape)))).reshape(-1)
    hv = lap + b0 * np.abs(v0) ** 4 * v0
    rhs = np.outer(hv, v0.conj()) - np.outer(v0, hv.conj())
    return float(np.linalg.norm((lhs - rhs) * grid.cell_volume))


# -- frequency-localization check on marginals -------------------------------


def hufl_left_side(g: KthMarginal, m_cut: float) -> float:
    """Tr S^(1,k) P_{>M}^(k) g P_{>M}^(k) S^(1,k) with per-slot weights.

    The weights are commuting per-slot Fourier multipliers, so by cyclicity
    the trace equals Tr (S^2 P)^(x k) g, evaluated with one transform pair
    per slot on the row side only.
    """
    grid = g.grid
    w2 = (1.0 + _xi_squared(grid.d, grid.n)) * (~_mask_leq(grid.d, grid.n, m_cut))
    t = g.matrix.reshape(grid.shape * (2 * g.k))
    for j in range(g.k):
        row_axes = tuple(range(j * grid.d, (j + 1) * grid.d))
        shape_row = [1] * (2 * g.k * grid.d)
        for ax in row_axes:
            shape_row[ax] = grid.n
        t = np.fft.ifftn(w2.reshape(shape_row) * np.fft.fftn(t, axes=row_axes), axes=row_axes)
    m = grid.size
    return float(np.real(np.trace(t.reshape(m**g.k, m**g.k))))


def hufl_check(gammas: list[KthMarginal], m_cut: float, eps: float) -> dict[int, bool]:
    """Hierarchical frequency-localization test: left side <= eps^(2k) per k."""
    return {g.k: hufl_left_side(g, m_cut) <= eps ** (2 * g.k) for g in gammas}


# -- the propagation-of-chaos experiment -------------------------------------


def mean_field_flow(
    phi0: TorusField, T: float, dt: float, config: ManyBodyConfig
) -> TorusField:
    """Self-consistent one-particle flow matched to the N-body model:

        i d/dt phi = -Lap phi + (1/2) [ int Vbar(x,y,z) |phi(y)|^2 |phi(z)|^2 dy dz ] phi

    The 1/2 is the large-N limit of the per-particle triple count over N^2.
    Strang splitting with the effective potential refreshed each half step;
    used as the matched comparison target for the unconcentrated
    (beta = 0) convergence trend, where the concentrated quintic flow is
    not the limit.
    """
    grid = config.grid
    v3 = symmetrized_triple_value(config)
    dxw = grid.cell_volume
    v = phi0.values.reshape(-1).copy()
    v = v / np.sqrt(np.sum(np.abs(v) ** 2) * dxw)
    xi2 = _xi_squared(grid.d, grid.n).reshape(-1)
    steps = int(round(T / dt))

    def half_rotation(vals):
        rho = np.abs(vals) ** 2
        veff = 0.5 * np.einsum("xyz,y,z->x", v3, rho, rho) * dxw**2
        return np.exp(-1j * veff * dt / 2.0) * vals

    for _ in range(steps):
        v = half_rotation(v)
        spec = np.fft.fftn(v.reshape(grid.shape))
        v = np.fft.ifftn(np.exp(-1j * xi2.reshape(grid.shape) * dt) * spec).reshape(-1)
        v = half_rotation(v)
    return TorusField.from_values(grid, v.reshape(grid.shape))


@dataclass
class ChaosRow:
    N: int
    distance: float
    energy_per_particle: float
    coupling: float


def chaos_experiment(
    Ns: list[int],
    beta: float,
    phi0: TorusField,
    T: float,
    potential=None,
    nls_dt: float | None = None,
    propagate_kwargs: dict | None = None,
) -> list[ChaosRow]:
    """Distance between the one-particle marginal of the evolved N-body state
    and the mean-field projector, for each N.

    The mean-field side evolves phi0 under the quintic NLS with coupling b0
    equal to the grid mass of the tabulated interaction.
    """
    grid = phi0.grid
    rows = []
    nls_dt = nls_dt if nls_dt is not None else T / 200 if T > 0 else 0.01
    propagate_kwargs = propagate_kwargs or {}
    for N in Ns:
        kwargs = {"potential": potential} if potential is not None else {}
        config = ManyBodyConfig(grid, N, beta, **kwargs)
        b0 = potential_mass(config)
        psi0 = BosonicState.factorized(config, phi0)
        psiT = propagate(psi0, T, **propagate_kwargs) if T > 0 else psi0
        g1 = marginal(psiT, 1)
        if T > 0:
            steps = max(1, int(round(T / nls_dt)))
            cfg = NlsConfig(grid, b0, T / steps)
            phiT = evolve(phi0, T, cfg, snapshot_every=steps).states[-1]
        else:
            phiT = phi0
        rows.append(
            ChaosRow(
                N=N,
                distance=trace_distance(g1, rank_one_marginal(phiT, 1)),
                energy_per_particle=energy_per_particle(psiT),
                coupling=b0,
            )
        )
    return rows
