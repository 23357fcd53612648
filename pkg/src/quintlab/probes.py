"""Empirical-constant measurement for the inequality lemmas.

Each probe evaluates the ratio (left side)/(right side) of one estimate on
concrete fields, by spectral evaluation in space and trapezoid quadrature in
time.  Probes return 0 on zero inputs and are homogeneous of degree zero
under rescaling of all their field arguments.  The sampling drivers fold a
seeded generator over a parameter grid and report per-tuple maxima plus a
stability figure: the growth of the running maximum between the first half
and the full sample set (an unbounded constant would keep growing).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import next_fast_len

from .grids import (
    FrequencyCube,
    GridSpec,
    TorusField,
    apply_S,
    cube_project,
    dyadic_project,
    pointwise_product,
    project_gt,
    project_leq,
    project_lt,
    sobolev_norm,
)
from .nls import free_propagate


def _trapezoid_times(T: float, nt: int) -> tuple[np.ndarray, np.ndarray]:
    ts = np.linspace(0.0, T, nt)
    w = np.full(nt, T / (nt - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return ts, w


def _next_even(x: float) -> int:
    n = next_fast_len(int(np.ceil(x)))
    while n % 2:
        n = next_fast_len(n + 1)
    return n


def _field_band(f: TorusField) -> int:
    """Largest per-axis |xi| carrying a nonzero coefficient."""
    nz = np.abs(f.coefficients) > 0
    if not nz.any():
        return 0
    ax = np.abs(f.grid.axis_frequencies())
    worst = 0
    for j in range(f.grid.d):
        axes = tuple(a for a in range(f.grid.d) if a != j)
        occupied = nz.any(axis=axes) if axes else nz
        worst = max(worst, int(ax[occupied].max()))
    return worst


def _eval_grid_for_power(band: float, power: int, floor_n: int) -> int:
    """Grid size on which |g|^power of a band-limited g is alias-free."""
    return max(4, floor_n, _next_even(power * band + 2))


def strichartz_ratio(
    f: TorusField,
    m: float,
    p: float,
    T: float,
    nt: int = 64,
    cube: FrequencyCube | None = None,
) -> float:
    """Space-time L^p mass of a frequency-localized free evolution against
    M^(3/2 - 5/p) times the localized datum's L^2 norm.

    Requires d = 3 (the exponent is dimension-specific) and p > 10/3 (the
    bound fails at and below that exponent).  A frequency cube may replace
    the centred cutoff; the Galilean shift leaves the ratio invariant.
    """
    if f.grid.d != 3:
        raise ValueError("the exponent 3/2 - 5/p is specific to d = 3")
    if p <= 10.0 / 3.0:
        raise ValueError("requires p > 10/3")
    if nt < 32:
        raise ValueError("use at least 32 time-quadrature points")
    g = cube_project(f, cube) if cube is not None else project_leq(f, m)
    denom = g.l2_norm()
    if denom == 0.0:
        return 0.0
    band = _field_band(g)
    n_eval = _eval_grid_for_power(band, int(np.ceil(min(p, 8.0))), 8)
    g_fine = g.resample(max(n_eval, 2 * band + 2))
    ts, w = _trapezoid_times(T, nt)
    acc = 0.0
    for t, wt in zip(ts, w):
        u = free_propagate(g_fine, t)
        acc += wt * u.lp_norm(p) ** p
    lhs = acc ** (1.0 / p)
    return lhs / (m ** (1.5 - 5.0 / p) * denom)


def bilinear_strichartz_ratio(
    f1: TorusField,
    f2: TorusField,
    m1: float,
    m2: float,
    delta: float,
    T: float,
    nt: int = 64,
) -> float:
    """Space-time L^2 mass of a product of two shell-localized free
    evolutions against M2^(1/2) (M2/M1 + 1/M2)^delta times the datum norms.
    """
    if m2 > m1:
        raise ValueError("requires m2 <= m1")
    if not 0.0 < delta <= 1.0 / 22.0:
        raise ValueError("delta must lie in (0, 1/22]")
    u1 = dyadic_project(f1, m1)
    u2 = dyadic_project(f2, m2)
    n1, n2 = u1.l2_norm(), u2.l2_norm()
    if n1 == 0.0 or n2 == 0.0:
        return 0.0
    n_eval = _next_even(2 * (m1 + m2) + 2)
    a = u1.resample(max(n_eval, u1.grid.n))
    b = u2.resample(a.grid.n)
    ts, w = _trapezoid_times(T, nt)
    acc = 0.0
    for t, wt in zip(ts, w):
        prod = TorusField.from_values(
            a.grid, free_propagate(a, t).values * free_propagate(b, t).values
        )
        acc += wt * prod.l2_norm() ** 2
    lhs = np.sqrt(acc)
    rhs = np.sqrt(m2) * (m2 / m1 + 1.0 / m2) ** delta * n1 * n2
    return float(lhs / rhs)


def refined_sobolev_ratio(phi: TorusField, m: float, r: float, which: int) -> float:
    """Sextic high/low pairing against the gradient-split right side.

    which = 1, 2, 3 pairs (P_H phi)^(6-w) with (P_L phi)^w for w = 3, 2, 1,
    and divides by the corresponding combination of ||grad phi||, the
    intermediate-band gradient norm, ||grad P_H phi||, and an (M/R) power.
    """
    if which not in (1, 2, 3):
        raise ValueError("which must be 1, 2 or 3")
    if r < m:
        raise ValueError("requires r >= m")
    low_power = {1: 3, 2: 2, 3: 1}[which]
    high_power = 6 - low_power
    ph = project_gt(phi, m)
    pl = project_leq(phi, m)
    if ph.l2_norm() == 0.0:
        return 0.0
    band = _field_band(phi)
    n_eval = _eval_grid_for_power(band, 6, 8)
    vh = ph.resample(n_eval).values
    vl = pl.resample(n_eval).values
    cell = (2 * np.pi / n_eval) ** phi.grid.d
    lhs = abs(np.sum(vh**high_power * vl**low_power) * cell)
    g_all = np.sqrt(phi.gradient_l2_sq())
    g_high = np.sqrt(ph.gradient_l2_sq())
    g_mid = np.sqrt(project_lt(ph, r).gradient_l2_sq())
    mr = m / r
    if which == 1:
        rhs = g_all**3 * (g_mid**2 * g_high + mr**1.5 * g_high**3)
    elif which == 2:
        rhs = g_all**2 * (g_mid**2 * g_high**2 + mr * g_high**4)
    else:
        rhs = g_all * (g_mid**2 * g_high**3 + np.sqrt(mr) * g_high**5)
    if rhs == 0.0:
        return 0.0
    return float(lhs / rhs)


MULTILINEAR_VARIANTS = ("MLFL1", "MLFL2", "Old1", "Old2")


def multilinear_ratio(
    fs: list[TorusField],
    m0: float,
    T: float,
    variant: str,
    nt: int = 32,
) -> float:
    """Quintic product of free evolutions in L^1_T H^s against the
    frequency-split right side.

    MLFL1/Old1 measure the product in H^(-1) and put the first factor in
    H^(-1); MLFL2/Old2 measure in H^1 with all factors in H^1.  The MLFL
    variants split one designated factor at m0 with the weight
    T^(5/22) m0^(5/11) on the low part; the Old variants are the m0 = 0
    reductions.
    """
    if variant not in MULTILINEAR_VARIANTS:
        raise ValueError(f"variant must be one of {MULTILINEAR_VARIANTS}")
    if len(fs) != 5:
        raise ValueError("need exactly five fields")
    if any(f.grid.d != 3 for f in fs):
        raise ValueError("the exponents are specific to d = 3")
    norms = [f.l2_norm() for f in fs]
    if any(n == 0.0 for n in norms):
        return 0.0
    h1 = [sobolev_norm(f, 1.0) for f in fs]
    if variant == "MLFL1":
        split = (
            T ** (5.0 / 22.0) * m0 ** (5.0 / 11.0) * h1[1]
            + project_gt(apply_S(fs[1], 1.0), m0).l2_norm()
        )
        rhs = sobolev_norm(fs[0], -1.0) * split * h1[2] * h1[3] * h1[4]
        s_out = -1.0
    elif variant == "MLFL2":
        split = T ** (5.0 / 22.0) * m0 ** (5.0 / 11.0) * h1[0] + project_gt(
            apply_S(fs[0], 1.0), m0
        ).l2_norm()
        rhs = split * h1[1] * h1[2] * h1[3] * h1[4]
        s_out = 1.0
    elif variant == "Old1":
        rhs = sobolev_norm(fs[0], -1.0) * h1[1] * h1[2] * h1[3] * h1[4]
        s_out = -1.0
    else:
        rhs = h1[0] * h1[1] * h1[2] * h1[3] * h1[4]
        s_out = 1.0
    band = max(_field_band(f) for f in fs)
    n_eval = max(4, _next_even(2 * 5 * band + 2))
    ts, w = _trapezoid_times(T, nt)
    acc = 0.0
    for t, wt in zip(ts, w):
        prod = pointwise_product(*[free_propagate(f, t) for f in fs], pad_to=n_eval)
        acc += wt * sobolev_norm(prod, s_out)
    return float(acc / rhs)


def approx_identity_rate(
    phi: TorusField,
    alphas: list[float],
    observable_order: float = -2.0,
) -> dict:
    """Fit the decay exponent of the smoothing error of a two-variable
    approximate identity tested against a factorized three-particle state.

    The mollifier is a product bump rho_alpha(u, v) = b_alpha(u) b_alpha(v)
    of exact unit grid mass, so the error at scale alpha is

        err(alpha) = | int conj(J phi) phi [ (b_alpha * |phi|^2)^2 - |phi|^4 ] dx |

    with J a fixed smoothing observable.  Returns the least-squares slope of
    log err against log alpha (expected >= 1/2 for H^1 data; smoother data
    decays faster) together with the error table.
    """
    grid = phi.grid
    for a in alphas:
        if a < 4.0 * grid.dx:
            raise ValueError(f"alpha={a} is under-resolved (grid spacing {grid.dx:.3g})")
    if phi.l2_norm() == 0.0:
        return {"slope": 0.0, "alphas": list(alphas), "errors": [0.0] * len(alphas)}
    psi = apply_S(phi, observable_order)  # J phi
    dens = TorusField.from_values(grid, np.abs(phi.values) ** 2)
    weight = (np.conj(psi.values) * phi.values).reshape(-1)
    errors = []
    x = grid.axis_points()
    wrapped = np.mod(x + np.pi, 2 * np.pi) - np.pi
    grids = np.meshgrid(*([wrapped] * grid.d), indexing="ij")
    r2 = sum(gc**2 for gc in grids)
    for a in alphas:
        bump = np.where(np.sqrt(r2) <= a, np.exp(-r2 / (2.0 * (a / 2.0) ** 2)), 0.0)
        bump_field = TorusField.from_values(grid, bump)
        mass = float(np.real(bump_field.coefficients[(0,) * grid.d])) * grid.volume
        bump_field = bump_field * (1.0 / mass)  # exact unit grid mass
        smoothed = TorusField(
            grid, grid.volume * bump_field.coefficients * dens.coefficients
        )
        g = smoothed.values.reshape(-1)
        err = abs(
            np.sum(weight * (g**2 - (np.abs(phi.values.reshape(-1)) ** 2) ** 2))
            * grid.cell_volume
        )
        errors.append(float(err))
    scale = phi.l2_norm() ** 6
    if len(alphas) < 2 or max(errors) <= 1e-14 * scale:
        return {"slope": 0.0, "alphas": list(alphas), "errors": errors}
    logs = np.log(np.maximum(errors, 1e-300))
    slope = float(np.polyfit(np.log(alphas), logs, 1)[0])
    return {"slope": slope, "alphas": list(alphas), "errors": errors}


# -- sampling drivers -------------------------------------------------------


@dataclass
class ProbeReport:
    lemma_id: str
    samples: int
    seed: int
    parameter_grid: list[tuple]
    ratio_table: dict[str, float] = field(default_factory=dict)
    max_ratio: float = 0.0
    half_max_ratio: float = 0.0

    @property
    def stability_factor(self) -> float:
        """Growth of the running maximum from half to full sample count."""
        if self.half_max_ratio == 0.0:
            return 1.0
        return self.max_ratio / self.half_max_ratio

    def to_dict(self) -> dict:
        return {
            "lemma_id": self.lemma_id,
            "samples": self.samples,
            "seed": self.seed,
            "parameter_grid": [list(t) for t in self.parameter_grid],
            "ratio_table": self.ratio_table,
            "max_ratio": self.max_ratio,
            "half_max_ratio": self.half_max_ratio,
            "stability_factor": self.stability_factor,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _collect(lemma_id, seed, samples, grid_tuples, ratio_fn) -> ProbeReport:
    report = ProbeReport(lemma_id, samples, seed, grid_tuples)
    overall = []
    for idx, tup in enumerate(grid_tuples):
        rng = np.random.default_rng([seed, idx])
        vals = [ratio_fn(rng, tup) for _ in range(samples)]
        report.ratio_table[str(tup)] = max(vals)
        overall.append(vals)
    per_sample = [max(col) for col in zip(*overall)] if overall else []
    running = np.maximum.accumulate(per_sample) if per_sample else [0.0]
    report.max_ratio = float(running[-1])
    report.half_max_ratio = float(running[max(len(running) // 2 - 1, 0)])
    return report


def run_strichartz_probe(seed=0, samples=100, ms=(2, 4, 8), p=4.0, T=1.0,
                         nt=40, n=16) -> ProbeReport:
    grid = GridSpec(3, n)

    def fn(rng, tup):
        (m,) = tup
        f = TorusField.random_band_limited(grid, grid.nyquist, rng)
        return strichartz_ratio(f, m, p, T, nt)

    return _collect("strichartz_t3", seed, samples, [(m,) for m in ms], fn)


def run_bilinear_probe(seed=0, samples=12, m1s=(4, 8, 16, 32), m2=4,
                       delta=0.02, T=1.0, nt=33, n=16) -> ProbeReport:
    def fn(rng, tup):
        (m1,) = tup
        grid = GridSpec(3, _next_even(max(n, 2 * m1 + 4)))
        f1 = TorusField.random_band_limited(grid, grid.nyquist, rng)
        f2 = TorusField.random_band_limited(grid, grid.nyquist, rng)
        return bilinear_strichartz_ratio(f1, f2, m1, m2, delta, T, nt)

    return _collect("bilinear_strichartz_t3", seed, samples, [(m1,) for m1 in m1s], fn)


def run_refined_sobolev_probe(seed=0, samples=40, ms=(4, 8), rs=(16, 32),
                              which=3, n=32, band=12) -> ProbeReport:
    grid = GridSpec(3, n)

    def fn(rng, tup):
        m, r = tup
        f = TorusField.random_band_limited(grid, band, rng, decay=1.0)
        return refined_sobolev_ratio(f, m, r, which)

    grid_tuples = [(m, r) for m in ms for r in rs]
    return _collect(f"refined_sobolev_{which}", seed, samples, grid_tuples, fn)


def run_multilinear_probe(seed=0, samples=50, variant="Old1", m0=4.0, T=1.0,
                          nt=32, n=8) -> ProbeReport:
    grid = GridSpec(3, n)

    def fn(rng, tup):
        fields = [
            TorusField.random_band_limited(grid, max(2, n // 4), rng)
            for _ in range(5)
        ]
        return multilinear_ratio(fields, m0, T, variant, nt)

    return _collect(f"multilinear_{variant}", seed, samples, [(variant,)], fn)


def run_approx_identity_probe(seed=0, samples=20, alphas=(0.25, 0.125, 0.0625),
                              n=512, band=40) -> ProbeReport:
    grid = GridSpec(1, n)

    def fn(rng, tup):
        f = TorusField.random_band_limited(grid, band, rng, decay=1.5)
        f = f * (1.0 / f.l2_norm())
        return approx_identity_rate(f, list(alphas))["slope"]

    report = _collect("approx_identity", seed, samples, [tuple(alphas)], fn)
    return report


PROBE_RUNNERS = {
    "strichartz": run_strichartz_probe,
    "bilinear": run_bilinear_probe,
    "refined_sobolev": run_refined_sobolev_probe,
    "multilinear": run_multilinear_probe,
    "approx_identity": run_approx_identity_probe,
}
