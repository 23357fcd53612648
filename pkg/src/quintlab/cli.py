"""Experiment orchestration: configuration validation, dispatch, artifacts.

Usage:  lab <subcommand> --config <path> [--seed S] [--out DIR]

Subcommands: nls-run, manybody-run, chaos, residuals, hufl, couplings, probe.
Configs are JSON objects; every parameter is validated against the owning
module's preconditions before dispatch and unknown keys are rejected.  All
randomness derives from the single config seed through numpy's PCG64
generator, so rerunning a config reproduces every numeric artifact
byte-for-byte.  Exit codes: 0 pass, 1 in-run tolerance failure,
2 validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import io as qio
from .couplings import (
    classify_couplings,
    double_factorial,
    enumerate_collapse_maps,
    min_unclogged,
    raw_summand_count,
)
from .grids import GridSpec, TorusField
from .manybody import (
    BosonicState,
    ConstantPotential,
    GaussianPotential,
    ManyBodyConfig,
    energy_per_particle,
    potential_mass,
    propagate,
    energy_moment,
    stability_check,
)
from .marginals import (
    bbgky_residual,
    chaos_experiment,
    gp_residual,
    hufl_left_side,
    marginal,
    rank_one_marginal,
)
from .nls import NlsConfig, energy_nls, energy_split, evolve, frequency_diagnostics
from .probes import PROBE_RUNNERS

SCHEMA_VERSION = 1

KINDS = ("nls-run", "manybody-run", "chaos", "residuals", "hufl", "couplings", "probe")


class ValidationError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class ExperimentConfig:
    kind: str
    params: dict
    seed: int = 0

    @classmethod
    def from_file(cls, path, seed_override=None) -> "ExperimentConfig":
        raw = json.loads(Path(path).read_text())
        return cls.from_dict(raw, seed_override)

    @classmethod
    def from_dict(cls, raw: dict, seed_override=None) -> "ExperimentConfig":
        errors = []
        kind = raw.get("kind")
        if kind not in KINDS:
            errors.append(f"kind: must be one of {KINDS}, got {kind!r}")
        seed = raw.get("seed", 0)
        if not isinstance(seed, int):
            errors.append("seed: must be an integer")
        extra = set(raw) - {"kind", "seed", "params"}
        if extra:
            errors.append(f"unknown top-level keys: {sorted(extra)}")
        params = raw.get("params", {})
        if not isinstance(params, dict):
            errors.append("params: must be an object")
            params = {}
        if errors:
            raise ValidationError(errors)
        if seed_override is not None:
            seed = seed_override
        cfg = cls(kind, params, seed)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "params": self.params}

    def validate(self):
        schema = _SCHEMAS[self.kind]
        errors = []
        for key in self.params:
            if key not in schema:
                errors.append(f"params.{key}: unknown key for kind {self.kind}")
        for key, (required, check, msg) in schema.items():
            if key not in self.params:
                if required:
                    errors.append(f"params.{key}: required")
                continue
            if not check(self.params[key]):
                errors.append(f"params.{key}: {msg}")
        if errors:
            raise ValidationError(errors)


def _is_pos(x):
    return isinstance(x, (int, float)) and x > 0


def _is_nonneg(x):
    return isinstance(x, (int, float)) and x >= 0


def _is_dim(x):
    return isinstance(x, int) and x in (1, 2, 3)


def _is_gridn(x):
    return isinstance(x, int) and x >= 4 and x % 2 == 0


def _is_posint(x):
    return isinstance(x, int) and x >= 1


def _is_list(x):
    return isinstance(x, list) and len(x) > 0


def _is_initial(x):
    return isinstance(x, dict) and x.get("kind") in ("modes", "random_band", "constant", "file")


def _is_potential(x):
    return isinstance(x, dict) and x.get("kind") in ("gaussian", "constant")


def _is_bool(x):
    return isinstance(x, bool)


_SCHEMAS = {
    "nls-run": {
        "d": (True, _is_dim, "must be 1, 2 or 3"),
        "n": (True, _is_gridn, "must be an even integer >= 4"),
        "b0": (True, _is_nonneg, "must be >= 0 (defocusing)"),
        "dt": (True, _is_pos, "must be > 0"),
        "T": (True, _is_nonneg, "must be >= 0"),
        "dealias": (False, _is_bool, "must be a boolean"),
        "snapshot_every": (False, _is_posint, "must be a positive integer"),
        "initial": (True, _is_initial, "must be a modes/random_band/constant object"),
        "split_M": (False, _is_pos, "must be > 0"),
        "diagnostics_M": (False, _is_list, "must be a nonempty list"),
        "mass_tol": (False, _is_pos, "must be > 0"),
    },
    "manybody-run": {
        "d": (True, _is_dim, "must be 1, 2 or 3"),
        "n": (True, _is_gridn, "must be an even integer >= 4"),
        "N": (True, _is_posint, "must be a positive integer"),
        "beta": (True, _is_nonneg, "must be >= 0"),
        "potential": (False, _is_potential, "must be a gaussian/constant object"),
        "T": (True, _is_nonneg, "must be >= 0"),
        "steps": (False, _is_posint, "must be a positive integer"),
        "initial": (True, _is_initial, "must be a modes/random_band/constant object"),
        "moments": (False, _is_list, "must be a nonempty list"),
        "stability": (False, _is_list, "must be a nonempty list"),
        "dump_state": (False, _is_bool, "must be a boolean"),
        "norm_tol": (False, _is_pos, "must be > 0"),
        "energy_tol": (False, _is_pos, "must be > 0"),
    },
    "chaos": {
        "d": (True, _is_dim, "must be 1, 2 or 3"),
        "n": (True, _is_gridn, "must be an even integer >= 4"),
        "beta": (True, _is_nonneg, "must be >= 0"),
        "T": (True, _is_nonneg, "must be >= 0"),
        "Ns": (True, _is_list, "must be a nonempty list"),
        "initial": (True, _is_initial, "must be a modes/random_band/constant object"),
        "potential": (False, _is_potential, "must be a gaussian/constant object"),
        "nls_dt": (False, _is_pos, "must be > 0"),
    },
    "residuals": {
        "d": (True, _is_dim, "must be 1, 2 or 3"),
        "n": (True, _is_gridn, "must be an even integer >= 4"),
        "N": (True, _is_posint, "must be a positive integer"),
        "beta": (True, _is_nonneg, "must be >= 0"),
        "k": (True, _is_posint, "must be a positive integer"),
        "spacings": (True, _is_list, "must be a nonempty list"),
        "initial": (True, _is_initial, "must be a modes/random_band/constant object"),
        "potential": (False, _is_potential, "must be a gaussian/constant object"),
    },
    "hufl": {
        "d": (True, _is_dim, "must be 1, 2 or 3"),
        "n": (True, _is_gridn, "must be an even integer >= 4"),
        "initial": (True, _is_initial, "must be a modes/random_band/constant object"),
        "M": (True, _is_pos, "must be > 0"),
        "eps": (True, _is_pos, "must be > 0"),
        "ks": (True, _is_list, "must be a nonempty list"),
    },
    "couplings": {
        "k": (True, _is_posint, "must be a positive integer"),
    },
    "probe": {
        "lemma": (True, lambda x: x in PROBE_RUNNERS, f"must be one of {sorted(PROBE_RUNNERS)}"),
        "samples": (False, _is_posint, "must be a positive integer"),
        "options": (False, lambda x: isinstance(x, dict), "must be an object"),
    },
}


def build_initial_field(grid: GridSpec, spec: dict, seed: int) -> TorusField:
    kind = spec["kind"]
    if kind == "file":
        f = qio.load_field(spec["path"])
        if f.grid != grid:
            raise ValidationError(["params.initial.path: field grid does not match d/n"])
        return f
    if kind == "constant":
        return TorusField.constant(grid, spec.get("value", 1.0))
    if kind == "modes":
        modes = {}
        for entry in spec["modes"]:
            xi = tuple(int(v) for v in entry[0]) if isinstance(entry[0], list) else (int(entry[0]),)
            amp = complex(entry[1], entry[2] if len(entry) > 2 else 0.0)
            modes[xi] = amp
        f = TorusField.from_modes(grid, modes)
    else:
        rng = np.random.default_rng(seed)
        f = TorusField.random_band_limited(
            grid, int(spec.get("band", grid.n // 4)), rng, decay=float(spec.get("decay", 2.0))
        )
    scale = spec.get("scale")
    if spec.get("normalize", False) or scale is not None:
        f = f * (float(scale or 1.0) / f.l2_norm())
    return f


def build_potential_spec(spec: dict | None):
    if spec is None:
        return GaussianPotential()
    if spec["kind"] == "constant":
        return ConstantPotential(float(spec.get("value", 1.0)))
    kwargs = {}
    if "sigma" in spec:
        kwargs["sigma"] = float(spec["sigma"])
    if "amplitude" in spec:
        kwargs["amplitude"] = float(spec["amplitude"])
    return GaussianPotential(**kwargs)


@dataclass
class RunReport:
    kind: str
    config: dict
    wall_time_s: float = 0.0
    artifacts: list[str] = dc_field(default_factory=list)
    summary: dict = dc_field(default_factory=dict)
    checks: dict = dc_field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "config": self.config,
            "wall_time_s": self.wall_time_s,
            "artifacts": self.artifacts,
            "summary": self.summary,
            "checks": self.checks,
            "passed": self.passed,
            "schema_version": self.schema_version,
        }


def _run_nls(cfg: ExperimentConfig, out: Path, report: RunReport):
    p = cfg.params
    grid = GridSpec(p["d"], p["n"])
    nls_cfg = NlsConfig(grid, float(p["b0"]), float(p["dt"]), p.get("dealias", True))
    f0 = build_initial_field(grid, p["initial"], cfg.seed)
    split_m = p.get("split_M", grid.nyquist // 2)
    diag_ms = p.get("diagnostics_M", [grid.nyquist // 2])
    traj = evolve(f0, float(p["T"]), nls_cfg, p.get("snapshot_every", 1))
    header = ["t", "mass", "E_NLS", "E_L", "E_H"] + [f"high_kinetic_M{m}" for m in diag_ms]
    rows = []
    for t, u in zip(traj.times, traj.states):
        e_l, e_h = energy_split(u, split_m, nls_cfg.b0)
        row = [t, u.l2_norm(), energy_nls(u, nls_cfg.b0), e_l, e_h]
        row += [frequency_diagnostics(u, m, grid.nyquist)["high_kinetic"] for m in diag_ms]
        rows.append(row)
    path = out / "timeseries.csv"
    qio.write_csv(path, header, rows)
    report.artifacts.append(str(path))
    mass0 = rows[0][1]
    drift = max(abs(r[1] - mass0) for r in rows) / mass0
    tol = p.get("mass_tol", 1e-11)
    report.summary.update({"snapshots": len(rows), "mass_drift": drift, "split_M": split_m})
    report.checks["mass_conserved"] = drift <= tol


def _run_manybody(cfg: ExperimentConfig, out: Path, report: RunReport):
    p = cfg.params
    grid = GridSpec(p["d"], p["n"])
    mb = ManyBodyConfig(grid, p["N"], float(p["beta"]), build_potential_spec(p.get("potential")))
    if p["initial"]["kind"] == "file":
        psi0 = qio.load_state(mb, p["initial"]["path"])
    else:
        phi = build_initial_field(grid, p["initial"], cfg.seed)
        psi0 = BosonicState.factorized(mb, phi)
    e0 = energy_per_particle(psi0)
    psi = propagate(psi0, float(p["T"]), steps=p.get("steps")) if p["T"] > 0 else psi0
    eT = energy_per_particle(psi)
    moments = {str(k): energy_moment(psi, int(k)) for k in p.get("moments", [1, 2])}
    stability = [
        {"k": int(k), "c1": float(c1), **stability_check(psi, int(k), float(c1))}
        for k, c1 in p.get("stability", [])
    ]
    norm_drift = abs(psi.norm() - 1.0)
    energy_drift = abs(eT - e0) / max(abs(e0), 1.0)
    payload = {
        "coupling_b0": potential_mass(mb),
        "energy_per_particle": eT,
        "moments": moments,
        "stability": stability,
        "norm_drift": norm_drift,
        "energy_drift": energy_drift,
    }
    path = out / "manybody.json"
    qio.write_json(path, payload)
    report.artifacts.append(str(path))
    if p.get("dump_state", False):
        spath = out / "state.qlf"
        qio.dump_state(psi, spath)
        report.artifacts.append(str(spath))
    report.summary.update(payload)
    report.checks["norm_preserved"] = norm_drift <= p.get("norm_tol", 1e-10)
    report.checks["energy_preserved"] = energy_drift <= p.get("energy_tol", 1e-8)


def _run_chaos(cfg: ExperimentConfig, out: Path, report: RunReport):
    p = cfg.params
    grid = GridSpec(p["d"], p["n"])
    phi0 = build_initial_field(grid, p["initial"], cfg.seed)
    phi0 = phi0 * (1.0 / phi0.l2_norm())
    rows = chaos_experiment(
        [int(N) for N in p["Ns"]],
        float(p["beta"]),
        phi0,
        float(p["T"]),
        potential=build_potential_spec(p.get("potential")),
        nls_dt=p.get("nls_dt"),
    )
    path = out / "chaos.csv"
    qio.write_csv(
        path,
        ["N", "t", "trace_distance", "energy_per_particle"],
        [[r.N, p["T"], r.distance, r.energy_per_particle] for r in rows],
    )
    report.artifacts.append(str(path))
    dists = {r.N: r.distance for r in rows}
    report.summary.update({"distances": {str(k): v for k, v in dists.items()}})
    ns = sorted(dists)
    report.checks["distance_not_increasing_in_N"] = (
        dists[ns[-1]] <= dists[ns[0]] * 1.2 + 1e-12 if len(ns) > 1 else True
    )


def _run_residuals(cfg: ExperimentConfig, out: Path, report: RunReport):
    p = cfg.params
    grid = GridSpec(p["d"], p["n"])
    mb = ManyBodyConfig(grid, p["N"], float(p["beta"]), build_potential_spec(p.get("potential")))
    phi0 = build_initial_field(grid, p["initial"], cfg.seed)
    phi0 = phi0 * (1.0 / phi0.l2_norm())
    b0 = potential_mass(mb)
    k = int(p["k"])
    psi0 = BosonicState.factorized(mb, phi0)
    rows = []
    for h in [float(h) for h in p["spacings"]]:
        snaps = [propagate(psi0, t) for t in (0.0, h, 2 * h)]
        rb = bbgky_residual(snaps, np.array([0.0, h, 2 * h]), k)
        traj = evolve(phi0, 2 * h, NlsConfig(grid, b0, h / 4, dealias=False), snapshot_every=4)
        rg = gp_residual(traj, k, b0)
        rows.append([h, rb, rg])
    path = out / "residuals.csv"
    qio.write_csv(path, ["dt", "bbgky_residual", "gp_residual"], rows)
    report.artifacts.append(str(path))
    if len(rows) > 1:
        report.summary["bbgky_ratio"] = rows[0][1] / rows[-1][1]
        report.summary["gp_ratio"] = rows[0][2] / rows[-1][2]
    report.checks["residuals_finite"] = all(np.isfinite(r[1]) and np.isfinite(r[2]) for r in rows)


def _run_hufl(cfg: ExperimentConfig, out: Path, report: RunReport):
    p = cfg.params
    grid = GridSpec(p["d"], p["n"])
    phi = build_initial_field(grid, p["initial"], cfg.seed)
    phi = phi * (1.0 / phi.l2_norm())
    rows = []
    for k in [int(k) for k in p["ks"]]:
        lhs = hufl_left_side(rank_one_marginal(phi, k), float(p["M"]))
        bound = float(p["eps"]) ** (2 * k)
        rows.append([k, lhs, bound, lhs <= bound])
    path = out / "hufl.csv"
    qio.write_csv(path, ["k", "left_side", "bound", "passed"], rows)
    report.artifacts.append(str(path))
    report.summary["all_passed"] = all(bool(r[3]) for r in rows)
    report.checks["finite"] = all(np.isfinite(r[1]) for r in rows)


def _run_couplings(cfg: ExperimentConfig, out: Path, report: RunReport):
    k = int(cfg.params["k"])
    maps = enumerate_collapse_maps(k)
    counts = raw_summand_count(k)
    payload = {
        "k": k,
        "map_count": len(maps),
        "bound_2_3k_minus_1": 2 ** (3 * k - 1),
        "double_factorial": double_factorial(2 * k - 1),
        "raw_count_bruteforce": counts["brute_force"],
        "raw_count_printed_formula": counts["printed_formula"],
    }
    if 2 <= k <= 7:
        mu = min_unclogged(k)
        witness = mu.pop("witnessing_expansion")
        payload["min_unclogged"] = mu
        payload["witness"] = {
            "targets": list(witness.collapse.targets),
            "signs": ["+" if s > 0 else "-" for s in witness.signs],
            "unclogged_levels": sorted(classify_couplings(witness)["unclogged"]),
        }
    path = out / "couplings.json"
    qio.write_json(path, payload)
    report.artifacts.append(str(path))
    report.summary.update(payload)
    report.checks["count_within_bound"] = payload["map_count"] <= payload["bound_2_3k_minus_1"]
    if "min_unclogged" in payload:
        report.checks["unclogged_floor"] = (
            payload["min_unclogged"]["min_count"] >= payload["min_unclogged"]["floor"]
        )


def _run_probe(cfg: ExperimentConfig, out: Path, report: RunReport):
    p = cfg.params
    runner = PROBE_RUNNERS[p["lemma"]]
    kwargs = dict(p.get("options", {}))
    if "samples" in p:
        kwargs["samples"] = p["samples"]
    probe_report = runner(seed=cfg.seed, **kwargs)
    jpath = out / f"probe_{p['lemma']}.json"
    qio.write_json(jpath, probe_report.to_dict())
    cpath = out / f"probe_{p['lemma']}.csv"
    qio.write_csv(
        cpath,
        ["parameters", "max_ratio"],
        [[key, val] for key, val in sorted(probe_report.ratio_table.items())],
    )
    report.artifacts.extend([str(jpath), str(cpath)])
    report.summary.update(
        {"max_ratio": probe_report.max_ratio, "stability_factor": probe_report.stability_factor}
    )
    report.checks["sampling_stable"] = probe_report.stability_factor < 1.5


_RUNNERS = {
    "nls-run": _run_nls,
    "manybody-run": _run_manybody,
    "chaos": _run_chaos,
    "residuals": _run_residuals,
    "hufl": _run_hufl,
    "couplings": _run_couplings,
    "probe": _run_probe,
}


def run_experiment(cfg: ExperimentConfig, out_dir) -> RunReport:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(kind=cfg.kind, config=cfg.to_dict())
    t0 = time.perf_counter()
    try:
        _RUNNERS[cfg.kind](cfg, out, report)
    except Exception:
        for art in report.artifacts:
            Path(art).unlink(missing_ok=True)
        raise
    report.wall_time_s = time.perf_counter() - t0
    qio.write_json(out / "report.json", report.to_dict())
    report.artifacts.append(str(out / "report.json"))
    return report


def emit_plotdata(report: RunReport, out_dir=None) -> list[str]:
    """Columnar .dat copies of every CSV artifact plus a plotting stub."""
    written = []
    for art in report.artifacts:
        path = Path(art)
        if path.suffix != ".csv" or not path.exists():
            continue
        lines = path.read_text().strip().split("\n")
        header = lines[0].split(",")
        dat = path.with_suffix(".dat")
        body = ["# " + "  ".join(header)]
        for line in lines[1:]:
            body.append("  ".join(line.split(",")))
        dat.write_text("\n".join(body) + "\n")
        written.append(str(dat))
    if written:
        base = Path(written[0]).parent
        stub = base / "plot_stub.py"
        stub.write_text(
            "import sys\n"
            "import numpy as np\n"
            "import matplotlib.pyplot as plt\n\n"
            "for path in sys.argv[1:]:\n"
            "    data = np.loadtxt(path, comments='#')\n"
            "    data = np.atleast_2d(data)\n"
            "    for col in range(1, data.shape[1]):\n"
            "        plt.plot(data[:, 0], data[:, col], label=f'{path}:{col}')\n"
            "plt.legend()\n"
            "plt.savefig('plot.png', dpi=150)\n"
        )
        written.append(str(stub))
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lab",
        description="Numerical laboratory for the quintic NLS on the torus "
        "and its bosonic many-body counterpart.",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", type=str, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", type=str, default=None)
        sp.add_argument("--plotdata", action="store_true")
        if kind == "couplings":
            sp.add_argument("--k", type=int, default=None)
        if kind == "probe":
            sp.add_argument("--lemma", type=str, default=None)
    args = parser.parse_args(argv)
    try:
        if args.config is not None:
            cfg = ExperimentConfig.from_file(args.config, seed_override=args.seed)
            if cfg.kind != args.kind:
                raise ValidationError(
                    [f"kind: config says {cfg.kind!r} but subcommand is {args.kind!r}"]
                )
        else:
            params = {}
            if args.kind == "couplings" and args.k is not None:
                params = {"k": args.k}
            elif args.kind == "probe" and args.lemma is not None:
                params = {"lemma": args.lemma}
            else:
                raise ValidationError(["--config is required for this subcommand"])
            cfg = ExperimentConfig.from_dict(
                {"kind": args.kind, "params": params, "seed": args.seed or 0}
            )
    except ValidationError as err:
        for e in err.errors:
            print(f"validation error: {e}", file=sys.stderr)
        return 2
    out_dir = args.out or f"runs/{args.kind}"
    try:
        report = run_experiment(cfg, out_dir)
    except ValidationError as err:
        for e in err.errors:
            print(f"validation error: {e}", file=sys.stderr)
        return 2
    if args.plotdata:
        emit_plotdata(report)
    status = "PASS" if report.passed else "TOLERANCE-FAIL"
    print(f"[{status}] {cfg.kind}: artifacts in {out_dir}")
    for name, ok in report.checks.items():
        print(f"  check {name}: {'ok' if ok else 'FAILED'}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
