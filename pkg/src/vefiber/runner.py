"""Batch front end: config-driven runs, sweeps, tables, and validation.

A run configuration is a JSON-compatible dict with nested sections
(forcing, sim, init, sweep, theory, optimize).  parse_config resolves
every default into a canonical dict, so the manifest written next to the
outputs is sufficient to re-create the run exactly; re-running any config
byte-reproduces the CSVs.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from importlib import metadata as _ilmd
from pathlib import Path

import numpy as np

from .beambasis import build_basis, eval_psi_int
from .diagnostics import (
    displacement,
    h1_norm,
    kappa_bar_midpoints,
    standard_observables,
    write_observables_csv,
    write_study_csv,
)
from .forcing import (
    DEFAULT_OMEGA,
    ForcingSpec,
    ModalProfile,
    PolynomialProfile,
    TabulatedProfile,
    WaveProfile,
    load_profile_csv,
)
from .simcore import (
    FilamentState,
    SimParams,
    eigenmode_state,
    integrate,
    midpoints,
    straight_state,
    write_trajectory_csv,
)
from .theory import (
    FluidParams,
    avg_speed_newtonian,
    avg_speed_ve,
    optimize_forcing,
    write_coefficient_csv,
    write_speed_grid_csv,
)

__all__ = [
    "MODES", "PRESETS", "ConfigError", "RunConfig", "parse_config",
    "config_from_manifest", "run",
]

MODES = ("simulate", "sweep", "theory-table", "optimize", "validate")

_PROFILE_KINDS = ("polynomial", "wave", "modal", "tabulated")
_INIT_KINDS = ("straight", "eigenmode", "perturbed")

_SECTIONS = ("forcing", "sim", "init", "sweep", "theory", "optimize")
_TOP_KEYS = ("mode", "out", "seed", "sample_interval") + _SECTIONS


class ConfigError(ValueError):
    """Configuration rejection carrying the offending field and reason."""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


# -- presets ----------------------------------------------------------------

_PARABOLA = {"kind": "polynomial", "coeffs": [1.0, -2.0, 1.0]}

PRESETS: dict[str, dict] = {
    # curvature drive F1 = F2 = normalized (s-1)^2; the (mu, delta=1) grid
    # reproduces the reference displacement table
    "bad-swimmer": {
        "mode": "sweep",
        "forcing": {"f1": _PARABOLA, "f2": _PARABOLA},
        "sim": {"N": 100, "mu": 1.0, "delta": 1.0, "t_end": 2.0},
        "sweep": {"mus": [0.0, 1.0, 2.0, 4.0, 8.0], "deltas": [1.0]},
    },
    # quarter-phase sin/cos pair: a curvature wave traveling down the fiber
    "traveling-wave": {
        "mode": "simulate",
        "forcing": {
            "f1": {"kind": "wave", "wave": "sin", "q": 6.283185307179586},
            "f2": {"kind": "wave", "wave": "cos", "q": 6.283185307179586},
            "amplitude": 0.1,
        },
        "sim": {"N": 100, "mu": 1.0, "delta": 1.0, "t_end": 2.0},
    },
    # unforced decay of the slowest beam mode (linear relaxation rates)
    "relaxation": {
        "mode": "simulate",
        "init": {"kind": "eigenmode", "mode": 1, "amplitude": 1e-3},
        "sim": {"N": 100, "mu": 1.0, "delta": 1.0, "t_end": 2.0},
        "sample_interval": 0.01,
    },
    # dyadic relaxation-time refinement; the extra mismatch column records
    # the periodic-regime H1 size of kappa_bar - xi per grid point
    "delta-study": {
        "mode": "sweep",
        "forcing": {"f1": _PARABOLA, "f2": _PARABOLA},
        "sim": {"N": 100, "mu": 1.0, "delta": 1.0, "t_end": 0.3125},
        "sample_interval": 0.001953125,
        "sweep": {"mus": [1.0], "deltas": [1e-2, 2.5e-3, 6.25e-4],
                  "record_mismatch": True},
    },
}


# -- config parsing ---------------------------------------------------------

def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = val
    return out


def _number(section: dict, key: str, field: str, default, minimum=None,
            allow_none=False):
    val = section.get(key, default)
    if val is None and allow_none:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(field, f"expected a number, got {val!r}")
    if minimum is not None and val < minimum:
        raise ConfigError(field, f"must be >= {minimum}, got {val}")
    return float(val)


def _integer(section: dict, key: str, field: str, default, minimum=None):
    val = section.get(key, default)
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(field, f"expected an integer, got {val!r}")
    if minimum is not None and val < minimum:
        raise ConfigError(field, f"must be >= {minimum}, got {val}")
    return int(val)


def _check_keys(section: dict, allowed, field: str):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{field}.{key}" if field else key,
                              f"unknown key; allowed: {', '.join(allowed)}")


def _canon_profile(desc, field: str):
    """Validate a profile descriptor and return its canonical dict form."""
    if desc is None:
        return None
    if not isinstance(desc, dict):
        raise ConfigError(field, f"expected an object or null, got {desc!r}")
    kind = desc.get("kind")
    if kind not in _PROFILE_KINDS:
        raise ConfigError(f"{field}.kind",
                          f"must be one of {_PROFILE_KINDS}, got {kind!r}")
    if kind in ("polynomial", "modal"):
        _check_keys(desc, ("kind", "coeffs"), field)
        coeffs = desc.get("coeffs")
        if (not isinstance(coeffs, (list, tuple)) or not coeffs
                or any(isinstance(c, bool) or not isinstance(c, (int, float))
                       for c in coeffs)):
            raise ConfigError(f"{field}.coeffs",
                              "expected a non-empty list of numbers")
        return {"kind": kind, "coeffs": [float(c) for c in coeffs]}
    if kind == "wave":
        _check_keys(desc, ("kind", "wave", "q", "prefactor"), field)
        wave = desc.get("wave")
        if wave not in ("sin", "cos"):
            raise ConfigError(f"{field}.wave",
                              f"must be 'sin' or 'cos', got {wave!r}")
        q = _number(desc, "q", f"{field}.q", None)
        pref = _number(desc, "prefactor", f"{field}.prefactor", 1.0)
        return {"kind": "wave", "wave": wave, "q": q, "prefactor": pref}
    # tabulated
    _check_keys(desc, ("kind", "path"), field)
    path = desc.get("path")
    if not isinstance(path, str) or not path:
        raise ConfigError(f"{field}.path", "expected a file path string")
    path = os.path.abspath(path)
    if not os.path.exists(path):
        raise ConfigError(f"{field}.path", f"no such file: {path}")
    return {"kind": "tabulated", "path": path}


def _build_profile(desc):
    if desc is None:
        return None
    kind = desc["kind"]
    if kind == "polynomial":
        return PolynomialProfile(desc["coeffs"])
    if kind == "wave":
        return WaveProfile(desc["wave"], desc["q"], desc["prefactor"])
    if kind == "modal":
        return ModalProfile(desc["coeffs"], build_basis(len(desc["coeffs"])))
    return load_profile_csv(desc["path"])


@dataclass
class RunConfig:
    """A fully resolved run: domain objects plus the canonical raw dict."""

    mode: str
    forcing: ForcingSpec
    sim: SimParams
    mus: tuple
    deltas: tuple
    out: str | None
    sample_interval: float
    init: dict
    theory_modes: int
    theory_harmonics: int
    opt_modes: int
    opt_random_trials: int
    seed: int
    record_mismatch: bool
    raw: dict

    @property
    def run_id(self) -> str:
        """Deterministic short identifier derived from the resolved config."""
        blob = json.dumps(self.raw, sort_keys=True).encode()
        return hashlib.sha1(blob).hexdigest()[:10]


def parse_config(data: dict | None = None, preset: str | None = None,
                 mode: str | None = None, out: str | None = None) -> RunConfig:
    """Resolve (preset <- config file <- explicit overrides) into a RunConfig.

    Raises ConfigError(field, reason) on the first invalid field.
    """
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                "preset", f"unknown preset {preset!r}; "
                f"available: {', '.join(sorted(PRESETS))}")
        merged = copy.deepcopy(PRESETS[preset])
    else:
        merged = {}
    if data is not None:
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be an object")
        merged = _deep_merge(merged, copy.deepcopy(data))
    if mode is not None:
        merged["mode"] = mode
    if out is not None:
        merged["out"] = out

    _check_keys(merged, _TOP_KEYS, "")
    run_mode = merged.get("mode")
    if run_mode not in MODES:
        raise ConfigError("mode", f"must be one of {MODES}, got {run_mode!r}")
    out_dir = merged.get("out")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("out", f"expected a directory path string, got {out_dir!r}")
    seed = _integer(merged, "seed", "seed", 0, minimum=0)

    for key in _SECTIONS:
        if not isinstance(merged.get(key, {}), dict):
            raise ConfigError(key, "must be an object")

    # forcing
    fsec = merged.get("forcing", {})
    _check_keys(fsec, ("f1", "f2", "omega", "amplitude", "normalize"), "forcing")
    f1_desc = _canon_profile(fsec.get("f1"), "forcing.f1")
    f2_desc = _canon_profile(fsec.get("f2"), "forcing.f2")
    omega = _number(fsec, "omega", "forcing.omega", DEFAULT_OMEGA)
    amplitude = _number(fsec, "amplitude", "forcing.amplitude", 1.0)
    normalize = fsec.get("normalize", True)
    if not isinstance(normalize, bool):
        raise ConfigError("forcing.normalize", f"expected true/false, got {normalize!r}")
    try:
        forcing = ForcingSpec(f1=_build_profile(f1_desc), f2=_build_profile(f2_desc),
                              omega=omega, amplitude=amplitude, normalize=normalize)
    except ValueError as exc:
        raise ConfigError("forcing", str(exc)) from exc

    # sim
    ssec = merged.get("sim", {})
    _check_keys(ssec, ("N", "gamma", "mu", "delta", "reltol", "abstol",
                       "dt_init", "dt_max", "boundary_row_mode",
                       "curvature_stencil", "t_end"), "sim")
    N = _integer(ssec, "N", "sim.N", 100)
    gamma = _number(ssec, "gamma", "sim.gamma", 1.0, minimum=0.0)
    mu = _number(ssec, "mu", "sim.mu", 0.0, minimum=0.0)
    delta = _number(ssec, "delta", "sim.delta", 0.0, minimum=0.0)
    reltol = _number(ssec, "reltol", "sim.reltol", 1e-6)
    abstol = _number(ssec, "abstol", "sim.abstol", 1e-8)
    dt_init = _number(ssec, "dt_init", "sim.dt_init", 1e-6)
    dt_max = _number(ssec, "dt_max", "sim.dt_max", None, allow_none=True)
    boundary = ssec.get("boundary_row_mode", "consistent")
    stencil = ssec.get("curvature_stencil", "central")
    t_end = _number(ssec, "t_end", "sim.t_end", 2.0)
    try:
        sim = SimParams(
            N=N, fluid=FluidParams(gamma=gamma, mu=mu, delta=delta, omega=omega),
            reltol=reltol, abstol=abstol, dt_init=dt_init,
            dt_max=np.inf if dt_max is None else dt_max,
            boundary_row_mode=boundary, curvature_stencil=stencil, t_end=t_end)
    except ValueError as exc:
        raise ConfigError("sim", str(exc)) from exc

    # initial state
    isec = merged.get("init", {})
    kind = isec.get("kind", "straight")
    if kind not in _INIT_KINDS:
        raise ConfigError("init.kind", f"must be one of {_INIT_KINDS}, got {kind!r}")
    if kind == "straight":
        _check_keys(isec, ("kind",), "init")
        init = {"kind": "straight"}
    elif kind == "eigenmode":
        _check_keys(isec, ("kind", "mode", "amplitude"), "init")
        init = {"kind": "eigenmode",
                "mode": _integer(isec, "mode", "init.mode", 1, minimum=1),
                "amplitude": _number(isec, "amplitude", "init.amplitude", 1e-3)}
    else:
        _check_keys(isec, ("kind", "seed", "amplitude", "modes"), "init")
        init = {"kind": "perturbed",
                "seed": _integer(isec, "seed", "init.seed", 0, minimum=0),
                "amplitude": _number(isec, "amplitude", "init.amplitude", 1e-3),
                "modes": _integer(isec, "modes", "init.modes", 4, minimum=1)}

    # sweep axes
    wsec = merged.get("sweep", {})
    _check_keys(wsec, ("mus", "deltas", "record_mismatch"), "sweep")
    axes = {}
    for key in ("mus", "deltas"):
        vals = wsec.get(key, [])
        if (not isinstance(vals, (list, tuple))
                or any(isinstance(v, bool) or not isinstance(v, (int, float))
                       or v < 0 for v in vals)):
            raise ConfigError(f"sweep.{key}",
                              "expected a list of nonnegative numbers")
        axes[key] = tuple(float(v) for v in vals)
    record_mismatch = wsec.get("record_mismatch", False)
    if not isinstance(record_mismatch, bool):
        raise ConfigError("sweep.record_mismatch",
                          f"expected true/false, got {record_mismatch!r}")
    if run_mode == "sweep" and (not axes["mus"] or not axes["deltas"]):
        raise ConfigError("sweep", "sweep mode needs non-empty mus and deltas")

    # theory-table / optimize knobs
    tsec = merged.get("theory", {})
    _check_keys(tsec, ("modes", "harmonics"), "theory")
    theory_modes = _integer(tsec, "modes", "theory.modes", 24, minimum=2)
    theory_harm = _integer(tsec, "harmonics", "theory.harmonics", 1, minimum=1)
    osec = merged.get("optimize", {})
    _check_keys(osec, ("modes", "random_trials"), "optimize")
    opt_modes = _integer(osec, "modes", "optimize.modes", 12, minimum=2)
    opt_trials = _integer(osec, "random_trials", "optimize.random_trials", 0,
                          minimum=0)

    # default sampling: eight per forcing period when driven, else 1% of t_end
    si = _number(merged, "sample_interval", "sample_interval", None,
                 allow_none=True)
    if si is None:
        driven = f1_desc is not None or f2_desc is not None
        si = forcing.period / 8.0 if driven else t_end / 100.0
    if si <= 0 or si > t_end:
        raise ConfigError("sample_interval", f"need 0 < interval <= t_end, got {si}")

    raw = {
        "mode": run_mode,
        "out": out_dir,
        "seed": seed,
        "sample_interval": si,
        "forcing": {"f1": f1_desc, "f2": f2_desc, "omega": omega,
                    "amplitude": amplitude, "normalize": normalize},
        "sim": {"N": N, "gamma": gamma, "mu": mu, "delta": delta,
                "reltol": reltol, "abstol": abstol, "dt_init": dt_init,
                "dt_max": dt_max, "boundary_row_mode": boundary,
                "curvature_stencil": stencil, "t_end": t_end},
        "init": init,
        "sweep": {"mus": list(axes["mus"]), "deltas": list(axes["deltas"]),
                  "record_mismatch": record_mismatch},
        "theory": {"modes": theory_modes, "harmonics": theory_harm},
        "optimize": {"modes": opt_modes, "random_trials": opt_trials},
    }
    return RunConfig(
        mode=run_mode, forcing=forcing, sim=sim,
        mus=axes["mus"], deltas=axes["deltas"], out=out_dir,
        sample_interval=si, init=init, theory_modes=theory_modes,
        theory_harmonics=theory_harm, opt_modes=opt_modes,
        opt_random_trials=opt_trials, seed=seed,
        record_mismatch=record_mismatch, raw=raw)


def config_from_manifest(path) -> RunConfig:
    """Rebuild the RunConfig recorded in a manifest.json."""
    with open(path) as fh:
        manifest = json.load(fh)
    if "config" not in manifest:
        raise ConfigError("manifest", f"no config section in {path}")
    return parse_config(manifest["config"])


# -- execution helpers ------------------------------------------------------

def _dist_version() -> str:
    try:
        return _ilmd.version("vefiber")
    except _ilmd.PackageNotFoundError:
        return "unknown"


def _initial_state(config: RunConfig) -> FilamentState:
    init, N = config.init, config.sim.N
    if init["kind"] == "straight":
        return straight_state(N, config.forcing)
    if init["kind"] == "eigenmode":
        basis = build_basis(init["mode"])
        return eigenmode_state(N, basis.pairs[init["mode"] - 1],
                               amplitude=init["amplitude"])
    basis = build_basis(init["modes"])
    rng = np.random.default_rng(init["seed"])
    coeffs = rng.standard_normal(init["modes"])
    coeffs *= init["amplitude"] / np.linalg.norm(coeffs)
    smid = midpoints(N)
    theta = np.zeros(N)
    for c, pair in zip(coeffs, basis.pairs):
        theta += c * eval_psi_int(pair, smid)
    theta[-1] = theta[-2]  # free-end curvature condition with kappa0 = 0
    return FilamentState(t=0.0, x0=0.0, y0=0.0, theta=theta, xi=np.zeros(N))


def _sample_times(t_end: float, interval: float):
    """Regular sampling grid with the ten snapshot times merged in."""
    n = max(1, int(round(t_end / interval)))
    base = np.linspace(0.0, t_end, n + 1)
    snaps = np.linspace(0.0, t_end, 10)
    merged = np.unique(np.concatenate([base, snaps]))
    keep = np.concatenate([[True], np.diff(merged) > 1e-12 * max(1.0, t_end)])
    return merged[keep], snaps


def _metadata(config: RunConfig) -> dict:
    f = config.sim.fluid
    return {
        "run_id": config.run_id, "mode": config.mode, "N": config.sim.N,
        "gamma": f"{f.gamma:.17g}", "mu": f"{f.mu:.17g}",
        "delta": f"{f.delta:.17g}", "omega": f"{f.omega:.17g}",
        "amplitude": f"{config.forcing.amplitude:.17g}",
        "t_end": f"{config.sim.t_end:.17g}",
    }


def _write_manifest(out_dir: Path, config: RunConfig, outputs, results):
    manifest = {
        "package": "vefiber",
        "version": _dist_version(),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config.raw,
        "outputs": sorted(outputs),
        "results": results,
    }
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _displacement_window(traj, t_end: float):
    """x/y displacement over the second half of the run."""
    t1 = 0.5 * t_end
    dx, dy = displacement(traj, t1, t_end)
    return (t1, t_end), float(dx), float(dy)


# -- the five modes ---------------------------------------------------------

def _run_simulate(config: RunConfig, out_dir: Path) -> int:
    times, snaps = _sample_times(config.sim.t_end, config.sample_interval)
    state = _initial_state(config)
    traj = integrate(state, config.forcing, config.sim, sample_times=times)

    meta = _metadata(config)
    write_trajectory_csv(traj, out_dir / "trajectory.csv", metadata=meta)
    obs = standard_observables(traj, config.forcing, config.sim)
    write_observables_csv(obs, config.run_id, out_dir / "observables.csv",
                          metadata=meta)
    with open(out_dir / "snapshots.csv", "w") as fh:
        for key, val in meta.items():
            fh.write(f"# {key}={val}\n")
        fh.write("t,node,x,y\n")
        for t in snaps:
            s = traj.state_at(t)
            nodes = s.positions()
            for i in range(s.N + 1):
                fh.write(f"{t:.17g},{i},{nodes[i, 0]:.17g},{nodes[i, 1]:.17g}\n")

    window, dx, dy = _displacement_window(traj, config.sim.t_end)
    results = {
        "displacement_window": list(window), "dx": dx, "dy": dy,
        "n_accepted": traj.n_accepted, "n_rejected": traj.n_rejected,
        "nfev": traj.nfev, "njev": traj.njev,
    }
    with open(out_dir / "report.json", "w") as fh:
        json.dump(results, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out_dir, config,
                    ["trajectory.csv", "observables.csv", "snapshots.csv",
                     "report.json"], results)
    print(f"simulate[{config.run_id}]: dx={dx:.6g} dy={dy:.6g} "
          f"over t in [{window[0]:g}, {window[1]:g}] -> {out_dir}")
    return 0


def _sweep_point(raw: dict, mu: float, delta: float) -> dict:
    """One (mu, delta) grid point; executed in a worker process."""
    config = parse_config(raw)
    fluid = replace(config.sim.fluid, mu=mu, delta=delta)
    sim = replace(config.sim, fluid=fluid)
    times, _ = _sample_times(sim.t_end, config.sample_interval)
    state = straight_state(sim.N, config.forcing)
    traj = integrate(state, config.forcing, sim, sample_times=times)
    _, dx, dy = _displacement_window(traj, sim.t_end)
    row = {"mu": mu, "delta": delta, "dx": dx, "dy": dy}
    if config.record_mismatch:
        T = config.forcing.period
        worst = 0.0
        for s in traj.states:
            if s.t >= sim.t_end - T - 1e-12:
                mism = kappa_bar_midpoints(s, config.forcing) - s.xi
                worst = max(worst, h1_norm(mism, sim.N))
        row["mismatch"] = worst
    return row


def _run_sweep(config: RunConfig, out_dir: Path, jobs: int) -> int:
    grid = [(mu, d) for mu in config.mus for d in config.deltas]
    rows: dict[tuple, dict] = {}
    failures: dict[str, str] = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = {pool.submit(_sweep_point, config.raw, mu, d): (mu, d)
                    for mu, d in grid}
            for fut in as_completed(futs):
                point = futs[fut]
                try:
                    rows[point] = fut.result()
                except Exception as exc:
                    failures[f"mu={point[0]:g},delta={point[1]:g}"] = str(exc)
    else:
        for point in grid:
            try:
                rows[point] = _sweep_point(config.raw, *point)
            except Exception as exc:
                failures[f"mu={point[0]:g},delta={point[1]:g}"] = str(exc)

    columns = ["mu", "delta", "status", "dx", "dy"]
    if config.record_mismatch:
        columns.append("mismatch")
    table = []
    for point in grid:  # deterministic order regardless of completion order
        row = rows.get(point)
        if row is None:
            rec = [point[0], point[1], "failed", float("nan"), float("nan")]
            if config.record_mismatch:
                rec.append(float("nan"))
        else:
            rec = [row["mu"], row["delta"], "ok", row["dx"], row["dy"]]
            if config.record_mismatch:
                rec.append(row["mismatch"])
        table.append(rec)
    write_study_csv(table, columns, out_dir / "sweep.csv",
                    metadata=_metadata(config))

    results = {"grid_points": len(grid), "failed": len(failures),
               "failures": failures}
    _write_manifest(out_dir, config, ["sweep.csv"], results)
    for label, msg in failures.items():
        print(f"sweep[{config.run_id}] {label}: FAILED: {msg}", file=sys.stderr)
    print(f"sweep[{config.run_id}]: {len(grid) - len(failures)}/{len(grid)} "
          f"grid points ok -> {out_dir}")
    return 1 if failures else 0


def _run_theory_table(config: RunConfig, out_dir: Path) -> int:
    basis = build_basis(config.theory_modes)
    p = config.sim.fluid
    write_coefficient_csv(out_dir / "coefficients.csv", p, basis,
                          M=config.theory_harmonics)
    outputs = ["coefficients.csv"]
    results: dict = {"modes": config.theory_modes}
    if config.forcing.f1 is not None or config.forcing.f2 is not None:
        a, b = config.forcing.mode_coeffs(basis)
        mus = config.mus if config.mus else (p.mu,)
        deltas = config.deltas if config.deltas else (p.delta,)
        write_speed_grid_csv(out_dir / "speeds.csv", a, b, p, basis,
                             mus, deltas)
        outputs.append("speeds.csv")
        results["U_ve"] = avg_speed_ve(a, b, p, basis)
        results["U_newtonian"] = avg_speed_newtonian(a, b, p, basis)
    _write_manifest(out_dir, config, outputs, results)
    print(f"theory-table[{config.run_id}]: K={config.theory_modes} -> {out_dir}")
    return 0


def _run_optimize(config: RunConfig, out_dir: Path) -> int:
    K = config.opt_modes
    p = config.sim.fluid
    best = optimize_forcing(K, p, seed=config.seed)
    basis = build_basis(K)

    write_study_csv([[k + 1, best.a[k], best.b[k]] for k in range(K)],
                    ["k", "a_k", "b_k"], out_dir / "optimum.csv",
                    metadata=_metadata(config))
    s = np.linspace(0.0, 1.0, 201)
    prof1 = ModalProfile(best.a, basis)
    prof2 = ModalProfile(best.b, basis)
    write_study_csv(np.column_stack([s, prof1.value(s), prof2.value(s)]).tolist(),
                    ["s", "F1", "F2"], out_dir / "optimum_profile.csv",
                    metadata=_metadata(config))

    results = {"speed": best.speed, "iterations": best.iterations,
               "converged": best.converged}
    if config.opt_random_trials > 0:
        rng = np.random.default_rng(config.seed)
        best_random = -np.inf
        for _ in range(config.opt_random_trials):
            v = rng.standard_normal(2 * K)
            v /= np.linalg.norm(v)
            best_random = max(best_random,
                              avg_speed_ve(v[:K], v[K:], p, basis))
        results["best_random"] = float(best_random)
    _write_manifest(out_dir, config,
                    ["optimum.csv", "optimum_profile.csv"], results)
    print(f"optimize[{config.run_id}]: <U>*={best.speed:.6g} "
          f"({best.iterations} iterations) -> {out_dir}")
    return 0


def _run_validate(config: RunConfig, out_dir: Path) -> int:
    from .acceptance import run_all

    records = run_all()
    table = [[r.index, r.name, "PASS" if r.passed else "FAIL", r.detail]
             for r in records]
    write_study_csv(table, ["criterion", "name", "status", "detail"],
                    out_dir / "acceptance_report.csv")
    n_fail = sum(not r.passed for r in records)
    results = {"criteria": len(records), "failed": n_fail}
    _write_manifest(out_dir, config, ["acceptance_report.csv"], results)
    print(f"validate: {len(records) - n_fail}/{len(records)} criteria pass "
          f"-> {out_dir}")
    return 1 if n_fail else 0


def run(config: RunConfig, jobs: int | None = None,
        out: str | None = None) -> int:
    """Execute a resolved configuration; returns a process exit status."""
    out = out if out is not None else config.out
    if not out:
        raise ConfigError("out", "an output directory is required "
                          "(config 'out' or --out)")
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = jobs if jobs is not None else (os.cpu_count() or 1)
    if jobs < 1:
        raise ConfigError("jobs", f"must be >= 1, got {jobs}")

    if config.mode == "simulate":
        return _run_simulate(config, out_dir)
    if config.mode == "sweep":
        return _run_sweep(config, out_dir, jobs)
    if config.mode == "theory-table":
        return _run_theory_table(config, out_dir)
    if config.mode == "optimize":
        return _run_optimize(config, out_dir)
    return _run_validate(config, out_dir)
