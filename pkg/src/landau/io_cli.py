"""Configuration parsing, trajectory persistence, reports, and the CLI.

Config files are flat ``key = value`` text with ``#`` comments; unknown
keys are errors, never silently defaulted.  Trajectories persist as a
scalar CSV (full-precision reprs, so the round trip is bit-exact), raw
little-endian float64 snapshots (row-major, first velocity axis
slowest) with one text sidecar each, and a small JSON index.  A run
manifest is written atomically at the end of every run.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis
from .grid import Field, make_grid
from .solver import (
    AnisotropicGaussian,
    InitialDatum,
    Maxwellian,
    PerturbedMaxwellian,
    SimConfig,
    Trajectory,
    TwoBump,
    run,
)

__all__ = [
    "RunManifest",
    "parse_config",
    "config_to_text",
    "write_trajectory",
    "read_trajectory",
    "write_manifest",
    "cli",
    "main",
]

SCALAR_COLUMNS = (
    "time",
    "dt",
    "mass",
    "momentum_x",
    "momentum_y",
    "momentum_z",
    "energy",
    "entropy",
    "lp_p",
    "linf_h",
    "grad_energy",
    "c0",
)

_FAMILIES = ("maxwellian", "perturbed_maxwellian", "anisotropic_gaussian", "two_bump")

# key -> (python type, family restriction or None)
_SCHEMA: dict[str, tuple[type, str | None]] = {
    "n": (int, None),
    "L": (float, None),
    "t_end": (float, None),
    "cfl": (float, None),
    "p": (float, None),
    "m": (float, None),
    "initial": (str, None),
    "snapshot_every": (int, None),
    "clip_negatives": (bool, None),
    "coefficient_refresh": (int, None),
    "seed": (int, None),
    "amplitude": (float, "perturbed_maxwellian"),
    "mode": (int, "perturbed_maxwellian"),
    "theta": (tuple, "anisotropic_gaussian"),
    "separation": (float, "two_bump"),
    "weights": (tuple, "two_bump"),
}


class ConfigError(ValueError):
    pass


def _parse_value(key: str, raw: str):
    kind, _ = _SCHEMA[key]
    raw = raw.strip()
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind is tuple:
            return tuple(float(part) for part in raw.split(","))
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"key '{key}' expects a {kind.__name__}, got '{raw}'") from exc


def parse_config(path: str | Path) -> SimConfig:
    """Read and validate a flat key-value run configuration."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    entries: dict[str, object] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got '{line.strip()}'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key '{key}'")
        entries[key] = _parse_value(key, raw)

    family = entries.pop("initial", "maxwellian")
    if family not in _FAMILIES:
        raise ConfigError(f"initial must be one of {_FAMILIES}, got '{family}'")
    for key in entries:
        restriction = _SCHEMA[key][1]
        if restriction is not None and restriction != family:
            raise ConfigError(f"key '{key}' is only valid with initial = {restriction}")

    initial: InitialDatum
    try:
        if family == "maxwellian":
            initial = Maxwellian()
        elif family == "perturbed_maxwellian":
            if "amplitude" not in entries:
                raise ConfigError("perturbed_maxwellian requires 'amplitude'")
            initial = PerturbedMaxwellian(
                amplitude=float(entries.pop("amplitude")),
                mode=int(entries.pop("mode", 4)),
            )
        elif family == "anisotropic_gaussian":
            theta = entries.pop("theta", None)
            if theta is None or len(theta) != 3:
                raise ConfigError("anisotropic_gaussian requires 'theta = t1, t2, t3'")
            initial = AnisotropicGaussian(temperatures=tuple(theta))
        else:
            if "separation" not in entries:
                raise ConfigError("two_bump requires 'separation'")
            weights = entries.pop("weights", (0.5, 0.5))
            if len(weights) != 2:
                raise ConfigError("two_bump weights must be two comma-separated numbers")
            initial = TwoBump(separation=float(entries.pop("separation")), weights=tuple(weights))

        kwargs = {("extent" if key == "L" else key): value for key, value in entries.items()}
        if "p" in kwargs and not kwargs["p"] > 1.5:
            raise ConfigError(f"p must exceed 3/2, got {kwargs['p']}")
        return SimConfig(initial=initial, **kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def config_to_text(config: SimConfig) -> str:
    """Serialize a SimConfig back to the flat key-value format."""
    lines = [
        f"n = {config.n}",
        f"L = {config.extent!r}",
        f"t_end = {config.t_end!r}",
        f"cfl = {config.cfl!r}",
        f"p = {config.p!r}",
        f"m = {config.m!r}",
        f"initial = {config.initial.kind}",
    ]
    datum = config.initial
    if isinstance(datum, PerturbedMaxwellian):
        lines += [f"amplitude = {datum.amplitude!r}", f"mode = {datum.mode}"]
    elif isinstance(datum, AnisotropicGaussian):
        lines.append("theta = " + ", ".join(repr(t) for t in datum.temperatures))
    elif isinstance(datum, TwoBump):
        lines.append(f"separation = {datum.separation!r}")
        lines.append("weights = " + ", ".join(repr(w) for w in datum.weights))
    lines += [
        f"snapshot_every = {config.snapshot_every}",
        f"clip_negatives = {str(config.clip_negatives).lower()}",
        f"coefficient_refresh = {config.coefficient_refresh}",
        f"seed = {config.seed}",
    ]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# trajectory persistence


def write_trajectory(traj: Trajectory, directory: str | Path) -> None:
    """Persist scalars (CSV), snapshots (raw f64 + sidecars), and the index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    rows = [",".join(SCALAR_COLUMNS)]
    for row in traj.scalar_table():
        rows.append(",".join(repr(float(x)) for x in row))
    (directory / "scalars.csv").write_text("\n".join(rows) + "\n")

    for i, (t, snap) in enumerate(zip(traj.snapshot_times, traj.snapshots)):
        stem = f"snapshot_{i:06d}"
        (directory / f"{stem}.f64").write_bytes(
            np.ascontiguousarray(snap.values, dtype="<f8").tobytes()
        )
        (directory / f"{stem}.meta").write_text(
            f"n = {traj.grid.n}\nL = {traj.grid.extent!r}\ntime = {t!r}\n"
        )

    index = {
        "n": traj.grid.n,
        "L": traj.grid.extent,
        "p": traj.p,
        "m": traj.m,
        "snapshots": len(traj.snapshots),
        "clipped_mass": traj.clipped_mass,
        "aborted": traj.aborted,
        "abort_time": traj.abort_time,
        "abort_reason": traj.abort_reason,
    }
    (directory / "traj.json").write_text(json.dumps(index, indent=2) + "\n")


def _read_sidecar(path: Path) -> dict[str, str]:
    out = {}
    for line in path.read_text().splitlines():
        if "=" in line:
            key, val = (part.strip() for part in line.split("=", 1))
            out[key] = val
    return out


def read_trajectory(directory: str | Path) -> Trajectory:
    directory = Path(directory)
    index = json.loads((directory / "traj.json").read_text())
    grid = make_grid(index["n"], index["L"])

    lines = (directory / "scalars.csv").read_text().splitlines()
    if lines[0] != ",".join(SCALAR_COLUMNS):
        raise ValueError(f"unexpected scalar header in {directory}/scalars.csv")
    table = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])

    snapshot_times: list[float] = []
    snapshots: list[Field] = []
    for i in range(index["snapshots"]):
        stem = directory / f"snapshot_{i:06d}"
        meta = _read_sidecar(stem.with_suffix(".meta"))
        if int(meta["n"]) != grid.n or float(meta["L"]) != grid.extent:
            raise ValueError(f"snapshot {i} grid (n={meta['n']}, L={meta['L']}) does not match the index")
        raw = np.frombuffer(stem.with_suffix(".f64").read_bytes(), dtype="<f8")
        if raw.size != grid.n**3:
            raise ValueError(f"snapshot {i} has {raw.size} samples, expected {grid.n ** 3}")
        snapshot_times.append(float(meta["time"]))
        snapshots.append(Field(grid, raw.reshape(grid.shape).astype(np.float64)))

    return Trajectory(
        grid=grid,
        p=index["p"],
        m=index["m"],
        times=table[:, 0],
        dt=table[:, 1],
        mass=table[:, 2],
        momentum=table[:, 3:6],
        energy=table[:, 6],
        entropy=table[:, 7],
        lp_p=table[:, 8],
        linf_h=table[:, 9],
        grad_energy=table[:, 10],
        c0=table[:, 11],
        snapshot_times=snapshot_times,
        snapshots=snapshots,
        config=None,
        clipped_mass=index.get("clipped_mass", 0.0),
        aborted=index.get("aborted", False),
        abort_time=index.get("abort_time"),
        abort_reason=index.get("abort_reason"),
    )


@dataclass
class RunManifest:
    config_text: str
    version: str
    started: float
    finished: float
    outputs: list[str]
    abort_reason: str | None = None


def write_manifest(manifest: RunManifest, directory: str | Path) -> None:
    """Atomic write: the manifest appears complete or not at all."""
    directory = Path(directory)
    target = directory / "run_manifest.json"
    tmp = directory / "run_manifest.json.tmp"
    tmp.write_text(json.dumps(dataclasses.asdict(manifest), indent=2) + "\n")
    os.replace(tmp, target)


# --------------------------------------------------------------------------
# subcommands


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        config = parse_config(args.config)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    started = time.time()
    traj = run(config)
    out = Path(args.out)
    write_trajectory(traj, out)
    write_manifest(
        RunManifest(
            config_text=config_to_text(config),
            version=__version__,
            started=started,
            finished=time.time(),
            outputs=sorted(str(p.name) for p in out.iterdir()),
            abort_reason=traj.abort_reason,
        ),
        out,
    )
    status = f"aborted at t={traj.abort_time:.4f}: {traj.abort_reason}" if traj.aborted else "completed"
    print(f"run {status}; {len(traj.times) - 1} steps, {len(traj.snapshots)} snapshots -> {out}")
    return 0 if not traj.aborted else 1


def _cmd_exponents(args: argparse.Namespace) -> int:
    exps = analysis.exponents(args.p, args.m)
    payload = dataclasses.asdict(exps)
    payload["degenerate"] = exps.degenerate
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_diagnose(args: argparse.Namespace) -> int:
    directory = Path(args.traj)
    if not (directory / "traj.json").is_file():
        print(f"error: no trajectory at {directory}", file=sys.stderr)
        return 2
    traj = read_trajectory(directory)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    p, m = traj.p, traj.m
    t_end = float(traj.times[-1])
    t_mid = args.t if args.t is not None else 0.25 * t_end
    c0 = args.c0 if args.c0 is not None else float(np.min(traj.c0))
    exps = analysis.exponents(p, m)

    report: dict[str, object] = {
        "p": p,
        "m": m,
        "exponents": dataclasses.asdict(exps),
        "e0": analysis.energy_E0(traj, p, (0.0, t_end)),
        "c0": c0,
    }

    y0 = float(traj.lp_p[0])
    eps = args.eps if args.eps is not None else max(4.0 * y0, 2.0 * float(np.max(traj.lp_p)), 1e-12)
    barrier = analysis.ode_barrier_check(traj, p, m, eps)
    report["ode_barrier"] = dataclasses.asdict(barrier)

    sup_h = float(np.max(traj.linf_h))
    if sup_h > 0.0:
        ladder = [frac * sup_h for frac in (0.0, 0.125, 0.25, 0.5, 0.75, 0.9)]
        with (out / "levels.csv").open("w") as fh:
            fh.write("level,sup_term,dissipation_term,total\n")
            for lev in ladder:
                ls = analysis.level_set_energy(traj, lev, (0.0, t_end), p, c0)
                fh.write(f"{lev!r},{ls.sup_term!r},{ls.dissipation_term!r},{ls.total!r}\n")

    if not exps.degenerate and 0.0 < t_mid < t_end:
        e0 = analysis.level_set_energy(traj, 0.0, (0.0, t_end), p, c0).total
        K = args.K if args.K is not None else analysis.predict_K(e0, t_mid, t_end, p, m, args.calibration_c)
        if K > 0:
            dg = analysis.degiorgi_iterate(traj, K, t_mid, t_end, p, m, c0, calibration_c=args.calibration_c)
            report["degiorgi"] = dataclasses.asdict(dg)
            with (out / "degiorgi.csv").open("w") as fh:
                fh.write("n,level,t_n,energy,comparison\n")
                for i, (lev, tn, e, cmp_) in enumerate(
                    zip(dg.levels, dg.level_times, dg.energies, dg.comparison)
                ):
                    fh.write(f"{i},{lev!r},{tn!r},{e!r},{cmp_!r}\n")

    if m > 9.5:
        bounds = []
        for theta in (0.0, 2.0, 4.0):
            if theta <= m:
                bounds.append(dataclasses.asdict(analysis.moment_bound_check(traj, m, theta)))
        report["moment_bounds"] = bounds
        with (out / "moments.csv").open("w") as fh:
            fh.write("theta,exponent,c3,holds\n")
            for b in bounds:
                fh.write(f"{b['theta']},{b['exponent']!r},{b['c3']!r},{b['holds']}\n")

    try:
        fit = analysis.smoothing_fit(traj, p, m)
        report["smoothing_fit"] = dataclasses.asdict(fit)
    except ValueError as exc:
        report["smoothing_fit"] = {"skipped": str(exc)}

    h1 = analysis.h1_smallness(traj, 0.5 * t_end)
    report["h1_smallness"] = {"l2_1": h1[0], "grad_l2_2": h1[1], "t_query": 0.5 * t_end}

    # both entropy conventions for the final state: signed f log f and
    # f |log f| (positive part, matching the run recorder's convention)
    from .fields import boltzmann_entropy

    final = traj.snapshots[-1]
    positive = Field(final.grid, np.maximum(final.values, 0.0))
    report["entropy_final"] = {
        "time": traj.snapshot_times[-1],
        "signed": boltzmann_entropy(positive),
        "absolute": boltzmann_entropy(positive, absolute=True),
    }

    with (out / "envelope.csv").open("w") as fh:
        fh.write("time,linf_h,lp_p,grad_energy\n")
        for t, s, yp, g in zip(traj.times, traj.linf_h, traj.lp_p, traj.grad_energy):
            fh.write(f"{t!r},{s!r},{yp!r},{g!r}\n")

    (out / "report.json").write_text(json.dumps(report, indent=2, default=float) + "\n")
    print(f"diagnostics written to {out}")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    from .verify import run_verification

    results = run_verification(n=args.n, extent=args.L)
    failed = 0
    for res in results:
        print(f"[{'PASS' if res.passed else 'FAIL'}] {res.name}: {res.detail}")
        failed += 0 if res.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def _sweep_worker(payload: tuple[str, str]) -> tuple[str, bool]:
    config_text, out_dir = payload
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg_path = out / "config.cfg"
    cfg_path.write_text(config_text)
    config = parse_config(cfg_path)
    started = time.time()
    traj = run(config)
    write_trajectory(traj, out)
    write_manifest(
        RunManifest(
            config_text=config_text,
            version=__version__,
            started=started,
            finished=time.time(),
            outputs=sorted(str(p.name) for p in out.iterdir()),
            abort_reason=traj.abort_reason,
        ),
        out,
    )
    return out_dir, not traj.aborted


def _cmd_sweep(args: argparse.Namespace) -> int:
    try:
        base = parse_config(args.config)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    amplitudes = [float(x) for x in args.amplitudes.split(",")] if args.amplitudes else [None]
    ns = [int(x) for x in args.ns.split(",")] if args.ns else [base.n]
    ps = [float(x) for x in args.ps.split(",")] if args.ps else [base.p]
    if amplitudes != [None] and not isinstance(base.initial, PerturbedMaxwellian):
        print("error: --amplitudes requires a perturbed_maxwellian base config", file=sys.stderr)
        return 2

    jobs = []
    for amp in amplitudes:
        for n in ns:
            for p in ps:
                initial = base.initial if amp is None else PerturbedMaxwellian(amp, base.initial.mode)
                cfg = dataclasses.replace(base, initial=initial, n=n, p=p)
                tag = f"amp{amp if amp is not None else 'base'}_n{n}_p{p}"
                jobs.append((config_to_text(cfg), str(Path(args.out) / tag)))

    failures = 0
    with concurrent.futures.ProcessPoolExecutor(max_workers=args.workers) as pool:
        for out_dir, ok in pool.map(_sweep_worker, jobs):
            print(f"[{'ok' if ok else 'ABORTED'}] {out_dir}")
            failures += 0 if ok else 1
    return 0 if failures == 0 else 1


def cli(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="landau",
        description="Velocity-space Landau-Coulomb simulator and diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate a configured problem and persist the trajectory")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(func=_cmd_run)

    p_diag = sub.add_parser("diagnose", help="emit analysis reports for a stored trajectory")
    p_diag.add_argument("--traj", required=True)
    p_diag.add_argument("--out", required=True)
    p_diag.add_argument("--t", type=float, default=None, help="iteration window start (default t_end/4)")
    p_diag.add_argument("--K", type=float, default=None, help="override the level ceiling")
    p_diag.add_argument("--c0", type=float, default=None, help="override the coercivity constant")
    p_diag.add_argument("--eps", type=float, default=None, help="barrier level for the ODE check")
    p_diag.add_argument("--calibration-c", type=float, default=1.0)
    p_diag.set_defaults(func=_cmd_diagnose)

    p_ver = sub.add_parser("verify", help="run the invariant suite; nonzero exit on failure")
    p_ver.add_argument("--n", type=int, default=32)
    p_ver.add_argument("--L", type=float, default=8.0)
    p_ver.set_defaults(func=_cmd_verify)

    p_sweep = sub.add_parser("sweep", help="run a parameter grid concurrently")
    p_sweep.add_argument("--config", required=True, help="base configuration")
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--amplitudes", default=None, help="comma-separated perturbation amplitudes")
    p_sweep.add_argument("--ns", default=None, help="comma-separated grid sizes")
    p_sweep.add_argument("--ps", default=None, help="comma-separated Lebesgue exponents")
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_exp = sub.add_parser("exponents", help="print the exponent set for (p, m)")
    p_exp.add_argument("--p", type=float, required=True)
    p_exp.add_argument("--m", type=float, required=True)
    p_exp.set_defaults(func=_cmd_exponents)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli())
