"""Command-line entry point.

Every subcommand reads a model config (JSON), writes its artifact into
--out, and records run metadata (timestamp, argv, version) separately in
metadata.json so the artifacts themselves are reproducible byte for byte.

Exit status: 0 success, 1 invalid input, 2 failed numerical certificate
or failed check.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .model import InteractionSpec, LatticeSpec, ModelError, ModelSpec, PotentialSpec, j_hat_zero

DEFAULT_SEED = 20240601
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


class ConfigError(ModelError):
    pass


# ---------------------------------------------------------------------------
# config parsing

_SCHEMA = {
    "lattice": {"d": True, "L": True, "boundary": False},
    "interaction": {"kind": False, "J": True, "alpha0": False, "matrix": False},
    "potential": {"coeffs": True, "h": False},
}
_TOP = {"lattice": True, "interaction": True, "potential": True, "m": True, "a": True,
        "beta": True, "nu": False}


def _check_keys(obj, schema: dict, where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"config key '{where}' must be an object")
    for key in obj:
        if key not in schema:
            raise ConfigError(f"unknown config key '{where + '.' if where else ''}{key}'")
    for key, required in schema.items():
        if required and key not in obj:
            raise ConfigError(f"missing config key '{where + '.' if where else ''}{key}'")


def _number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config key '{key}' must be a number, got {value!r}")
    return float(value)


def model_from_dict(cfg: dict) -> ModelSpec:
    """Build a ModelSpec; errors name the offending key."""
    _check_keys(cfg, _TOP, "")
    for section, schema in _SCHEMA.items():
        _check_keys(cfg[section], schema, section)
    lat, inter, pot = cfg["lattice"], cfg["interaction"], cfg["potential"]
    try:
        lattice = LatticeSpec(int(_number(lat["d"], "lattice.d")), int(_number(lat["L"], "lattice.L")),
                              lat.get("boundary", "zero"))
        kind = inter.get("kind", "nearest_neighbor")
        interaction = InteractionSpec(kind, _number(inter["J"], "interaction.J"),
                                      _number(inter.get("alpha0", 1.0), "interaction.alpha0"),
                                      None if inter.get("matrix") is None else np.array(inter["matrix"], float))
        coeffs = pot["coeffs"]
        if not isinstance(coeffs, list):
            raise ConfigError("config key 'potential.coeffs' must be a list")
        potential = PotentialSpec(np.array(coeffs, dtype=float) if coeffs else np.zeros(0),
                                  _number(pot.get("h", 0.0), "potential.h"))
        return ModelSpec(lattice, interaction, potential, m=_number(cfg["m"], "m"),
                         a=_number(cfg["a"], "a"), beta=_number(cfg["beta"], "beta"),
                         nu=int(_number(cfg.get("nu", 1), "nu")))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def model_to_dict(model: ModelSpec) -> dict:
    inter = model.interaction
    out_inter = {"kind": inter.kind, "J": inter.J, "alpha0": inter.alpha0}
    if inter.matrix is not None:
        out_inter["matrix"] = np.asarray(inter.matrix).tolist()
    return {"lattice": {"d": model.lattice.d, "L": model.lattice.L, "boundary": model.lattice.boundary},
            "interaction": out_inter,
            "potential": {"coeffs": np.atleast_1d(model.potential.coeffs).tolist(), "h": model.potential.h},
            "m": model.m, "a": model.a, "beta": model.beta, "nu": model.nu}


def load_model(path: str) -> ModelSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return model_from_dict(cfg)


# ---------------------------------------------------------------------------
# output

@dataclass
class RunConfig:
    command: str
    config: str | None
    out: Path
    seed: int
    threads: int
    force: bool
    options: argparse.Namespace


class Output:
    def __init__(self, run: RunConfig):
        self.run = run
        self.written: list[str] = []
        run.out.mkdir(parents=True, exist_ok=True)

    def _path(self, name: str) -> Path:
        path = self.run.out / name
        if path.exists() and not self.run.force:
            raise FileExistsError(f"{path} exists; pass --force to overwrite")
        return path

    def json(self, name: str, data):
        self._path(name).write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")
        self.written.append(name)

    def csv(self, name: str, rows: list[dict]):
        buf = io.StringIO()
        if rows:
            writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            for r in rows:
                writer.writerow({k: _fmt(v) for k, v in r.items()})
        self._path(name).write_text(buf.getvalue())
        self.written.append(name)

    def metadata(self, status: int, started: float):
        meta = {"version": __version__, "command": self.run.command, "argv": sys.argv[1:],
                "seed": self.run.seed, "threads": self.run.threads, "exit_status": status,
                "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
                "elapsed_seconds": round(time.time() - started, 3), "artifacts": self.written}
        path = self.run.out / "metadata.json"
        path.write_text(json.dumps(meta, indent=2) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    return v


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return obj


def _grid(text: str) -> np.ndarray:
    """'lo:hi:n' (linear), 'lo:hi:n:log' or a comma list."""
    parts = text.split(":")
    try:
        if len(parts) in (3, 4):
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            if len(parts) == 4 and parts[3] == "log":
                return np.geomspace(lo, hi, n)
            return np.linspace(lo, hi, n)
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}") from exc


def _sites(model: ModelSpec, spec: str | None):
    if spec is None or spec == "box":
        return None
    try:
        pts = [[int(c) for c in s.split(",")] for s in spec.split(";")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse --sites {spec!r}; use 'x,y;x,y'") from exc
    if any(len(p) != model.lattice.d for p in pts):
        raise ConfigError(f"--sites entries need {model.lattice.d} coordinates")
    return np.array(pts)


# ---------------------------------------------------------------------------
# subcommands

def cmd_spectrum(run: RunConfig, model: ModelSpec, out: Output) -> int:
    from .spectral import gap_info, one_site_correlation_integral, solve_one_site
    o = run.options
    beta = model.beta if o.beta is None else o.beta
    spec = solve_one_site(model.m, model.a, model.potential, K=o.levels, beta=beta if o.kup else None)
    info = gap_info(spec)
    # |E - E_fine| bounds the error of the unextrapolated fine-grid levels
    data = {"eigenvalues": spec.eigenvalues, "fine_grid_error": spec.error, "grid": {
        "x_max": spec.grid.x_max, "n_fine": spec.grid.n}, "gap": info.value, "gap_index": info.index,
        "gap_at_top": info.at_top, "m_gap_squared": model.m * info.value ** 2}
    status = EXIT_OK
    if o.kup:
        kup = one_site_correlation_integral(spec, beta)
        bound = 1.0 / (model.m * info.value ** 2)
        data["one_site_correlation_integral"] = {"beta": beta, "value": kup, "bound": bound,
                                                 "within_bound": kup <= bound + 1e-10}
    gap_err = spec.error[info.index] + spec.error[info.index - 1]
    data["gap_error_bound"] = gap_err
    if info.at_top or gap_err > 1e-3 * info.value:
        status = EXIT_NUMERIC
    data["certificate_ok"] = status == EXIT_OK
    out.json("spectrum.json", data)
    return status


def cmd_criteria(run: RunConfig, model: ModelSpec, out: Output) -> int:
    from .criteria import criteria_report
    rep = criteria_report(model)
    data = rep.to_dict()
    data["model"] = model_to_dict(model)
    out.json("criteria.json", data)
    return EXIT_OK


def _sampler_config(o, seed: int):
    from .sampler import SamplerConfig
    return SamplerConfig(sweeps=o.sweeps, burn_in=o.burn_in, thinning=o.thin, proposal=o.proposal,
                         scale=o.scale, seed=seed)


def _chain_seeds(seed: int, n: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(s.generate_state(1, dtype=np.uint64)[0]) for s in ss.spawn(n)]


def cmd_sample(run: RunConfig, model: ModelSpec, out: Output) -> int:
    from .loops import LoopConfiguration
    from .sampler import merge_stats, run_chain
    o = run.options
    sites = _sites(model, o.sites)
    boundary = None
    if o.boundary:
        boundary = LoopConfiguration.from_json(Path(o.boundary).read_text())
    initial = LoopConfiguration.from_json(Path(o.resume).read_text()) if o.resume else None
    obs = [s.strip() for s in o.observables.split(",") if s.strip()]
    seeds = _chain_seeds(run.seed, o.chains) if o.chains > 1 else [run.seed]

    def one(seed):
        cfg = _sampler_config(o, seed)
        return run_chain(model, sites, boundary, o.kernel, cfg, obs, o.P, initial=initial)

    with ThreadPoolExecutor(max_workers=max(1, run.threads)) as pool:
        parts = list(pool.map(one, seeds))
    stats = merge_stats(parts) if len(parts) > 1 else parts[0]
    out.csv("sample.csv", stats.rows())
    if o.checkpoint:
        out.json("checkpoint.json", parts[0].final.to_dict())
    flags = [f for p in parts for f in p.flags]
    out.json("sample_diagnostics.json", {"acceptance": [p.acceptance for p in parts], "flags": flags,
                                         "chains": len(parts), "P": o.P, "kernel": o.kernel})
    return EXIT_NUMERIC if flags else EXIT_OK


def cmd_verify(run: RunConfig, model: ModelSpec | None, out: Output) -> int:
    from .exact import verify_inequalities
    res = verify_inequalities(seed=run.seed, draws=run.options.draws)
    rows = [r.to_dict() | {"verdict": "PASS" if r.passed and r.certificate.ok else "FAIL"} for r in res]
    ok = all(r["verdict"] == "PASS" for r in rows)
    summary = {}
    for r in rows:
        s = summary.setdefault(r["check"], {"count": 0, "passed": 0})
        s["count"] += 1
        s["passed"] += r["verdict"] == "PASS"
    out.json("inequalities.json", {"seed": run.seed, "draws": run.options.draws, "all_pass": ok,
                                   "summary": summary, "checks": rows})
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_phase_scan(run: RunConfig, model: ModelSpec, out: Output) -> int:
    from .criteria import (decompose_potential, high_temp_uniqueness, phase_transition_threshold,
                           rigidity, t_star_admissible)
    o = run.options
    betas = _grid(o.beta_grid)
    values = _grid(o.values)
    dec = decompose_potential(model.potential, model.a)
    even = model.potential.is_even and model.potential.h == 0
    rows = []
    for v in values:
        if o.axis == "J":
            mv = model.replace(interaction=InteractionSpec(model.interaction.kind, float(v),
                                                           model.interaction.alpha0, model.interaction.matrix))
        else:
            mv = model.replace(m=float(v))
        J0 = j_hat_zero(mv)
        rig = rigidity(mv)[1] if even else None
        bstar = None
        if mv.lattice.d >= 3 and t_star_admissible(mv.potential, mv.a) and mv.interaction.J > 0:
            bstar = phase_transition_threshold(mv).beta_star
        for b in betas:
            mb = mv.replace(beta=float(b))
            ht = high_temp_uniqueness(dec, mb)
            rows.append({"beta": float(b), o.axis: float(v), "j_hat_zero": J0,
                         "high_temperature_unique": ht.holds, "high_temperature_margin": ht.margin,
                         "quantum_stabilized": (rig > J0) if rig is not None else "",
                         "m_gap_squared": rig if rig is not None else "",
                         "beta_star": bstar if bstar is not None else "",
                         "transition_predicted": (bstar is not None and b > bstar)})
    out.csv("phase_scan.csv", rows)
    return EXIT_OK


def cmd_leeyang(run: RunConfig, model: ModelSpec, out: Output) -> int:
    from .leeyang import build_field_polynomial, ridge_check, zero_location_check
    o = run.options
    sites = _sites(model, o.sites)
    poly = build_field_polynomial(model, o.P, sites, o.degree)
    rep = zero_location_check(poly)
    data = {"polynomial": poly.to_dict(), "zeros": rep.to_dict(), "verdict": rep.verdict}
    if o.ridge:
        rr = ridge_check(model, o.P, sites)
        data["ridge"] = {"h": rr.h, "log_z": rr.log_z, "positive": rr.positive,
                         "log_convex": rr.log_convex, "min_second_difference": rr.min_second_difference}
    out.json("leeyang.json", data)
    if not poly.certificate.ok or rep.ill_conditioned:
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_pressure(run: RunConfig, model: ModelSpec, out: Output) -> int:
    from .sampler import pressure_curve
    o = run.options
    curve = pressure_curve(model, _grid(o.h_grid), _sampler_config(o, run.seed), o.P, _sites(model, o.sites),
                           o.kernel)
    rows = [r | {"anchored": curve.anchored} for r in curve.rows()]
    out.csv("pressure.csv", rows)
    d2, err = curve.second_differences()
    out.json("pressure_diagnostics.json", {"anchored": curve.anchored, "anchor": curve.anchor,
                                           "anchor_certificate": curve.anchor_certificate,
                                           "second_differences": d2, "second_difference_se": err,
                                           "convex_within_3se": bool(np.all(d2 >= -3 * err))})
    if curve.anchor_certificate is not None and not curve.anchor_certificate["ok"]:
        return EXIT_NUMERIC
    return EXIT_OK


COMMANDS = {"spectrum": cmd_spectrum, "criteria": cmd_criteria, "sample": cmd_sample,
            "verify-inequalities": cmd_verify, "phase-scan": cmd_phase_scan, "leeyang": cmd_leeyang,
            "pressure": cmd_pressure}


def _add_sampler_flags(p):
    p.add_argument("--P", type=int, default=8, help="Trotter slices per loop")
    p.add_argument("--sweeps", type=int, default=20000, help="total sweeps including burn-in")
    p.add_argument("--burn-in", type=int, default=2000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--proposal", choices=["slice", "zero_mode", "mixed"], default="mixed")
    p.add_argument("--scale", type=float, default=1.0, help="proposal scale multiplier")
    p.add_argument("--kernel", choices=["standard", "periodic"], default="standard")
    p.add_argument("--sites", help="region as 'x,y;x,y' (default: whole box)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="model config JSON (see README for the schema)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--force", action="store_true", help="overwrite existing artifacts")

    parser = argparse.ArgumentParser(prog="qacrystal", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="one-site spectrum, gap and rigidity")
    p.add_argument("--levels", type=int, default=16)
    p.add_argument("--beta", type=float, help="inverse temperature for the correlation integral")
    p.add_argument("--kup", action="store_true", help="also compute the one-site correlation integral")

    sub.add_parser("criteria", parents=[common], help="uniqueness and transition criteria report")

    p = sub.add_parser("sample", parents=[common], help="Metropolis estimates of loop observables")
    _add_sampler_flags(p)
    p.add_argument("--observables", default="mean,x2,m2", help="comma list of mean, m2, S, S2, x2")
    p.add_argument("--chains", type=int, default=1, help="independent chains to merge")
    p.add_argument("--boundary", help="boundary loop configuration JSON")
    p.add_argument("--resume", help="start from a checkpoint JSON")
    p.add_argument("--checkpoint", action="store_true", help="write the final state")

    p = sub.add_parser("verify-inequalities", parents=[common], help="seeded exact inequality sweep")
    p.add_argument("--draws", type=int, default=20)

    p = sub.add_parser("phase-scan", parents=[common], help="criteria over a (beta, J) or (beta, m) grid")
    p.add_argument("--axis", choices=["J", "m"], default="J")
    p.add_argument("--beta-grid", default="0.1:4:40", help="lo:hi:n[:log] or a comma list")
    p.add_argument("--values", default="0.1:2:20", help="grid of J or m values")

    p = sub.add_parser("leeyang", parents=[common], help="field polynomial zeros on a tiny instance")
    p.add_argument("--P", type=int, default=2)
    p.add_argument("--degree", type=int, default=8)
    p.add_argument("--sites", help="region as 'x,y;x,y' (default: whole box)")
    p.add_argument("--ridge", action="store_true", help="also check log-convexity of Z on a real grid")

    p = sub.add_parser("pressure", parents=[common], help="pressure curve by thermodynamic integration")
    _add_sampler_flags(p)
    p.add_argument("--h-grid", default="-1:1:9")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    rc = RunConfig(args.command, args.config, Path(args.out), args.seed, args.threads, args.force, args)
    started = time.time()
    out = None
    try:
        model = None
        if args.command != "verify-inequalities":
            if not args.config:
                raise ConfigError("--config is required for this subcommand")
            model = load_model(args.config)
        out = Output(rc)
        status = COMMANDS[args.command](rc, model, out)
    except FileExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ModelError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_INVALID
    except (ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        status = EXIT_NUMERIC
    if out is not None:
        out.metadata(status, started)
    return status


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
