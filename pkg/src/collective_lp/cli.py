"""Command line driver: ``collective-lp simulate`` and ``collective-lp diagnose``.

Exit codes: 0 success / all checks passed, 1 a check failed, 2 invalid
configuration, 3 stage solver failure, 4 vortex collision.
"""

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .errors import NonConvergence, OriginSingularity, VortexCollision
from .expr import DomainError, ExpressionSyntaxError, hamiltonian as expr_hamiltonian
from .geometry import random_rotation
from .hamiltonians import ProductVortexSystem, rigid_body, sphere_extend
from .integrators import RELIFT_POLICIES, METHODS, SolverOptions, integrate, integrate_product, tableau

log = logging.getLogger("collective_lp")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER, EXIT_COLLISION = 0, 1, 2, 3, 4
CHECKS = ("orbit", "momentum", "energy", "poisson", "equivariance", "fiber", "order")
VORTEX_CHECKS = ("orbit", "momentum", "energy")
ORDER_TOLERANCE = {"gauss1": 0.1, "gauss2": 0.2, "gauss3": 0.5, "euler": 0.1}
EXPECTED_ORDER = {"gauss1": 2.0, "gauss2": 4.0, "gauss3": 6.0, "euler": 1.0}
DEFAULT_ORDER_STEPS = {
    "gauss1": [0.1, 0.05, 0.025],
    "gauss2": [0.2, 0.1, 0.05],
    "gauss3": [0.4, 0.2, 0.1],
    "euler": [0.02, 0.01, 0.005],
}


class ConfigError(ValueError):
    pass


def figure2_grid():
    """Unit vectors at polar angles 15..165 deg (step 15) and azimuths 0 and 90 deg."""
    theta = np.deg2rad(np.arange(15, 166, 15))
    phi = np.deg2rad([0.0, 90.0])
    T, P = np.meshgrid(theta, phi, indexing="ij")
    return np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)


@dataclass
class RunConfig:
    model: dict
    method: str = "gauss1"
    h: float = 0.05
    n_steps: int = 100
    initial: np.ndarray = None
    phase: float = 0.0
    relift: str = "persistent"
    solver: SolverOptions = field(default_factory=SolverOptions)
    output: str = "output"
    seed: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_vortex(self):
        return self.model["type"] == "vortices"


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def _as_float(value, name):
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    _require(np.isfinite(out), f"{name} must be finite")
    return out


def _initial_states(raw):
    if isinstance(raw, dict):
        _require(raw.get("grid") == "figure2", f"unknown initial grid {raw!r}")
        return figure2_grid()
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    _require(arr.ndim == 2 and arr.shape[1] == 3, "initial states must be 3-vectors")
    _require(np.all(np.isfinite(arr)), "initial states must be finite")
    return arr


def parse_config(data, overrides=None):
    """Validate a JSON config mapping and apply command line overrides."""
    data = dict(data)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    model = data.get("model")
    _require(isinstance(model, dict) and "type" in model, "config needs a model with a type")
    kind = model["type"]
    initial = None
    if kind == "rigid_body":
        for key in ("I1", "I2", "I3"):
            _require(key in model, f"rigid_body model needs {key}")
            _require(_as_float(model[key], key) > 0, f"{key} must be positive")
    elif kind in ("expr", "sphere"):
        _require(isinstance(model.get("expr"), str), f"{kind} model needs an expr string")
    elif kind == "vortices":
        gammas = np.asarray(model.get("gammas", []), dtype=float)
        positions = np.asarray(model.get("positions", []), dtype=float)
        _require(gammas.ndim == 1 and gammas.size >= 1, "vortices model needs gammas")
        _require(np.all(gammas != 0) and np.all(np.isfinite(gammas)), "vortex strengths must be nonzero")
        _require(positions.shape == (gammas.size, 3), "need one 3-vector position per vortex")
        _require(
            np.all(np.abs(np.linalg.norm(positions, axis=-1) - 1.0) <= 1e-12),
            "vortex positions must be unit vectors",
        )
        initial = positions
    else:
        raise ConfigError(f"unknown model type {kind!r}")
    method = data.get("method", "gauss1")
    _require(method in METHODS, f"unknown method {method!r}")
    h = _as_float(data.get("h", 0.05), "h")
    _require(h > 0, "h must be positive")
    n_steps = data.get("n_steps", 100)
    _require(isinstance(n_steps, int) and not isinstance(n_steps, bool) and n_steps >= 0, "n_steps must be a non-negative integer")
    relift = data.get("relift", "persistent")
    _require(relift in RELIFT_POLICIES, f"relift must be one of {RELIFT_POLICIES}")
    if initial is None:
        _require("initial" in data, "config needs initial states")
        initial = _initial_states(data["initial"])
    try:
        solver = SolverOptions(**data.get("solver", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver options: {exc}") from None
    seed = data.get("seed", 0)
    _require(isinstance(seed, int), "seed must be an integer")
    return RunConfig(
        model=model,
        method=method,
        h=h,
        n_steps=n_steps,
        initial=initial,
        phase=_as_float(data.get("phase", 0.0), "phase"),
        relift=relift,
        solver=solver,
        output=str(data.get("output", "output")),
        seed=seed,
        diagnostics=dict(data.get("diagnostics", {})),
    )


def load_config(path, overrides=None):
    """Read a config file; bare names resolve to the bundled configs."""
    p = Path(path)
    if not p.exists():
        name = p.name if p.suffix == ".json" else p.name + ".json"
        bundled = resources.files("collective_lp") / "configs" / name
        if not bundled.is_file():
            raise ConfigError(f"config file {path} not found")
        text = bundled.read_text()
    else:
        text = p.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    return parse_config(data, overrides)


def build_hamiltonian(model):
    kind = model["type"]
    try:
        if kind == "rigid_body":
            return rigid_body(model["I1"], model["I2"], model["I3"])
        if kind == "expr":
            return expr_hamiltonian(model["expr"])
        if kind == "sphere":
            return sphere_extend(expr_hamiltonian(model["expr"]))
    except ExpressionSyntaxError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"model {kind!r} is not a Hamiltonian on R^3")


def _threads():
    raw = os.environ.get("COLLECTIVE_LP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"COLLECTIVE_LP_THREADS must be an integer, got {raw!r}") from None


def _fmt(x):
    return "%.17g" % x


def _write_csv(path, header, columns):
    rows = np.column_stack(columns)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for k, row in enumerate(rows):
            fh.write(",".join([str(k)] + [_fmt(v) for v in row]) + "\n")


def _dump_json(path, payload):
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _drifts(traj):
    return {
        "orbit": diag.orbit_drift(traj).max_drift,
        "energy": diag.energy_drift(traj).max_drift,
        "momentum": diag.momentum_drift(traj).max_drift,
    }


def simulate_rigid(cfg, out):
    H = build_hamiltonian(cfg.model)
    tab = tableau(cfg.method)
    chunks = np.array_split(np.arange(len(cfg.initial)), min(_threads(), len(cfg.initial)))

    def run(idx):
        return integrate(H, cfg.initial[idx], cfg.h, cfg.n_steps, tab, cfg.solver, cfg.relift, cfg.phase)

    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        results = list(pool.map(run, chunks))
    summary = []
    for idx, traj in zip(chunks, results):
        for j, i in enumerate(idx):
            w = traj.w[:, j]
            name = f"traj_{i:03d}.csv"
            _write_csv(
                out / name,
                ["step", "t", "w1", "w2", "w3", "H", "orbit_norm", "M"],
                [traj.t, w, traj.energy[:, j], traj.orbit_norm[:, j], traj.M[:, j]],
            )
            d = {
                "orbit": diag._drift("orbit_norm", traj.orbit_norm[:, j]).max_drift,
                "energy": diag._drift("energy", traj.energy[:, j]).max_drift,
                "momentum": diag._drift("M", traj.M[:, j]).max_drift,
            }
            summary.append({"file": name, "initial": w[0].tolist(), "final": w[-1].tolist(), "max_drift": d})
    return summary


def simulate_vortices(cfg, out):
    sys_ = ProductVortexSystem(cfg.model["gammas"])
    trajs = integrate_product(sys_, cfg.initial, cfg.h, cfg.n_steps, tableau(cfg.method), cfg.solver, cfg.phase)
    header, columns = ["step", "t", "H"], [trajs[0].t, trajs[0].energy]
    for i, traj in enumerate(trajs, start=1):
        header += [f"w1_{i}", f"w2_{i}", f"w3_{i}", f"orbit_norm_{i}", f"M_{i}"]
        columns += [traj.w, traj.orbit_norm, traj.M]
    for i in range(len(trajs)):
        for j in range(i + 1, len(trajs)):
            xi = trajs[i].w / trajs[i].orbit_norm[:, None]
            xj = trajs[j].w / trajs[j].orbit_norm[:, None]
            header.append(f"chord_{i + 1}_{j + 1}")
            columns.append(np.linalg.norm(xi - xj, axis=-1))
    _write_csv(out / "vortices.csv", header, columns)
    return [
        {
            "vortex": i,
            "file": "vortices.csv",
            "initial": traj.w[0].tolist(),
            "final": traj.w[-1].tolist(),
            "max_drift": _drifts(traj),
        }
        for i, traj in enumerate(trajs, start=1)
    ]


def cmd_simulate(cfg, record_time=False):
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    trajectories = simulate_vortices(cfg, out) if cfg.is_vortex else simulate_rigid(cfg, out)
    elapsed = time.perf_counter() - start
    log.info("simulated %d trajectories in %.3f s", len(trajectories), elapsed)
    payload = {
        "model": cfg.model,
        "method": cfg.method,
        "h": cfg.h,
        "n_steps": cfg.n_steps,
        "relift": cfg.relift,
        "phase": cfg.phase,
        "trajectories": trajectories,
    }
    if record_time:
        payload["wall_time_s"] = elapsed
    _dump_json(out / "summary.json", payload)
    return payload


def _result(quantity, threshold, observed, passed=None, **parameters):
    if passed is None:
        passed = bool(observed < threshold)
    return diag.CheckResult(quantity, float(threshold), float(observed), bool(passed), parameters).to_dict()


def run_checks(cfg, checks):
    """Run the named diagnostics for ``cfg``; returns the list of report entries."""
    opts = cfg.diagnostics
    tab = tableau(cfg.method)
    rng = np.random.default_rng(cfg.seed)
    n_samples = int(opts.get("samples", 20))
    energy_threshold = float(opts.get("energy_threshold", 5e-5))
    conservation_tol = float(opts.get("conservation_tol", 1e-11))
    reports = []
    if cfg.is_vortex:
        unsupported = sorted(set(checks) - set(VORTEX_CHECKS))
        _require(not unsupported, f"checks {unsupported} are not available for vortex models")
        sys_ = ProductVortexSystem(cfg.model["gammas"])
        trajs = integrate_product(sys_, cfg.initial, cfg.h, cfg.n_steps, tab, cfg.solver, cfg.phase)
    else:
        H = build_hamiltonian(cfg.model)
        trajs = None
        if set(checks) & set(VORTEX_CHECKS):
            trajs = [integrate(H, cfg.initial, cfg.h, cfg.n_steps, tab, cfg.solver, cfg.relift, cfg.phase)]
    params = {"method": cfg.method, "h": cfg.h, "n_steps": cfg.n_steps}
    for check in checks:
        if check == "orbit":
            observed = max(
                float(np.max(np.abs(t.orbit_norm - t.orbit_norm[0]) / (1 + t.orbit_norm[0]))) for t in trajs
            )
            reports.append(_result("orbit_drift_relative", conservation_tol, observed, **params))
        elif check == "momentum":
            observed = max(float(np.max(np.abs(t.M - t.M[0]) / (1 + t.M[0]))) for t in trajs)
            reports.append(_result("momentum_drift_relative", conservation_tol, observed, **params))
        elif check == "energy":
            # vortex factors share one interaction energy
            observed = diag.energy_drift(trajs[0]).max_drift
            reports.append(_result("energy_drift", energy_threshold, observed, **params))
        elif check == "poisson":
            samples = diag.random_unit_vectors(rng, n_samples)
            observed = diag.poisson_check(H, tab, cfg.h, samples, cfg.solver)
            reports.append(_result("poisson_defect", 1e-6, observed, samples=n_samples, **params))
        elif check == "equivariance":
            n_rot = int(opts.get("rotations", 10))
            rotations = [random_rotation(rng) for _ in range(n_rot)]
            samples = diag.random_unit_vectors(rng, int(opts.get("equivariance_samples", 10)))
            observed = diag.equivariance_check(H, tab, cfg.h, rotations, samples, cfg.solver)
            reports.append(_result("equivariance_defect", 1e-10, observed, rotations=n_rot, **params))
        elif check == "fiber":
            n_phases = int(opts.get("phases", 8))
            thetas = rng.uniform(0.0, 2 * np.pi, n_phases)
            samples = diag.random_unit_vectors(rng, n_samples)
            observed = diag.fiber_independence_check(H, tab, cfg.h, samples, thetas, cfg.solver)
            reports.append(_result("fiber_defect", 1e-12, observed, samples=n_samples, phases=n_phases, **params))
        elif check == "order":
            h_list = opts.get("h_list", DEFAULT_ORDER_STEPS[cfg.method])
            t_end = float(opts.get("t_end", 2.0))
            est = diag.convergence_order(H, cfg.initial[0], tab, h_list, t_end, cfg.solver)
            expected, tol = EXPECTED_ORDER[cfg.method], ORDER_TOLERANCE[cfg.method]
            passed = abs(est.slope - expected) <= tol and est.correlation >= 0.99
            reports.append(
                _result(
                    "order_slope",
                    tol,
                    abs(est.slope - expected),
                    passed,
                    slope=est.slope,
                    expected=expected,
                    correlation=est.correlation,
                    h_list=list(map(float, h_list)),
                    errors=est.errors.tolist(),
                    t_end=t_end,
                    method=cfg.method,
                )
            )
        else:
            raise ConfigError(f"unknown check {check!r}; choose from {CHECKS}")
    return reports


def cmd_diagnose(cfg, checks):
    reports = run_checks(cfg, checks)
    return {"passed": all(r["passed"] for r in reports), "checks": reports}


def _parser():
    parser = argparse.ArgumentParser(prog="collective-lp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "diagnose"):
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON config file or name of a bundled config")
        p.add_argument("-v", "--verbose", action="store_true")
        p.add_argument("--h", type=float)
        p.add_argument("--steps", type=int, dest="n_steps")
        p.add_argument("--method", choices=sorted(METHODS))
        p.add_argument("--seed", type=int)
        p.add_argument("--output")
        if name == "simulate":
            p.add_argument("--record-time", action="store_true", help="store wall time in summary.json")
        else:
            p.add_argument("--check", action="append", choices=CHECKS, dest="checks")
            p.add_argument("--report", help="also write the JSON report to this file")
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {"h": args.h, "n_steps": args.n_steps, "method": args.method, "seed": args.seed, "output": args.output}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "simulate":
            cmd_simulate(cfg, record_time=args.record_time)
            return EXIT_OK
        checks = args.checks or list(VORTEX_CHECKS if cfg.is_vortex else CHECKS)
        report = cmd_diagnose(cfg, checks)
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
        sys.stdout.write(text)
        if args.report:
            Path(args.report).write_text(text)
        return EXIT_OK if report["passed"] else EXIT_FAIL
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except VortexCollision as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COLLISION
    except (OriginSingularity, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
