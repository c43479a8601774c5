"""Command-line entry point.

``dgshock run`` marches one benchmark with the network solver, the classical
DG solver or both, and writes snapshot CSVs, metrics, a training log, a
checkpoint, a manifest and PNG figures into one output directory.
``dgshock convergence`` runs the classical solver on a list of meshes and
reports observed orders of accuracy.

Exit codes: 0 success, 2 configuration error, 3 solver abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import subprocess
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from dgshock import __version__
from dgshock import report
from dgshock.experiments import EXPERIMENTS, ExperimentSpec, error_metrics, exact_nodal, get_experiment
from dgshock.network import RDNConfig, save_checkpoint
from dgshock.optimize import TrainConfig, config_dict, network_solve
from dgshock.timestep import SolverAbort, oracle_solve
from dgshock.weakform import discretize

log = logging.getLogger("dgshock")

OUTPUT_ROOT_ENV = "DGSHOCK_OUTPUT_ROOT"
SOLVERS = ("network", "oracle", "both")
EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str
    solver: str = "both"
    K: int = 128
    dt: float = 0.004
    T: float = 1.0
    snapshots: list = field(default_factory=list)
    seed: int = 0
    trainer: dict = field(default_factory=dict)
    network: dict = field(default_factory=dict)
    output: str = ""
    figures: bool = True

    def validate(self) -> RunConfig:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {sorted(EXPERIMENTS)}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}; choose from {list(SOLVERS)}")
        if isinstance(self.K, bool) or not isinstance(self.K, int) or self.K < 1:
            raise ConfigError(f"K must be a positive integer, got {self.K!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        for key in ("dt", "T"):
            v = getattr(self, key)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
                raise ConfigError(f"{key} must be a positive number, got {v!r}")
        if any(not isinstance(s, (int, float)) or s < 0 or s > self.T + 1e-12 for s in self.snapshots):
            raise ConfigError(f"snapshot times {self.snapshots} must lie in [0, T={self.T}]")
        _check_keys("trainer", self.trainer, TrainConfig)
        _check_keys("network", self.network, RDNConfig)
        try:
            self.train_config()
            self.network_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return self

    def train_config(self) -> TrainConfig:
        return TrainConfig(**{**self.trainer, "seed": self.seed})

    def network_config(self) -> RDNConfig:
        return RDNConfig(**self.network)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        _check_keys("run config", data, cls)
        if "experiment" not in data:
            raise ConfigError("run config needs an 'experiment'")
        return cls(**data)


def _check_keys(label, data, cls):
    if not isinstance(data, dict):
        raise ConfigError(f"{label} must be a mapping, got {type(data).__name__}")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown {label} key(s): {', '.join(unknown)}")


def load_config_file(path) -> dict:
    """Read a JSON or YAML mapping."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            import yaml
            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except Exception as exc:  # parse errors from either format
        raise ConfigError(f"cannot parse config file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    return data


def save_config_file(path, cfg: RunConfig) -> None:
    path = Path(path)
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml
        path.write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))
    else:
        report.write_json(path, cfg.to_dict())


def _parse_override(item: str):
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


def build_config(args: argparse.Namespace) -> RunConfig:
    """Experiment defaults, then command-line flags, then the config file."""
    merged: dict = {}
    if args.experiment is not None:
        merged["experiment"] = args.experiment
    for key in ("solver", "K", "dt", "T", "seed", "output"):
        v = getattr(args, key)
        if v is not None:
            merged[key] = v
    if args.snapshots is not None:
        merged["snapshots"] = list(args.snapshots)
    if args.no_figures:
        merged["figures"] = False
    for group in ("trainer", "network"):
        items = getattr(args, group) or []
        if items:
            merged[group] = dict(_parse_override(i) for i in items)
    if args.config is not None:
        from_file = load_config_file(args.config)
        _check_keys("run config", from_file, RunConfig)
        for group in ("trainer", "network"):
            if group in from_file and group in merged and isinstance(from_file[group], dict):
                from_file[group] = {**merged[group], **from_file[group]}
        merged.update(from_file)
    if "experiment" not in merged:
        raise ConfigError("no experiment given (use --experiment or a config file)")
    return resolve_defaults(merged)


def resolve_defaults(merged: dict) -> RunConfig:
    _check_keys("run config", merged, RunConfig)
    name = merged["experiment"]
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    exp = get_experiment(name)
    out = {"K": exp.K, "dt": exp.dt, "T": exp.T, "trainer": dict(exp.trainer), "output": f"{name}"}
    out.update(merged)
    if isinstance(merged.get("trainer"), dict):
        out["trainer"] = {**exp.trainer, **merged["trainer"]}
    if "snapshots" not in merged:
        T = out["T"]
        if isinstance(T, (int, float)) and not isinstance(T, bool):
            out["snapshots"] = sorted({float(s) for s in exp.snapshot_times if s <= T} | {float(T)})
    cfg = RunConfig.from_dict(out)
    if isinstance(cfg.dt, int) and not isinstance(cfg.dt, bool):
        cfg.dt = float(cfg.dt)
    if isinstance(cfg.T, int) and not isinstance(cfg.T, bool):
        cfg.T = float(cfg.T)
    cfg.snapshots = [float(s) if isinstance(s, int) and not isinstance(s, bool) else s for s in cfg.snapshots]
    return cfg.validate()


def resolve_output(output: str) -> Path:
    path = Path(output)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def version_string() -> str:
    """Package version plus the short commit hash when run from a git checkout."""
    try:
        sha = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
        if sha.returncode == 0 and sha.stdout.strip():
            return f"{__version__}+g{sha.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _discrepancy(a: np.ndarray, b: np.ndarray, h: float, n_p: int) -> dict:
    d = np.asarray(a) - np.asarray(b)
    return {"Linf": float(np.max(np.abs(d))), "L2": float(np.sqrt(h / n_p * np.sum(d ** 2)))}


def execute(cfg: RunConfig, out_dir: Path) -> dict:
    """Run the configured solvers and write every artifact; returns the metrics."""
    exp: ExperimentSpec = get_experiment(cfg.experiment, K=cfg.K, dt=cfg.dt, T=cfg.T,
                                         snapshot_times=tuple(cfg.snapshots))
    prob = exp.problem
    disc = discretize(prob.x_min, prob.x_max, cfg.K, exp.N_p, exp.n_gauss)
    times = sorted(set(cfg.snapshots)) or [cfg.T]
    results: dict[str, dict[float, np.ndarray]] = {}
    metrics: dict = {"experiment": cfg.experiment, "K": cfg.K, "dt": cfg.dt, "T": cfg.T, "wall_time_s": {}}

    if cfg.solver in ("oracle", "both"):
        start = time.perf_counter()
        fields_ = oracle_solve(prob, disc, cfg.dt, cfg.T, times)
        metrics["wall_time_s"]["oracle"] = time.perf_counter() - start
        results["oracle"] = dict(zip(times, fields_))
        log.info("classical solver finished in %.2f s", metrics["wall_time_s"]["oracle"])

    if cfg.solver in ("network", "both"):
        net_cfg, train_cfg = cfg.network_config(), cfg.train_config()

        def on_step(u, t, res):
            log.info("t=%.4f epochs=%d loss=%.3e%s", t, res.epochs, res.final_loss,
                     "" if res.converged else " (budget exhausted)")

        run = network_solve(prob, disc, cfg.dt, cfg.T, times, net_cfg, train_cfg, on_step=on_step)
        metrics["wall_time_s"]["network"] = run.wall_time
        results["network"] = dict(zip(run.times, run.snapshots))
        metrics["epochs_per_step"] = run.epochs_per_step
        metrics["final_loss_per_step"] = run.final_losses
        report.write_jsonl(out_dir / "training_log.jsonl", run.history)
        save_checkpoint(out_dir / "checkpoint.npz", run.params, net_cfg,
                        {"experiment": cfg.experiment, "T": cfg.T, "seed": cfg.seed,
                         "trainer": config_dict(train_cfg)})
        if cfg.figures:
            report.plot_training(out_dir / "training.png", run.history)

    exact = {t: exact_nodal(prob.analytic, disc, t) for t in times} if prob.analytic else None
    snaps = []
    for t in times:
        entry: dict = {"t": t}
        for solver, per in results.items():
            report.write_snapshot_csv(out_dir / report.snapshot_filename(solver, t), disc.nodes, per[t],
                                      None if exact is None else exact[t])
            if prob.analytic is not None:
                entry[solver] = error_metrics(per[t], prob.analytic, disc, t)
        if len(results) == 2:
            entry["network_vs_oracle"] = _discrepancy(results["network"][t], results["oracle"][t],
                                                     disc.mesh.h, disc.mesh.N_p)
        snaps.append(entry)
    metrics["snapshots"] = snaps
    if cfg.figures:
        report.plot_snapshots(out_dir / "snapshots.png", disc.nodes, results, exact, cfg.experiment)
    return metrics


def run(cfg: RunConfig) -> int:
    out_dir = resolve_output(cfg.output)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        log.error("output directory %s is not writable: %s", out_dir, exc)
        return EXIT_CONFIG
    manifest = {"config": cfg.to_dict(), "seed": cfg.seed, "version": version_string(),
                "snapshot_times_note": "snapshot times are chosen defaults, not taken from a reference run"}
    start = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            metrics = execute(cfg, out_dir)
    except (SolverAbort, FloatingPointError) as exc:
        log.error("solver aborted: %s", exc)
        manifest.update(status="aborted", error=str(exc), wall_time_s=time.perf_counter() - start)
        report.write_json(out_dir / "manifest.json", manifest)
        return EXIT_ABORT
    report.write_json(out_dir / "metrics.json", metrics)
    manifest.update(status="ok", wall_time_s=time.perf_counter() - start,
                    final_metrics=metrics["snapshots"][-1] if metrics["snapshots"] else {})
    report.write_json(out_dir / "manifest.json", manifest)
    log.info("wrote results to %s", out_dir)
    return EXIT_OK


# -- convergence -------------------------------------------------------------

def convergence_study(experiment: str, Ks, dt_ref: float = 0.004, K_ref: int = 128,
                      T: float | None = None) -> tuple[list[dict], bool]:
    """Classical-solver L2 errors on each mesh with ``dt = dt_ref * K_ref / K``.

    Returns the table rows and whether an observed-order column is meaningful
    (smooth experiment and more than one mesh). ``order`` on a row compares it
    with the previous, coarser row.
    """
    exp = get_experiment(experiment)
    T = exp.T if T is None else T
    Ks = sorted(int(k) for k in Ks)
    smooth = exp.smooth
    if not smooth:
        warnings.warn(f"{experiment} has a non-smooth solution; observed orders are not reported", stacklevel=2)
    rows = []
    for K in Ks:
        disc = discretize(exp.problem.x_min, exp.problem.x_max, K, exp.N_p, exp.n_gauss)
        dt = dt_ref * K_ref / K
        (u,) = oracle_solve(exp.problem, disc, dt, T)
        rows.append({"K": K, "h": disc.mesh.h, "dt": dt, "L2": error_metrics(u, exp.problem.analytic, disc, T)["L2"]})
    with_order = smooth and len(rows) > 1
    if with_order:
        rows[0]["order"] = None
        for a, b in zip(rows, rows[1:]):
            b["order"] = math.log(a["L2"] / b["L2"]) / math.log(b["K"] / a["K"])
    return rows, with_order


def write_convergence(rows: list[dict], with_order: bool, out_dir: Path, figures: bool = True) -> None:
    cols = ["K", "h", "dt", "L2"] + (["order"] if with_order else [])
    with open(out_dir / "convergence.csv", "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join("" if r.get(c) is None else repr(r[c]) for c in cols) + "\n")
    if figures:
        report.plot_convergence(out_dir / "convergence.png", rows)


def format_convergence(rows: list[dict], with_order: bool) -> str:
    head = f"{'K':>6} {'h':>10} {'dt':>10} {'L2':>12}" + (f" {'order':>7}" if with_order else "")
    lines = [head]
    for r in rows:
        line = f"{r['K']:>6d} {r['h']:>10.5f} {r['dt']:>10.6f} {r['L2']:>12.4e}"
        if with_order:
            line += f" {'':>7}" if r["order"] is None else f" {r['order']:>7.3f}"
        lines.append(line)
    return "\n".join(lines)


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dgshock", description=__doc__.split("\n\n")[0])
    p.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="march one benchmark and write results")
    r.add_argument("--experiment", choices=sorted(EXPERIMENTS))
    r.add_argument("--solver", choices=SOLVERS)
    r.add_argument("--K", type=int, help="number of elements")
    r.add_argument("--dt", type=float, help="time step")
    r.add_argument("--T", type=float, help="final time")
    r.add_argument("--snapshots", type=float, nargs="+", metavar="t", help="output times")
    r.add_argument("--seed", type=int)
    r.add_argument("--trainer", action="append", metavar="KEY=VALUE", help="training setting override")
    r.add_argument("--network", action="append", metavar="KEY=VALUE", help="network setting override")
    r.add_argument("--output", help=f"output directory (relative paths resolve under ${OUTPUT_ROOT_ENV})")
    r.add_argument("--config", help="JSON or YAML run config; its values override flags")
    r.add_argument("--save-config", metavar="PATH", help="write the effective config and exit")
    r.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    c = sub.add_parser("convergence", help="observed order of accuracy of the classical solver")
    c.add_argument("--experiment", default="advection-smooth", choices=sorted(EXPERIMENTS))
    c.add_argument("--K", type=int, nargs="+", default=[32, 64, 128, 256])
    c.add_argument("--dt", type=float, default=0.004, help="time step at --K-ref elements")
    c.add_argument("--K-ref", type=int, default=128)
    c.add_argument("--T", type=float, default=1.0)
    c.add_argument("--output", help="directory for convergence.csv and the figure")
    c.add_argument("--no-figures", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    try:
        if args.command == "convergence":
            if any(k < 1 for k in args.K) or args.dt <= 0 or args.T <= 0 or args.K_ref < 1:
                raise ConfigError("K values, K-ref, dt and T must be positive")
            rows, with_order = convergence_study(args.experiment, args.K, args.dt, args.K_ref, args.T)
            print(format_convergence(rows, with_order))
            if args.output:
                out = resolve_output(args.output)
                out.mkdir(parents=True, exist_ok=True)
                write_convergence(rows, with_order, out, not args.no_figures)
            return EXIT_OK
        cfg = build_config(args)
        if args.save_config:
            save_config_file(args.save_config, cfg)
            return EXIT_OK
        return run(cfg)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except SolverAbort as exc:
        log.error("solver aborted: %s", exc)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
