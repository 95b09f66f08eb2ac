"""Command-line experiment runner.

    robustms <command> --config <path> [--out <dir>] [--seed <u64>] [--workers <int>]

Commands: simulate, select, risk, oracle-check, efficiency, lower-bound. The
configuration is JSON with the sections ``model``, ``signal``, ``selection``,
``run`` and ``lowerbound``; see the README for the keys. ``TOOL_LOG`` sets the
log level (error, info, debug).

Exit status: 0 ok, 2 configuration error, 3 failed verdict, 4 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from . import _seeding
from .lowerbound import DomainError, min_feasible_n, pinsker_limit_check
from .noise import LnRule, MarkLaw, MembershipError, NoiseModel, NoisePanel, default_panel
from .risk import ModelSelect, efficiency_curve, mc_risk, oracle_check, risk_report
from .selection import default_rho, weight_grid
from .signal import ConfigurationError, make_test_signal
from .spectral import simulate_spectral_noise

log = logging.getLogger("robustms")

COMMANDS = ("simulate", "select", "risk", "oracle-check", "efficiency", "lower-bound")
EXIT_OK, EXIT_CONFIG, EXIT_VERDICT, EXIT_RUNTIME = 0, 2, 3, 4

# coordinates reported by `simulate`
_SIM_COORDS = 8


class VerdictFailure(Exception):
    pass


@dataclass
class ExperimentConfig:
    raw: dict
    sigma_star: float
    panel: NoisePanel | None
    signal_spec: dict
    rho: float | None
    grid_overrides: dict
    n_list: list
    replicates: int
    master_seed: int
    workers: int
    out_dir: Path
    lowerbound: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    def rho_for(self, n: int) -> float:
        return default_rho(n) if self.rho is None else self.rho


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigurationError(f"section {name!r} must be an object")
    return sec


def _as_int(value, what: str) -> int:
    # JSON writes large n as 1e23; accept integral floats
    if isinstance(value, bool):
        raise ConfigurationError(f"{what} must be an integer")
    if isinstance(value, float):
        if not value.is_integer():
            raise ConfigurationError(f"{what} must be an integer, got {value}")
        return int(value)
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        # "1e25" as a string keeps the integer exact
        try:
            d = Decimal(value)
        except InvalidOperation:
            raise ConfigurationError(f"{what} must be an integer, got {value!r}") from None
        if d == d.to_integral_value():
            return int(d)
    raise ConfigurationError(f"{what} must be an integer, got {value!r}")


def _build_panel(model: dict) -> NoisePanel:
    s = float(model.get("sigma_star", 1.0))
    if not s > 0:
        raise ConfigurationError("model.sigma_star must be positive")
    rule_spec = model.get("l_n_rule")
    rule = None if rule_spec is None else LnRule(float(rule_spec.get("scale", 1.0)), float(rule_spec.get("offset", 1.0)))
    members = model.get("panel", "default")
    if members == "default":
        return default_panel(s, rule)
    if not isinstance(members, list):
        raise ConfigurationError("model.panel must be \"default\" or a list of members")
    models = []
    for i, m in enumerate(members):
        try:
            law = MarkLaw(m.get("mark_law", "rademacher"))
            models.append(
                NoiseModel(
                    float(m.get("rho1", 0.0)),
                    float(m.get("rho2", 0.0)),
                    float(m.get("lambda", 0.0)),
                    s,
                    law,
                    m.get("name", "Q0" if float(m.get("rho2", 0.0)) == 0 else f"member{i}"),
                )
            )
        except (ValueError, TypeError, AttributeError) as exc:
            raise ConfigurationError(f"model.panel[{i}]: {exc}") from None
    try:
        return NoisePanel(tuple(models), rule or LnRule())
    except ValueError as exc:
        raise ConfigurationError(f"model.panel: {exc}") from None


def load_config(path, out=None, seed=None, workers=None, needs_panel=True) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top level must be an object")

    model, sig, sel, run, lb = (_section(raw, s) for s in ("model", "signal", "selection", "run", "lowerbound"))
    master_seed = seed if seed is not None else run.get("master_seed")
    if master_seed is None:
        raise ConfigurationError("run.master_seed is required (no clock seeding)")
    master_seed = _as_int(master_seed, "run.master_seed")
    if not 0 <= master_seed < 2**64:
        raise ConfigurationError("master_seed must fit in an unsigned 64-bit integer")

    if "n_list" in run:
        n_list = [_as_int(v, "run.n_list") for v in run["n_list"]]
    elif "n" in run:
        n_list = [_as_int(run["n"], "run.n")]
    else:
        n_list = []
    workers = workers if workers is not None else _as_int(run.get("workers", 1), "run.workers")
    if workers < 1:
        raise ConfigurationError("workers must be >= 1")
    replicates = _as_int(run.get("replicates", 200), "run.replicates")
    if replicates < 2:
        raise ConfigurationError("run.replicates must be >= 2")

    rho = sel.get("rho")
    if rho is not None:
        rho = float(rho)
        if not 0 < rho < 1.0 / 3.0:
            raise ConfigurationError(f"selection.rho must lie in (0, 1/3), got {rho}")
    grid = sel.get("grid", {})
    overrides = {}
    if "eps" in grid:
        overrides["eps"] = float(grid["eps"])
    if "k_star" in grid:
        overrides["k_star"] = _as_int(grid["k_star"], "selection.grid.k_star")

    return ExperimentConfig(
        raw=raw,
        sigma_star=float(model.get("sigma_star", 1.0)),
        panel=_build_panel(model) if needs_panel else None,
        signal_spec=sig,
        rho=rho,
        grid_overrides=overrides,
        n_list=n_list,
        replicates=replicates,
        master_seed=master_seed,
        workers=workers,
        out_dir=Path(out if out is not None else run.get("out_dir", "out")),
        lowerbound=lb,
        run=run,
    )


# ----------------------------------------------------------------------------
# output


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            raise ArithmeticError(f"non-finite value {v} in output")
        return repr(v)
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(row[h]) for h in header])


def _require_n(cfg: ExperimentConfig) -> list:
    if not cfg.n_list:
        raise ConfigurationError("run.n or run.n_list is required")
    if any(n < 3 for n in cfg.n_list):
        raise ConfigurationError("every n must be >= 3")
    return cfg.n_list


def _validate_panel(cfg: ExperimentConfig) -> None:
    for n in cfg.n_list:
        cfg.panel.validate(n)


def _grid(cfg, n):
    try:
        return weight_grid(n, **cfg.grid_overrides)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None


def _signal(cfg, n):
    spec = cfg.signal_spec
    if "generator" not in spec:
        raise ConfigurationError("signal.generator is required")
    J = spec.get("J", n)
    return make_test_signal(spec["generator"], J=None if J is None else _as_int(J, "signal.J"), **spec.get("params", {}))


# ----------------------------------------------------------------------------
# commands; each returns a list of summary lines


def cmd_simulate(cfg: ExperimentConfig) -> list:
    """Empirical mean and variance of the first noise coordinates, per member."""
    rows, lines = [], []
    for n in _require_n(cfg):
        J = min(n, _SIM_COORDS)
        for model in cfg.panel:
            xi = np.array([
                simulate_spectral_noise(model, n, J, _seeding.replicate_seed(cfg.master_seed, n, rep))
                for rep in range(cfg.replicates)
            ])
            for j in range(J):
                col = xi[:, j]
                mean = math.fsum(col) / col.size
                var = math.fsum((col - mean) ** 2) / (col.size - 1)
                rows.append({"n": n, "model": model.name, "j": j + 1, "mean": mean, "var": var,
                             "target_var": model.variance, "reps": cfg.replicates})
        lines.append(f"n={n}: simulated {cfg.replicates} replicates x {len(cfg.panel)} models, J={J}")
    write_csv(cfg.out_dir / "noise_moments.csv", ["n", "model", "j", "mean", "var", "target_var", "reps"], rows)
    return lines


def cmd_select(cfg: ExperimentConfig) -> list:
    """How often each grid member is selected, per member of the panel."""
    rows, lines = [], []
    for n in _require_n(cfg):
        grid, signal, rho = _grid(cfg, n), _signal(cfg, n), cfg.rho_for(n)
        for model in cfg.panel:
            res = mc_risk(signal, model, ModelSelect(grid, rho), n, cfg.replicates, cfg.master_seed, cfg.workers)
            for (beta, t), count in sorted(res.selection_frequency.items()):
                rows.append({"n": n, "model": model.name, "beta": beta, "t": t, "count": count, "reps": cfg.replicates})
            top = max(res.selection_frequency.items(), key=lambda kv: kv[1])
            lines.append(f"n={n} model={model.name}: most selected alpha={top[0]} ({top[1]}/{cfg.replicates})")
    write_csv(cfg.out_dir / "selection.csv", ["n", "model", "beta", "t", "count", "reps"], rows)
    return lines


def _risk_rows(rep, per_gamma, robust):
    per_gamma.extend(rep.per_gamma_rows())
    for name, m, s in zip(rep.model_names, rep.selected_mean, rep.selected_se):
        robust.append({"n": rep.n, "estimator": "selected", "model": name, "mean": float(m), "se": float(s),
                       "reps": rep.replicates})
    mean, se, arg = rep.robust_gamma
    i = int(np.argmin(mean))
    g = rep.grid.members[i]
    robust.append({"n": rep.n, "estimator": f"best_fixed(beta={g.beta};t={g.t!r})", "model": rep.model_names[arg[i]],
                   "mean": float(mean[i]), "se": float(se[i]), "reps": rep.replicates})
    sm, ss, sname = rep.robust_selected
    robust.append({"n": rep.n, "estimator": "selected", "model": f"max({sname})", "mean": sm, "se": ss,
                   "reps": rep.replicates})


_PER_GAMMA = ["n", "beta", "t", "mean", "se", "reps"]
_ROBUST = ["n", "estimator", "model", "mean", "se", "reps"]


def cmd_risk(cfg: ExperimentConfig) -> list:
    per_gamma, robust, lines = [], [], []
    for n in _require_n(cfg):
        rep = risk_report(_signal(cfg, n), cfg.panel, _grid(cfg, n), cfg.rho_for(n), n, cfg.replicates,
                          cfg.master_seed, cfg.workers)
        _risk_rows(rep, per_gamma, robust)
        sm, ss, sname = rep.robust_selected
        lines.append(f"n={n}: robust risk of selected estimator {sm:.6g} +- {ss:.2g} (worst member {sname})")
    write_csv(cfg.out_dir / "risk_per_gamma.csv", _PER_GAMMA, per_gamma)
    write_csv(cfg.out_dir / "robust.csv", _ROBUST, robust)
    return lines


def cmd_oracle_check(cfg: ExperimentConfig) -> list:
    C = cfg.run.get("slack_constant")
    rows, per_gamma, robust, lines, failed = [], [], [], [], []
    for n in _require_n(cfg):
        rho = cfg.rho_for(n)
        rep = oracle_check(_signal(cfg, n), cfg.panel, _grid(cfg, n), rho, n, cfg.replicates, cfg.master_seed,
                           cfg.workers, None if C is None else float(C))
        rows.append({"lhs": rep.lhs, "rhs_main": rep.rhs_main, "slack": rep.slack, "verdict": rep.verdict})
        _risk_rows(rep.report, per_gamma, robust)
        lines.append(
            f"n={n} rho={rho:.4g} coef={rep.coefficient:.6g}: LHS={rep.lhs:.6g} (se {rep.lhs_se:.2g}), "
            f"RHS_main={rep.rhs_main:.6g}, allowance={rep.allowance:.3g}, 3SE={3 * rep.combined_se:.3g} -> {rep.verdict}"
        )
        if not rep.consistent:
            failed.append(n)
    write_csv(cfg.out_dir / "oracle.csv", ["lhs", "rhs_main", "slack", "verdict"], rows)
    write_csv(cfg.out_dir / "risk_per_gamma.csv", _PER_GAMMA, per_gamma)
    write_csv(cfg.out_dir / "robust.csv", _ROBUST, robust)
    if failed:
        raise VerdictFailure(lines, f"oracle inequality violated at n={failed}")
    return lines


def cmd_efficiency(cfg: ExperimentConfig) -> list:
    params = cfg.signal_spec.get("params", {})
    k, r = _as_int(params.get("k", 1), "signal.params.k"), float(params.get("r", 1.0))
    n_list = _require_n(cfg)
    rho = cfg.rho
    rows = efficiency_curve(k, r, cfg.panel, n_list, cfg.replicates, cfg.master_seed, rho_rule=rho,
                            grid_overrides=cfg.grid_overrides, workers=cfg.workers)
    write_csv(cfg.out_dir / "efficiency.csv", ["n", "ratio", "side"],
              [{"n": row.n, "ratio": row.ratio, "side": row.bound_side} for row in rows])
    lines = [f"n={row.n} {row.bound_side}: ratio {row.ratio:.5f} (se {row.std_error:.2g}, signal {row.signal_label})"
             for row in rows]
    cap = cfg.run.get("ratio_cap")
    if cap is not None:
        last = [row for row in rows if row.n == n_list[-1]]
        over = [row.bound_side for row in last if row.ratio - 3.0 * row.std_error > float(cap)]
        if over:
            raise VerdictFailure(lines, f"efficiency ratio above cap {cap} at n={n_list[-1]} ({over})")
        lines.append(f"ratio cap {cap} respected at n={n_list[-1]}")
    return lines


def cmd_lower_bound(cfg: ExperimentConfig) -> list:
    lb = cfg.lowerbound
    try:
        k, r, eps = _as_int(lb.get("k", 1), "lowerbound.k"), float(lb.get("r", 1.0)), float(lb.get("eps", 0.1))
        eta = lb.get("eta", 1e-3)
        rule = lb.get("n_rule")
        n_list = []
        for v in lb.get("n_list", ["min_feasible"]):
            n_list.append(min_feasible_n(k, r, cfg.sigma_star, eps, rule) if v == "min_feasible" else _as_int(v, "lowerbound.n_list"))
        rows = pinsker_limit_check(k, r, cfg.sigma_star, eps, n_list, rule, None if eta is None else float(eta))
    except DomainError as exc:
        raise ConfigurationError(str(exc)) from None
    write_csv(cfg.out_dir / "lowerbound.csv", ["n", "bound", "limit_form", "target", "gap"],
              [vars(row) for row in rows])
    lines = [f"n={row.n}: h={row.h:.4g} N={row.N} M={row.M} bound={row.bound:.8f} limit={row.limit_form:.8f} "
             f"target={row.target:.8f} gap={row.gap:.3g}" for row in rows]
    max_gap = lb.get("max_gap")
    if max_gap is not None:
        if rows[-1].gap >= float(max_gap):
            raise VerdictFailure(lines, f"gap {rows[-1].gap:.3g} >= {max_gap} at the largest n")
        lines.append(f"gap below {max_gap} at the largest n")
    return lines


HANDLERS = {
    "simulate": cmd_simulate,
    "select": cmd_select,
    "risk": cmd_risk,
    "oracle-check": cmd_oracle_check,
    "efficiency": cmd_efficiency,
    "lower-bound": cmd_lower_bound,
}


def _write_summary(cfg, command, lines, status, elapsed):
    echo = {
        "command": command,
        "master_seed": cfg.master_seed,
        "workers": cfg.workers,
        "replicates": cfg.replicates,
        "config": cfg.raw,
    }
    text = [f"status: {status}", f"wall time: {elapsed:.2f} s", "", *lines, "", "inputs:", json.dumps(echo, indent=2)]
    (cfg.out_dir / "summary.txt").write_text("\n".join(text) + "\n")


def run(command: str, config_path, out=None, seed=None, workers=None) -> int:
    """Execute one command; returns the exit status."""
    started = time.perf_counter()
    try:
        cfg = load_config(config_path, out, seed, workers, needs_panel=command != "lower-bound")
        if cfg.panel is not None:
            _require_n(cfg)
            _validate_panel(cfg)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        if not os.access(cfg.out_dir, os.W_OK):
            raise ConfigurationError(f"output directory is not writable: {cfg.out_dir}")
    except MembershipError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for name, m in exc.report.items():
            print(f"  {name}: passed={m.passed} l_n={m.l_n:.4g} margins=({m.budget_margin:.3g}, "
                  f"{m.jump_margin:.3g}, {m.family_margin:.3g}) {list(m.failures)}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        lines = HANDLERS[command](cfg)
        status = EXIT_OK
    except VerdictFailure as exc:
        lines, why = exc.args
        print(f"verdict failed: {why}", file=sys.stderr)
        lines = [*lines, f"FAILED: {why}"]
        status = EXIT_VERDICT
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything else is a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _write_summary(cfg, command, lines, status, time.perf_counter() - started)
    for line in lines:
        log.info(line)
    return status


def main(argv=None) -> int:
    level = os.environ.get("TOOL_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(prog="robustms", description="Robust model-selection experiments")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON experiment configuration")
    parser.add_argument("--out", help="output directory (default: run.out_dir or ./out)")
    parser.add_argument("--seed", type=int, help="master seed, overrides run.master_seed")
    parser.add_argument("--workers", type=int, help="worker processes; affects wall time only")
    args = parser.parse_args(argv)
    return run(args.command, args.config, args.out, args.seed, args.workers)


if __name__ == "__main__":
    sys.exit(main())
