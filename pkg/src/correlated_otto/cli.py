"""Command-line front end: parameter sweeps as CSV, verification reports as JSON.

Config files are flat ``key = value`` text with ``#`` comments.  Keys are the
CycleConfig fields (``xi`` may be replaced by ``discord``), the sweep fields
``variable, lo, hi, points, scale`` and the run options ``dim, seed, samples``.
The correlations command reads ``beta`` and ``omega`` for the atom pair.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import correlations as corr
from .cycle import CycleConfig, Mode, Variant, cycle_moments, characteristic_function, log_char_derivatives, reservoirs
from .errors import OttoError, TruncationError
from .fock_dynamics import (
    DEFAULT_GUARD, analytic_steady_state, lindblad_steady_state, lindblad_steady_state_nullspace,
    nonadiabatic_factor_analytic, nonadiabatic_factor_numeric, trace_distance,
)
from .reservoir import ReservoirKind, arrival_rates, beta_eff_closed_form, ReservoirSpec
from .stochastic import (
    build_joint_distribution, build_reversed_distribution, entropy_production_values,
    fluctuation_theorem_check, sample_trajectories, suggest_dim,
)

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_DOMAIN = 0, 1, 2, 3

SWEEP_VARIABLES = ("xi", "discord", "tau_dri", "omega_h", "beta_h")
CONFIG_FLOAT_KEYS = ("omega_c", "omega_h", "beta_c", "beta_h", "xi", "discord", "tau_dri",
                     "beta", "omega", "lo", "hi")
CONFIG_INT_KEYS = ("points", "dim", "seed", "samples", "workers")
CONFIG_STR_KEYS = ("variant", "variable", "scale")
KNOWN_KEYS = set(CONFIG_FLOAT_KEYS + CONFIG_INT_KEYS + CONFIG_STR_KEYS)


class UsageError(Exception):
    pass


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    return values


def coerce(values: dict) -> dict:
    out = {}
    for key, value in values.items():
        if key not in KNOWN_KEYS:
            raise UsageError(f"unknown config key {key!r}")
        try:
            if key in CONFIG_FLOAT_KEYS:
                out[key] = float(value)
            elif key in CONFIG_INT_KEYS:
                out[key] = int(value)
            else:
                out[key] = str(value)
        except ValueError:
            raise UsageError(f"bad value for {key}: {value!r}") from None
    return out


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    lo: float
    hi: float
    points: int
    scale: str
    fixed: dict

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise UsageError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {self.variable!r}")
        if not (self.lo < self.hi) or self.points < 2:
            raise UsageError("sweep needs lo < hi and points >= 2")
        if self.scale not in ("linear", "log"):
            raise UsageError(f"scale must be linear or log, got {self.scale!r}")
        if self.scale == "log" and self.lo <= 0:
            raise UsageError("log sweeps need lo > 0")
        pinned = {"xi", "discord"} if self.variable in ("xi", "discord") else {self.variable}
        clash = pinned & set(self.fixed)
        if clash:
            raise UsageError(f"swept variable also fixed in config: {sorted(clash)}")

    def grid(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.lo, self.hi, self.points)
        return np.linspace(self.lo, self.hi, self.points)


def sweep_from(values: dict, fixed_keys) -> SweepSpec:
    missing = [k for k in ("variable", "lo", "hi", "points") if k not in values]
    if missing:
        raise UsageError(f"sweep config missing {missing}")
    fixed = {k: values[k] for k in fixed_keys if k in values}
    return SweepSpec(values["variable"], values["lo"], values["hi"], values["points"],
                     values.get("scale", "linear"), fixed)


def config_from(values: dict) -> CycleConfig:
    """Single CycleConfig; a `discord` entry is converted to the matching xi."""
    need = [k for k in ("omega_c", "omega_h", "beta_c", "beta_h", "tau_dri") if k not in values]
    if "xi" not in values and "discord" not in values:
        need.append("xi or discord")
    if need:
        raise UsageError(f"config missing {need}")
    if "xi" in values and "discord" in values:
        raise UsageError("give either xi or discord, not both")
    cfg = CycleConfig(omega_c=values["omega_c"], omega_h=values["omega_h"], beta_c=values["beta_c"],
                      beta_h=values["beta_h"], xi=values.get("xi", 0.0), tau_dri=values["tau_dri"],
                      variant=values.get("variant", Variant.HOT_NONTHERMAL.value))
    if "discord" in values:
        cfg = cfg.with_discord(values["discord"])
    return cfg


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Mode):
        return value.value
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".12g")


def write_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_correlations(values: dict) -> str:
    if values.get("variable", "xi") != "xi":
        raise UsageError("the correlations sweep runs over xi")
    values = dict(values, variable="xi")
    beta = values.get("beta", values.get("beta_h"))
    omega = values.get("omega", values.get("omega_h"))
    if beta is None or omega is None:
        raise UsageError("correlations needs beta and omega")
    spec = sweep_from(values, ("xi", "discord"))
    rows = []
    for xi in spec.grid():
        state = corr.thermal_state(beta, omega, float(xi))
        rows.append((xi, corr.discord(state).discord, corr.concurrence(state)))
    return write_csv(("xi", "discord", "concurrence"), rows)


CYCLE_COLUMNS = ("xi", "discord", "minus_w", "q_h", "q_c", "eta_th", "cop", "power", "phi",
                 "mode", "cv_power", "tur_bound", "sigma", "beta_h_eff", "beta_c_eff",
                 "generalized_carnot")


def cycle_row(cfg: CycleConfig):
    m = cycle_moments(cfg)
    return (cfg.xi, cfg.discord(), -m.mean_w, m.mean_qh, m.mean_qc, m.eta_th, m.cop, m.power,
            m.phi, m.mode, m.cv_power, m.tur_bound, m.sigma_mean, m.beta_h_eff, m.beta_c_eff,
            m.generalized_carnot)


def cmd_cycle(values: dict) -> str:
    spec = sweep_from(values, ("xi", "discord", "tau_dri", "omega_h", "beta_h"))
    base = {k: v for k, v in values.items() if k not in ("variable", "lo", "hi", "points", "scale")}
    header = CYCLE_COLUMNS if spec.variable in ("xi", "discord") else (spec.variable,) + CYCLE_COLUMNS
    rows = []
    for x in spec.grid():
        point = dict(base)
        point[spec.variable] = float(x)
        row = cycle_row(config_from(point))
        if spec.variable == "discord":
            # report the requested discord rather than the re-evaluated one
            row = row[:1] + (float(x),) + row[2:]
        if spec.variable not in ("xi", "discord"):
            row = (float(x),) + row
        rows.append(row)
    return write_csv(header, rows)


def cmd_sample(values: dict) -> tuple[str, dict]:
    cfg = config_from(values)
    dim = values.get("dim") or suggest_dim(cfg)
    dist = build_joint_distribution(cfg, dim)
    res = sample_trajectories(dist, values.get("samples", 100000), values.get("seed", 0),
                              workers=values.get("workers", 1))
    order = np.lexsort((dist.b, dist.a))
    rows = [(dist.a[i], dist.b[i], dist.w[i], dist.q_h[i], dist.prob[i], res.counts[i],
             res.counts[i] / res.n_samples) for i in order if res.counts[i] > 0 or dist.prob[i] > 1e-15]
    summary = {"n_samples": res.n_samples, "seed": res.seed, "workers": res.workers, "dim": dim,
               "mean_w": res.mean_w, "se_mean_w": res.se_mean_w, "var_w": res.var_w,
               "se_var_w": res.se_var_w, "mean_qh": res.mean_qh, "se_mean_qh": res.se_mean_qh}
    return write_csv(("a", "b", "w", "q_h", "prob", "count", "frequency"), rows), summary


def _rel(a, b, floor=1e-9):
    return abs(a - b) / max(abs(a), abs(b), floor)


def _check(report, name, fn):
    """Run one check; failures of the numerics are recorded, not raised."""
    try:
        measured, tolerance, passed, extra = fn()
        entry = {"passed": bool(passed), "measured": measured, "tolerance": tolerance}
        entry.update(extra)
    except OttoError as exc:
        entry = {"passed": False, "error": f"{type(exc).__name__}: {exc}"}
        if isinstance(exc, TruncationError) and exc.required_dim is not None:
            entry["required_dim"] = exc.required_dim
    report[name] = entry


def cmd_verify(values: dict) -> dict:
    cfg = config_from(values)
    dim = values.get("dim") or suggest_dim(cfg)
    seed = values.get("seed", 0)
    n_samples = values.get("samples", 0)
    checks: dict = {}
    cold, hot = reservoirs(cfg)
    m = cycle_moments(cfg)

    def steady_state_tail():
        for label, res in (("cold", cold), ("hot", hot)):
            q = res.r1 / res.r2
            if q ** dim >= 1e-12:
                raise TruncationError(
                    f"{label} steady-state tail q^dim = {q ** dim:.3e} exceeds 1e-12 at dim={dim}",
                    required_dim=int(math.ceil(math.log(1e-12) / math.log(q))) + 1)
        return max(cold.r1 / cold.r2, hot.r1 / hot.r2) ** dim, 1e-12, True, {}

    def steady_state():
        worst = 0.0
        agreement = 0.0
        for res in (cold, hot):
            ode = lindblad_steady_state(res, dim=dim).entries
            null = lindblad_steady_state_nullspace(res, dim=dim).entries
            exact = analytic_steady_state(res, dim)
            worst = max(worst, trace_distance(ode, exact))
            agreement = max(agreement, trace_distance(ode, null))
        return worst, 1e-6, worst < 1e-6 and agreement < 1e-6, {"ode_vs_nullspace": agreement}

    def beta_eff():
        kind = (ReservoirKind.CORRELATED_PAIR_ONE_ATOM if cfg.variant is Variant.HOT_NONTHERMAL
                else ReservoirKind.CORRELATED_PAIR_TWO_ATOMS)
        beta, omega = cfg.pair_parameters()
        r1, r2 = arrival_rates(ReservoirSpec(kind, beta, omega, cfg.xi))
        err = abs(beta_eff_closed_form(kind, beta, omega, cfg.xi) + math.log(r1 / r2) / omega)
        return err, 1e-12, err < 1e-12, {}

    def discord():
        beta, omega = cfg.pair_parameters()
        res = corr.discord(corr.thermal_state(beta, omega, cfg.xi))
        err = abs(res.discord - res.swept_discord)
        return err, 1e-9, err < 1e-9, {"discord": res.discord}

    def phi():
        num = nonadiabatic_factor_numeric(cfg.tau_dri, cfg.omega_c, cfg.omega_h, dim=dim)
        ana = nonadiabatic_factor_analytic(cfg.tau_dri, cfg.omega_c, cfg.omega_h)
        return abs(num - ana), 1e-3, abs(num - ana) < 1e-3, {"phi_analytic": ana, "phi_numeric": num}

    dists = {}

    def distributions():
        if "fwd" not in dists:
            dists["fwd"] = build_joint_distribution(cfg, dim, DEFAULT_GUARD)
            dists["rev"] = build_reversed_distribution(cfg, dim, DEFAULT_GUARD)
        return dists["fwd"], dists["rev"]

    def oracle_triangle():
        fwd, _ = distributions()
        d = log_char_derivatives(cfg)
        errs = {
            "mean_w_closed_vs_fd": _rel(m.mean_w, d.mean_w),
            "mean_w_closed_vs_dist": _rel(m.mean_w, fwd.mean_w()),
            "mean_w_fd_vs_dist": _rel(d.mean_w, fwd.mean_w()),
            "mean_qh_closed_vs_fd": _rel(m.mean_qh, d.mean_qh),
            "mean_qh_closed_vs_dist": _rel(m.mean_qh, fwd.mean_qh()),
            "mean_qh_fd_vs_dist": _rel(d.mean_qh, fwd.mean_qh()),
            "var_w_fd_vs_dist": _rel(d.var_w, fwd.var_w()),
            "var_w_closed_form_vs_dist": _rel(m.var_w_closed_form, fwd.var_w()),
        }
        worst = max(errs.values())
        return worst, 1e-6, worst < 1e-6, {"pairs": errs}

    def characteristic():
        fwd, _ = distributions()
        grid = np.linspace(-0.3, 0.3, 5)
        err = max(abs(fwd.characteristic_function(u, v) - characteristic_function(u, v, cfg))
                  for u in grid for v in grid)
        return err, 1e-6, err < 1e-6, {}

    def entropy_mean():
        fwd, _ = distributions()
        s = float(np.dot(fwd.prob, entropy_production_values(fwd, cfg)) / fwd.total)
        err = abs(s - m.sigma_mean)
        return err, 1e-8, err < 1e-8, {"sigma_mean": m.sigma_mean}

    def fluctuation():
        fwd, rev = distributions()
        fc = fluctuation_theorem_check(fwd, rev, cfg)
        ok = (fc.max_pointwise_error < 1e-8 and abs(fc.slope - 1) < 0.01
              and abs(fc.intercept) < 0.01 and abs(fc.integral - 1) < 1e-6)
        return fc.max_pointwise_error, 1e-8, ok, {
            "slope": fc.slope, "intercept": fc.intercept, "integral_minus_one": fc.integral - 1,
            "n_points": fc.n_points, "leak_forward": fwd.leak, "leak_reversed": rev.leak}

    def tur():
        if m.mode is not Mode.ENGINE:
            return None, None, True, {"skipped": f"mode is {m.mode.value}"}
        fwd, _ = distributions()
        cv = fwd.cv_power()
        return cv - m.tur_bound, 0.0, cv >= m.tur_bound, {"cv_power": cv, "tur_bound": m.tur_bound}

    def monte_carlo():
        fwd, _ = distributions()
        res = sample_trajectories(fwd, n_samples, seed)
        zw = abs(res.mean_w - m.mean_w) / res.se_mean_w
        zq = abs(res.mean_qh - m.mean_qh) / res.se_mean_qh
        z = max(zw, zq)
        return z, 3.0, z < 3.0, {"z_mean_w": zw, "z_mean_qh": zq}

    _check(checks, "steady_state_tail", steady_state_tail)
    if checks["steady_state_tail"]["passed"]:
        _check(checks, "steady_state", steady_state)
    _check(checks, "beta_eff", beta_eff)
    _check(checks, "discord", discord)
    _check(checks, "phi", phi)
    _check(checks, "oracle_triangle", oracle_triangle)
    _check(checks, "characteristic_function", characteristic)
    _check(checks, "entropy_production_mean", entropy_mean)
    _check(checks, "fluctuation_theorem", fluctuation)
    _check(checks, "tur", tur)
    if n_samples > 0:
        _check(checks, "monte_carlo", monte_carlo)
    return {
        "config": {"omega_c": cfg.omega_c, "omega_h": cfg.omega_h, "beta_c": cfg.beta_c,
                   "beta_h": cfg.beta_h, "xi": cfg.xi, "tau_dri": cfg.tau_dri,
                   "variant": cfg.variant.value},
        "dim": dim, "seed": seed, "samples": n_samples, "mode": m.mode.value,
        "checks": checks,
        "passed": all(c["passed"] for c in checks.values()),
    }


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--dim", type=int, help="Fock cutoff including the guard band")
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--variant", choices=[v.value for v in Variant])
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    parser = _Parser(prog="correlated-otto", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("correlations", parents=[common], help="discord and concurrence versus xi")
    sub.add_parser("cycle", parents=[common], help="cycle observables along a sweep")
    sub.add_parser("verify", parents=[common], help="run every oracle cross-check")
    sub.add_parser("sample", parents=[common], help="Monte Carlo histogram of (w, q_h)")
    return parser


def gather_values(args) -> dict:
    raw = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        raw[key] = value
    for key in ("dim", "seed", "samples", "variant"):
        if getattr(args, key) is not None:
            raw[key] = str(getattr(args, key))
    return coerce(raw)


def _emit(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        values = gather_values(args)
        if args.command == "correlations":
            _emit(cmd_correlations(values), args.out)
        elif args.command == "cycle":
            _emit(cmd_cycle(values), args.out)
        elif args.command == "sample":
            text, summary = cmd_sample(values)
            _emit(text, args.out)
            sys.stderr.write(json.dumps(summary, sort_keys=True) + "\n")
        else:
            report = cmd_verify(values)
            _emit(json.dumps(report, sort_keys=True, indent=2) + "\n", args.out)
            return EXIT_OK if report["passed"] else EXIT_VERIFY
        return EXIT_OK
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (OttoError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
