"""Command line driver: ``heisrect <command> --config FILE [--set key=value]...``.

Every command computes a table, then writes it with a version line and the
resolved configuration as header.  Exit codes: 0 all asserted bounds pass,
1 a bound is violated (the output is still written), 2 config or usage error
(no output), 3 numerical failure (no output).
"""

import csv
import io
import json
import sys
from dataclasses import dataclass, field

import click
import numpy as np

from heisrect import kernels
from heisrect.builder import (
    auto_tau_for,
    envelope_slope,
    resolve_scales,
    run_pipeline,
    verify_comp,
    verify_iso,
)
from heisrect.config import load_config
from heisrect.cubes import build_fat_cantor
from heisrect.errors import HeisrectError, UsageError
from heisrect.flagcorr import FlagOracle, flag_approx_error
from heisrect.graph import graph_points, intrinsic_gradient, lip_estimate, vertical_holder_quotients
from heisrect.group import w_norm
from heisrect.planecorr import PlaneOracle, plane_approx_error
from heisrect.surfaces import make_surface

OUTPUT_VERSION = "# heisrect-output v1"


@dataclass
class Result:
    columns: list
    rows: list
    summary: dict = field(default_factory=dict)
    passed: bool = True


# ---------------------------------------------------------------- setup


def make_oracle(cfg, phi):
    kind = cfg["oracle"]["kind"]
    if kind == "auto":
        kind = "flag" if phi.n == 1 else "plane"
    tol = cfg["tolerances"]["nearest_point"]
    if kind == "flag":
        return FlagOracle(phi, tol, cfg["ode"]["step"])
    return PlaneOracle(phi, tol)


def _surface(cfg):
    return make_surface(cfg["surface"]["kind"], cfg["group"]["n"], cfg["surface"]["params"])


def _rng(cfg):
    return np.random.default_rng(cfg["sampling"]["seed"])


def _alpha(cfg, oracle):
    a = cfg["cantor"]["alpha"]
    return oracle.declared_alpha if a == "auto" else float(a)


def _center(cfg):
    c = cfg["cantor"]["center"]
    return np.zeros(2 * cfg["group"]["n"]) if c is None else np.asarray(c, dtype=np.float64)


def _base_w(cfg):
    b = cfg["probe"]["base"]
    return np.zeros(2 * cfg["group"]["n"]) if b is None else np.asarray(b, dtype=np.float64)


def _probe_grid(cfg):
    lo, hi = cfg["probe"]["range"]
    return np.geomspace(lo, hi, cfg["probe"]["points"])


def resolve_scales_cfg(cfg, oracle):
    """Resolve scales.n0 / scales.nmax / cantor.tau / cantor.alpha to numbers (mutates cfg)."""
    alpha = _alpha(cfg, oracle)
    center = _center(cfg)
    sc = cfg["scales"]
    depth = sc["depth"] if sc["nmax"] == "auto" or sc["n0"] == "auto" else sc["nmax"] - sc["n0"]
    tau = cfg["cantor"]["tau"]

    def tau_of(k):
        return auto_tau_for(center, k, k + depth, alpha) if tau == "auto" else float(tau)

    if sc["n0"] == "auto":
        if sc["nmax"] != "auto":
            raise UsageError("scales.nmax requires an explicit scales.n0")
        n0, tau_v = resolve_scales(oracle.declared_L, oracle.declared_A, alpha, depth, tau_of)
    else:
        n0 = int(sc["n0"])
        tau_v = tau_of(n0)
    sc["n0"], sc["nmax"], sc["depth"] = n0, n0 + depth, depth
    cfg["cantor"]["alpha"], cfg["cantor"]["tau"] = alpha, float(tau_v)
    cfg["cantor"]["center"] = center.tolist()
    return n0, n0 + depth, alpha, float(tau_v)


def _slope(x, y):
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    good = (x > 0) & (y > 0)
    if good.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[good]), np.log(y[good]), 1)[0])


def _w_names(n):
    return [f"x{j}" for j in range(2, 2 * n + 1)] + ["t"]


def _h_names(prefix, n):
    return [f"{prefix}x{j}" for j in range(1, 2 * n + 1)] + [f"{prefix}t"]


def _g_names(n):
    return ["gy", "gt"] if n == 1 else [f"gz{j}" for j in range(1, 2 * n - 1)] + ["gt", "gs"]


# ---------------------------------------------------------------- commands


def cmd_surface_info(cfg):
    phi = _surface(cfg)
    rng = _rng(cfg)
    win = cfg["probe"]["window"]
    w = rng.uniform(-win, win, (min(cfg["sampling"]["count"], 400), 2 * phi.n))
    info = phi.describe()
    info["sup_abs"] = phi.sup_abs
    info["lip_estimate"] = lip_estimate(phi, w)
    rows = [[k, json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v]
            for k, v in info.items()]
    return Result(["key", "value"], rows, {"kind": phi.kind})


def cmd_gradient(cfg):
    phi = _surface(cfg)
    if cfg["probe"]["base"] is not None:
        w = _base_w(cfg)[None, :]
    else:
        win = cfg["probe"]["window"]
        w = _rng(cfg).uniform(-win, win, (cfg["sampling"]["count"], 2 * phi.n))
    g = intrinsic_gradient(phi, w)
    cols = _w_names(phi.n) + [f"grad{j}" for j in range(2, 2 * phi.n + 1)]
    return Result(cols, [list(a) + list(b) for a, b in zip(w, g)], {"points": int(w.shape[0])})


def cmd_verify_iso(cfg):
    oracle = make_oracle(cfg, _surface(cfg))
    th = cfg["thresholds"]
    levels = cfg["scales"]["verify"]
    seed = cfg["sampling"]["seed"]
    fits = [verify_iso(oracle, k, cfg["sampling"]["count"], seed + k, factor=th["factor"]) for k in levels]
    rows = [[f.n, f.L_hat, f.A_hat, f.A_at_model, f.envelope, f.passed] for f in fits]
    alpha = oracle.declared_alpha
    slope = envelope_slope(levels, [f.envelope for f in fits])
    exact = all(f.envelope <= 2.0 * oracle.tolerance(f.n) for f in fits)
    slope_ok = len(levels) < 2 or exact or slope <= -(1.0 + alpha) + th["slope_slack"]
    summary = {"envelope_slope": slope, "target_slope": -(1.0 + alpha), "exact": exact,
               "slope_ok": bool(slope_ok), "oracle": oracle.describe()}
    return Result(["n", "L_hat", "A_hat", "A_model", "envelope", "pass"], rows, summary,
                  bool(slope_ok and all(f.passed for f in fits)))


def cmd_verify_comp(cfg):
    oracle = make_oracle(cfg, _surface(cfg))
    th = cfg["thresholds"]
    levels = cfg["scales"]["verify"]
    seed = cfg["sampling"]["seed"]
    fits = [verify_comp(oracle, k, cfg["sampling"]["count"], seed + k) for k in levels]
    ok_level = [f.A_hat <= th["factor"] * oracle.declared_A for f in fits]
    rows = [[f.n, f.envelope, f.slope, f.A_hat, ok] for f, ok in zip(fits, ok_level)]
    alpha = oracle.declared_alpha
    slope = -envelope_slope(levels, [f.envelope for f in fits])
    exact = all(f.envelope <= oracle.tol for f in fits)
    target = 1.0 + alpha / 2.0
    slope_ok = len(levels) < 2 or exact or slope >= target - th["slope_slack"]
    summary = {"comp_slope": slope, "target_slope": target, "exact": exact,
               "slope_ok": bool(slope_ok), "oracle": oracle.describe()}
    return Result(["scale", "deviation", "slope", "A_hat", "pass"], rows, summary,
                  bool(slope_ok and all(ok_level)))


def cmd_cantor(cfg):
    oracle = make_oracle(cfg, _surface(cfg))
    n0, nmax, alpha, tau = resolve_scales_cfg(cfg, oracle)
    c = build_fat_cantor(_center(cfg), n0, nmax, alpha, tau, cfg["cantor"]["kept"],
                         cfg["sampling"]["seed"])
    rows = [[r.level, r.cubes_alive, r.measure_kept, r.min_separation, r.required_separation,
             r.separation_ok, r.diameter_ok, r.nested_ok] for r in c.levels]
    passed = all(r.separation_ok and r.nested_ok for r in c.levels)
    summary = {"measure_kept": c.measure_kept, "measure_root": c.measure_ball,
               "kept_fraction": c.kept_fraction, "tau": c.tau, "twist_radius": c.twist_radius}
    return Result(["level", "cubes_alive", "measure_kept", "min_separation", "required_separation",
                   "separation_ok", "diameter_ok", "nested_ok"], rows, summary, passed)


def _pipeline(cfg):
    oracle = make_oracle(cfg, _surface(cfg))
    n0, nmax, alpha, tau = resolve_scales_cfg(cfg, oracle)
    if alpha != oracle.declared_alpha:
        oracle.declared_alpha = alpha
    res = run_pipeline(oracle, _center(cfg), nmax - n0, n0, tau, cfg["cantor"]["kept"],
                       cfg["sampling"]["pairs"], cfg["sampling"]["count"], cfg["sampling"]["seed"])
    return oracle, res


def _audit_summary(oracle, res):
    a = res.audit
    return {
        "n0": res.n0, "nmax": res.n_max, "tau": res.tau, "ratio_min": a.ratio_min,
        "ratio_max": a.ratio_max, "fitted_iso_L": a.fitted_iso_L, "fitted_iso_A": a.fitted_iso_A,
        "fitted_comp_A": a.fitted_comp_A, "level_increments": a.level_increments,
        "declared_increment_bounds": [float(b) for b in a.increment_bounds],
        "declared_increments_ok": a.increments_ok, "tails": res.tails,
        "tail_bounds": res.tail_bounds, "tails_ok": res.tails_ok, "cascade_ok": a.cascade_ok,
        "ball_ok": a.ball_ok, "level_ratio_ok": a.level_ratio_ok, "passed": res.passed,
        "oracle": oracle.describe(),
    }


def cmd_build_map(cfg):
    oracle, res = _pipeline(cfg)
    t = res.table
    n = t.n
    rows = []
    for li, k in enumerate(t.levels):
        if li + 1 < t.levels.size:
            inc = kernels.dist(t.history[li], t.history[li + 1], n)
        else:
            inc = np.zeros(t.points.shape[0])
        for g, f, d in zip(t.points, t.history[li], inc):
            rows.append([int(k)] + list(g) + list(f) + [d])
    cols = ["level"] + _g_names(n) + _h_names("F", n) + ["increment"]
    return Result(cols, rows, _audit_summary(oracle, res), res.passed)


def cmd_audit(cfg):
    oracle, res = _pipeline(cfg)
    a = res.audit
    row = [a.ratio_min, a.ratio_max, a.fitted_iso_L, a.fitted_comp_A, res.tails_ok, res.passed]
    return Result(["ratio_min", "ratio_max", "L_fit", "A_fit", "tails_ok", "pass"], [row],
                  _audit_summary(oracle, res), res.passed)


def cmd_flag_approx(cfg):
    phi = _surface(cfg)
    if phi.n != 1:
        raise UsageError("flag-approx needs group.n = 1")
    p = graph_points(phi, _base_w(cfg))
    t = _probe_grid(cfg)
    u = np.stack([np.full_like(t, cfg["probe"]["y"]), t], axis=-1)
    err = flag_approx_error(phi, p, u, cfg["ode"]["step"])
    alpha = phi.declared_alpha
    bound = phi.declared_H * t ** ((1.0 + alpha) / 2.0)
    slope = _slope(t, err)
    target = (1.0 + alpha) / 2.0
    flat = bool(np.all(err <= cfg["tolerances"]["nearest_point"]))
    passed = flat or slope >= target - cfg["thresholds"]["flag_exponent_slack"]
    rows = [[a, b, c] for a, b, c in zip(t, err, bound)]
    return Result(["t", "error", "bound"], rows,
                  {"slope": slope, "target_slope": target, "flat": flat}, bool(passed))


def _directions(n, count, rng):
    v = rng.normal(size=(count, 2 * n))
    r = w_norm(v)
    v[:, :-1] /= r[:, None]
    v[:, -1] /= r * r
    return v


def cmd_plane_approx(cfg):
    phi = _surface(cfg)
    if phi.n < 2:
        raise UsageError("plane-approx needs group.n >= 2")
    p = graph_points(phi, _base_w(cfg))
    d = _probe_grid(cfg)
    dirs = _directions(phi.n, cfg["probe"]["directions"], _rng(cfg))
    offs = np.empty((d.size,) + dirs.shape)
    offs[..., :-1] = dirs[None, :, :-1] * d[:, None, None]
    offs[..., -1] = dirs[None, :, -1] * (d * d)[:, None]
    err, _ = plane_approx_error(phi, p, offs)
    err = np.max(err, axis=1)
    alpha = phi.declared_alpha
    bound = phi.declared_H * d ** (1.0 + alpha)
    slope = _slope(d, err)
    target = 1.0 + alpha
    flat = bool(np.all(err <= cfg["tolerances"]["nearest_point"]))
    passed = flat or slope >= target - cfg["thresholds"]["plane_exponent_slack"]
    return Result(["d", "error", "bound"], [[a, b, c] for a, b, c in zip(d, err, bound)],
                  {"slope": slope, "target_slope": target, "flat": flat}, bool(passed))


def cmd_vertical_holder(cfg):
    phi = _surface(cfg)
    win = cfg["probe"]["window"]
    w = _rng(cfg).uniform(-win, win, (cfg["sampling"]["count"], 2 * phi.n))
    gaps = _probe_grid(cfg)
    ww = np.broadcast_to(w[None, :, :], (gaps.size,) + w.shape).copy()
    gg = np.broadcast_to(gaps[:, None], ww.shape[:-1])
    q = vertical_holder_quotients(phi, phi.declared_alpha, ww, gg, cfg["probe"]["two_regime"])
    q = np.max(q, axis=1)
    limit = cfg["thresholds"]["factor"] * phi.declared_H
    return Result(["gap", "quotient"], [[a, b] for a, b in zip(gaps, q)],
                  {"max_quotient": float(np.max(q)), "declared_H": phi.declared_H},
                  bool(np.all(q <= limit)))


COMMANDS = {
    "surface-info": cmd_surface_info,
    "gradient": cmd_gradient,
    "verify-iso": cmd_verify_iso,
    "verify-comp": cmd_verify_comp,
    "cantor": cmd_cantor,
    "build-map": cmd_build_map,
    "audit": cmd_audit,
    "flag-approx": cmd_flag_approx,
    "plane-approx": cmd_plane_approx,
    "vertical-holder": cmd_vertical_holder,
}


# ---------------------------------------------------------------- output


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def render(command, cfg, result):
    """Serialize a result; the body is a pure function of (command, cfg, result)."""
    cfg_json = json.dumps(_jsonable(cfg), sort_keys=True, separators=(",", ":"))
    if cfg["output"]["format"] == "json":
        doc = {"schema": OUTPUT_VERSION[2:], "command": command, "config": json.loads(cfg_json),
               "columns": result.columns, "rows": _jsonable(result.rows),
               "summary": _jsonable(result.summary), "passed": bool(result.passed)}
        return json.dumps(doc, sort_keys=True, indent=1, allow_nan=True) + "\n"
    buf = io.StringIO()
    buf.write(f"{OUTPUT_VERSION}\n# command: {command}\n# config: {cfg_json}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([_cell(v) for v in row])
    summary = json.dumps(_jsonable(result.summary), sort_keys=True, separators=(",", ":"))
    buf.write(f"# summary: {summary}\n# pass: {'true' if result.passed else 'false'}\n")
    return buf.getvalue()


def run(command, cfg):
    """Execute a command on a validated config; returns (exit code, rendered text)."""
    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r}")
    result = COMMANDS[command](cfg)
    return (0 if result.passed else 1), render(command, cfg, result)


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.argument("command", type=click.Choice(sorted(COMMANDS)))
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
              help="JSON run configuration.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a dotted config key; VALUE is parsed as JSON when possible.")
def main(command, config_path, overrides):
    """Run COMMAND with the given configuration."""
    try:
        cfg = load_config(config_path, overrides)
        code, text = run(command, cfg)
    except HeisrectError as exc:
        click.echo(f"heisrect: {exc}", err=True)
        sys.exit(exc.exit_code)
    with open(cfg["output"]["path"], "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    click.echo(f"{command}: {'pass' if code == 0 else 'FAIL'} -> {cfg['output']['path']}", err=True)
    sys.exit(code)
