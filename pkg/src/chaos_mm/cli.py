"""Command-line driver: binds JSON experiment configs to the simulation and
analysis pipelines and emits deterministic CSV/JSON (and optional SVG) files.

Config layout (one JSON document, exactly one experiment block)::

    {
      "model":      {"kind": "static_risk", "m_x": 1.0, "m_v": 1.0,
                     "k_x": 0.11, "x_0": 3.0, "epsilon": 0.001,
                     "inventory_potential": {"kind": "quadratic", "k_v": 0.1}},
      "integrator": {"scheme": "yoshida4", "dt": 0.01,
                     "n_steps": 100000, "record_every": 1},
      "experiment": {"kind": "poincare", "energy_targets": [1.0],
                     "epsilons": [0.0001, 0.001], "n_paths": 100,
                     "master_seed": 1},
      "output":     {"directory": "out", "formats": ["csv", "json"]}
    }

Every command validates the whole config before computing, writes its CSV
outputs plus a ``<command>_metadata.json`` carrying the fully resolved
config, the effective master seed and the package version, and exits 0 on
success, 2 on config errors, 3 when every path of a run failed.  The
environment variable ``CHAOS_MM_SEED`` overrides the config's master seed.
Numbers are written with 17 significant digits and LF line endings, so
identical configs always produce byte-identical files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .analysis import NoPeakError, dominant_frequency, histogram, subsample
from .ensemble import EnsembleConfig, SamplingBox, SamplingExhaustedError, \
    run_ensemble, run_lyapunov_sweep, sample_initial_condition
from .integrate import SCHEMES, integrate
from .kam import ActionAngle, from_action_angle, predicted_frequencies
from .models import Kick, ModelKind, ModelParams, PhaseState, Quadratic, \
    potential_grid, price_inventory

__all__ = ["ConfigError", "main"]

COMMANDS = ("simulate", "poincare", "lyapunov", "kam-check", "sample-hist",
            "potential-grid")


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _tag(value: float) -> str:
    return f"{value:g}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", newline="\n")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    newline="\n")


def _write_scatter_svg(path: Path, xs, ys, title: str) -> None:
    """Minimal deterministic scatter: 1000x1000 viewBox, unit-radius dots,
    axis annotations carrying the data ranges."""
    size, margin = 1000, 70
    inner = size - 2 * margin
    if len(xs):
        x_lo, x_hi = min(xs), max(xs)
        y_lo, y_hi = min(ys), max(ys)
    else:
        x_lo = x_hi = y_lo = y_hi = 0.0
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {size} {size}">',
        f'<rect x="{margin}" y="{margin}" width="{inner}" height="{inner}" '
        'fill="white" stroke="black" stroke-width="1"/>',
        f'<text x="{size // 2}" y="30" text-anchor="middle" font-size="20">{title}</text>',
        f'<text x="{margin}" y="{size - 20}" font-size="16">x: [{x_lo:.6g}, {x_hi:.6g}]</text>',
        f'<text x="20" y="{margin - 10}" font-size="16">y: [{y_lo:.6g}, {y_hi:.6g}]</text>',
    ]
    sx = inner / (x_hi - x_lo)
    sy = inner / (y_hi - y_lo)
    for x, y in zip(xs, ys):
        cx = margin + (x - x_lo) * sx
        cy = size - margin - (y - y_lo) * sy
        parts.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="1"/>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", newline="\n")


# ---------------------------------------------------------------------------
# config parsing

def _expect_mapping(obj, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(path, "must be a JSON object")
    return obj


def _get_number(d: dict, key: str, path: str, *, required=False, default=None,
                minimum=None, above=None, integer=False):
    if key not in d or d[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}", "is required")
        return default
    val = d[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key}", "must be a number")
    if integer:
        if isinstance(val, float) and not val.is_integer():
            raise ConfigError(f"{path}.{key}", "must be an integer")
        val = int(val)
    else:
        val = float(val)
    if minimum is not None and val < minimum:
        raise ConfigError(f"{path}.{key}", f"must be >= {minimum}")
    if above is not None and not val > above:
        raise ConfigError(f"{path}.{key}", f"must be > {above}")
    return val


def _get_list_of_numbers(d: dict, key: str, path: str, *, required=False,
                         default=None, min_len=1):
    if key not in d or d[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}", "is required")
        return default
    val = d[key]
    if not isinstance(val, list) or len(val) < min_len:
        raise ConfigError(f"{path}.{key}", f"must be a list of at least {min_len} numbers")
    out = []
    for i, v in enumerate(val):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{path}.{key}[{i}]", "must be a number")
        out.append(float(v))
    return out


def _parse_model(d: dict) -> ModelParams:
    d = _expect_mapping(d, "model")
    kind = d.get("kind")
    kinds = {k.value: k for k in ModelKind}
    if kind not in kinds:
        raise ConfigError("model.kind", f"must be one of {sorted(kinds)}")
    fields = dict(
        m_x=_get_number(d, "m_x", "model", default=1.0, above=0.0),
        m_v=_get_number(d, "m_v", "model", default=1.0, above=0.0),
        m_u=_get_number(d, "m_u", "model", default=1.0, above=0.0),
        k_x=_get_number(d, "k_x", "model", default=0.0, minimum=0.0),
        x_0=_get_number(d, "x_0", "model", default=0.0),
        epsilon=_get_number(d, "epsilon", "model", default=0.0, minimum=0.0),
    )
    inv = d.get("inventory_potential")
    pot = None
    if inv is not None:
        inv = _expect_mapping(inv, "model.inventory_potential")
        pkind = inv.get("kind")
        if pkind == "quadratic":
            pot = Quadratic(k_v=_get_number(inv, "k_v", "model.inventory_potential",
                                            required=True, minimum=0.0))
        elif pkind == "kick":
            pot = Kick(k_v=_get_number(inv, "k_v", "model.inventory_potential",
                                       required=True, minimum=0.0),
                       v_max=_get_number(inv, "v_max", "model.inventory_potential",
                                         required=True, above=0.0))
        else:
            raise ConfigError("model.inventory_potential.kind",
                              "must be 'quadratic' or 'kick'")
    try:
        return ModelParams(kinds[kind], inventory_potential=pot, **fields)
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from exc


def _parse_box(d, path: str) -> SamplingBox | None:
    if d is None:
        return None
    d = _expect_mapping(d, path)
    bounds = {}
    for key in ("q1", "q2", "p1", "p2"):
        pair = _get_list_of_numbers(d, key, path, required=True, min_len=2)
        if len(pair) != 2:
            raise ConfigError(f"{path}.{key}", "must be [lo, hi]")
        bounds[key] = (pair[0], pair[1])
    try:
        return SamplingBox(**bounds)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


@dataclass
class IntegratorSettings:
    scheme: str
    dt: float
    n_steps: int
    record_every: int


@dataclass
class RunConfig:
    params: ModelParams
    integrator: IntegratorSettings
    kind: str
    experiment: dict
    output_dir: str
    formats: list[str]
    resolved: dict


def _parse_integrator(d: dict) -> IntegratorSettings:
    d = _expect_mapping(d, "integrator")
    scheme = d.get("scheme", "yoshida4")
    if scheme not in SCHEMES:
        raise ConfigError("integrator.scheme", f"must be one of {sorted(SCHEMES)}")
    return IntegratorSettings(
        scheme=scheme,
        dt=_get_number(d, "dt", "integrator", required=True, above=0.0),
        n_steps=_get_number(d, "n_steps", "integrator", required=True,
                            minimum=1, integer=True),
        record_every=_get_number(d, "record_every", "integrator", default=1,
                                 minimum=1, integer=True),
    )


def _resolve_seed(exp: dict, path: str) -> int:
    seed = _get_number(exp, "master_seed", path, default=0, integer=True)
    env = os.environ.get("CHAOS_MM_SEED")
    if env is not None:
        try:
            seed = int(env)
        except ValueError as exc:
            raise ConfigError("CHAOS_MM_SEED", "must be an integer") from exc
    return seed


def _parse_experiment(d: dict, expected_kind: str, params: ModelParams) -> dict:
    path = "experiment"
    d = _expect_mapping(d, path)
    kind = d.get("kind")
    if kind != expected_kind:
        raise ConfigError(f"{path}.kind", f"must be {expected_kind!r} for this command")
    exp: dict = {"kind": kind}
    if kind in ("simulate", "sample_hist"):
        ic = d.get("ic")
        if ic is not None:
            ic = _get_list_of_numbers(d, "ic", path, min_len=4)
            if len(ic) != 4:
                raise ConfigError(f"{path}.ic", "must be [q1, q2, p1, p2]")
        energy_target = _get_number(d, "energy_target", path)
        if ic is None and energy_target is None:
            raise ConfigError(f"{path}.energy_target",
                              "either an explicit ic or an energy_target is required")
        exp.update(ic=ic, energy_target=energy_target,
                   energy_tol=_get_number(d, "energy_tol", path, default=0.01, above=0.0),
                   master_seed=_resolve_seed(d, path),
                   sampling_box=_parse_box(d.get("sampling_box"), f"{path}.sampling_box"))
        if kind == "sample_hist":
            exp.update(every_n=_get_number(d, "every_n", path, default=100,
                                           minimum=1, integer=True),
                       n_bins=_get_number(d, "n_bins", path, default=50,
                                          minimum=1, integer=True),
                       hist_range=_get_list_of_numbers(d, "hist_range", path))
            if exp["hist_range"] is not None and len(exp["hist_range"]) != 2:
                raise ConfigError(f"{path}.hist_range", "must be [lo, hi]")
    elif kind == "poincare":
        targets = _get_list_of_numbers(d, "energy_targets", path)
        single = _get_number(d, "energy_target", path)
        if targets is None:
            if single is None:
                raise ConfigError(f"{path}.energy_targets", "is required")
            targets = [single]
        epsilons = _get_list_of_numbers(d, "epsilons", path,
                                        default=[params.epsilon])
        exp.update(energy_targets=targets, epsilons=epsilons,
                   n_paths=_get_number(d, "n_paths", path, default=100,
                                       minimum=1, integer=True),
                   energy_tol=_get_number(d, "energy_tol", path, default=0.01, above=0.0),
                   master_seed=_resolve_seed(d, path),
                   sampling_box=_parse_box(d.get("sampling_box"), f"{path}.sampling_box"))
    elif kind == "lyapunov":
        exp.update(energy_target=_get_number(d, "energy_target", path, required=True),
                   epsilons=_get_list_of_numbers(d, "epsilons", path,
                                                 default=[params.epsilon]),
                   n_paths=_get_number(d, "n_paths", path, default=5,
                                       minimum=1, integer=True),
                   renorm_every=_get_number(d, "renorm_every", path, default=10,
                                            minimum=1, integer=True),
                   zero_threshold=_get_number(d, "zero_threshold", path,
                                              default=1e-3, minimum=0.0),
                   energy_tol=_get_number(d, "energy_tol", path, default=0.01, above=0.0),
                   master_seed=_resolve_seed(d, path),
                   sampling_box=_parse_box(d.get("sampling_box"), f"{path}.sampling_box"))
    elif kind == "kam_check":
        if params.model_kind is not ModelKind.STATIC_RISK or \
                not isinstance(params.inventory_potential, Quadratic):
            raise ConfigError("model", "kam_check requires the static model with a "
                                       "quadratic inventory potential")
        exp.update(i_x=_get_number(d, "i_x", path, required=True, minimum=0.0),
                   i_v=_get_number(d, "i_v", path, required=True, minimum=0.0),
                   epsilons=_get_list_of_numbers(d, "epsilons", path, required=True))
    elif kind == "potential_grid":
        if params.model_kind is not ModelKind.STATIC_RISK:
            raise ConfigError("model", "potential_grid requires the static model")
        x_range = _get_list_of_numbers(d, "x_range", path, required=True)
        v_range = _get_list_of_numbers(d, "v_range", path, required=True)
        for name, rng_ in (("x_range", x_range), ("v_range", v_range)):
            if len(rng_) != 2 or not rng_[1] > rng_[0]:
                raise ConfigError(f"{path}.{name}", "must be [lo, hi] with lo < hi")
        exp.update(x_range=tuple(x_range), v_range=tuple(v_range),
                   n=_get_number(d, "n", path, required=True, minimum=2, integer=True))
    else:
        raise ConfigError(f"{path}.kind", "unknown experiment kind")
    return exp


def _model_dict(params: ModelParams) -> dict:
    pot = params.inventory_potential
    if isinstance(pot, Quadratic):
        pot_d = {"kind": "quadratic", "k_v": pot.k_v}
    elif isinstance(pot, Kick):
        pot_d = {"kind": "kick", "k_v": pot.k_v, "v_max": pot.v_max}
    else:
        pot_d = None
    return {"kind": params.model_kind.value, "m_x": params.m_x, "m_v": params.m_v,
            "m_u": params.m_u, "k_x": params.k_x, "x_0": params.x_0,
            "epsilon": params.epsilon, "inventory_potential": pot_d}


def parse_config(raw: dict, expected_kind: str) -> RunConfig:
    raw = _expect_mapping(raw, "config")
    for block in ("model", "integrator", "experiment"):
        if block not in raw:
            raise ConfigError(block, "block is required")
    params = _parse_model(raw["model"])
    integ = _parse_integrator(raw["integrator"])
    exp = _parse_experiment(raw["experiment"], expected_kind, params)
    out = raw.get("output", {})
    out = _expect_mapping(out, "output") if out else {}
    directory = out.get("directory", ".")
    if not isinstance(directory, str):
        raise ConfigError("output.directory", "must be a string")
    formats = out.get("formats", ["csv", "json"])
    if not isinstance(formats, list) or any(f not in ("csv", "json", "svg") for f in formats):
        raise ConfigError("output.formats", "must be a list drawn from ['csv','json','svg']")

    exp_meta = {k: v for k, v in exp.items() if k != "sampling_box"}
    box = exp.get("sampling_box")
    if box is not None:
        exp_meta["sampling_box"] = {"q1": list(box.q1), "q2": list(box.q2),
                                    "p1": list(box.p1), "p2": list(box.p2)}
    resolved = {
        "model": _model_dict(params),
        "integrator": dataclasses.asdict(integ),
        "experiment": exp_meta,
        "output": {"directory": directory, "formats": formats},
    }
    return RunConfig(params=params, integrator=integ, kind=expected_kind.replace("-", "_"),
                     experiment=exp, output_dir=directory, formats=formats,
                     resolved=resolved)


# ---------------------------------------------------------------------------
# commands

def _metadata(rc: RunConfig, command: str, extra: dict) -> dict:
    payload = {
        "command": command,
        "version": __version__,
        "master_seed": rc.experiment.get("master_seed"),
        "config": rc.resolved,
    }
    payload.update(extra)
    return payload


def _status_dict(status) -> dict:
    return {"kind": status.kind, "step": status.step}


def _single_path_ic(rc: RunConfig):
    exp = rc.experiment
    if exp.get("ic") is not None:
        q1, q2, p1, p2 = exp["ic"]
        return PhaseState(q1, q2, p1, p2, 0.0)
    cfg = EnsembleConfig(params=rc.params, energy_target=exp["energy_target"],
                         n_paths=1, master_seed=exp["master_seed"],
                         dt=rc.integrator.dt, n_steps=rc.integrator.n_steps,
                         scheme=rc.integrator.scheme, energy_tol=exp["energy_tol"],
                         sampling_box=exp.get("sampling_box"))
    return sample_initial_condition(cfg, 0)


def cmd_simulate(rc: RunConfig, out_dir: Path, workers: int, svg: bool) -> int:
    try:
        ic = _single_path_ic(rc)
    except SamplingExhaustedError as exc:
        _write_json(out_dir / "simulate_metadata.json",
                    _metadata(rc, "simulate", {"error": str(exc), "outputs": []}))
        return 3
    integ = rc.integrator
    traj = integrate(rc.params, ic, integ.dt, integ.n_steps,
                     scheme=integ.scheme, record_every=integ.record_every)
    rows = []
    for idx, state in enumerate(traj.states):
        x, v = price_inventory(rc.params, state)
        rows.append((idx * integ.record_every, state.t, x, v, state.p1,
                     state.p2, float(traj.energies[idx])))
    _write_csv(out_dir / "trajectory.csv",
               ["step", "t", "x", "v", "p_x", "p_v", "energy"], rows)
    _write_json(out_dir / "simulate_metadata.json",
                _metadata(rc, "simulate", {"status": _status_dict(traj.status),
                                           "outputs": ["trajectory.csv"]}))
    return 0


def cmd_poincare(rc: RunConfig, out_dir: Path, workers: int, svg: bool) -> int:
    exp = rc.experiment
    integ = rc.integrator
    combos = [(e, eps) for e in exp["energy_targets"] for eps in exp["epsilons"]]
    multi = len(combos) > 1
    outputs = []
    statuses = {}
    all_failed = False
    for energy_target, eps in combos:
        params = dataclasses.replace(rc.params, epsilon=eps)
        cfg = EnsembleConfig(params=params, energy_target=energy_target,
                             n_paths=exp["n_paths"], master_seed=exp["master_seed"],
                             dt=integ.dt, n_steps=integ.n_steps, scheme=integ.scheme,
                             energy_tol=exp["energy_tol"],
                             sampling_box=exp.get("sampling_box"))
        result = run_ensemble(cfg, "poincare", workers=workers)
        if result.n_failed == cfg.n_paths:
            all_failed = True
        section = result.poincare_section()
        stem = (f"poincare_E{_tag(energy_target)}_eps{_tag(eps)}" if multi
                else "poincare")
        rows = [(p.path_id, p.t, p.x, p.p_x) for p in section.points]
        _write_csv(out_dir / f"{stem}.csv", ["path_id", "t_cross", "x", "p_x"], rows)
        outputs.append(f"{stem}.csv")
        if svg:
            _write_scatter_svg(out_dir / f"{stem}.svg",
                               [p.x for p in section.points],
                               [p.p_x for p in section.points],
                               f"section E={_tag(energy_target)} eps={_tag(eps)}")
            outputs.append(f"{stem}.svg")
        statuses[stem] = {
            "failed_paths": result.n_failed,
            "path_status_counts": _count_statuses(result),
        }
    _write_json(out_dir / "poincare_metadata.json",
                _metadata(rc, "poincare", {"outputs": outputs, "runs": statuses}))
    return 3 if all_failed else 0


def _count_statuses(result) -> dict:
    counts: dict[str, int] = {}
    for p in result.paths:
        key = p.status.kind if p.status is not None else "sampling_failed"
        counts[key] = counts.get(key, 0) + 1
    return counts


def cmd_lyapunov(rc: RunConfig, out_dir: Path, workers: int, svg: bool) -> int:
    exp = rc.experiment
    integ = rc.integrator
    rows = []
    outputs = ["lyapunov.csv"]
    runs = {}
    all_failed = False
    base_cfg = EnsembleConfig(params=rc.params, energy_target=exp["energy_target"],
                              n_paths=exp["n_paths"], master_seed=exp["master_seed"],
                              dt=integ.dt, n_steps=integ.n_steps, scheme=integ.scheme,
                              energy_tol=exp["energy_tol"],
                              sampling_box=exp.get("sampling_box"))
    results = run_lyapunov_sweep(base_cfg, exp["epsilons"], workers=workers,
                                 renorm_every=exp["renorm_every"],
                                 zero_threshold=exp["zero_threshold"])
    for eps, result in zip(exp["epsilons"], results):
        if result.n_failed == base_cfg.n_paths:
            all_failed = True
            runs[_tag(eps)] = {"failed_paths": result.n_failed,
                               "path_status_counts": _count_statuses(result)}
            continue
        for p in result.paths:
            if p.spectrum is None:
                continue
            lams = p.spectrum.exponents
            rows.append((eps, p.path_index, lams[0], lams[1], lams[2], lams[3],
                         p.spectrum.h_ks))
        h_min, h_max, h_mean = result.h_ks_stats()
        rows.append((eps, "min", "", "", "", "", h_min))
        rows.append((eps, "max", "", "", "", "", h_max))
        rows.append((eps, "mean", "", "", "", "", h_mean))
        runs[_tag(eps)] = {"failed_paths": result.n_failed,
                           "path_status_counts": _count_statuses(result)}
    _write_csv(out_dir / "lyapunov.csv",
               ["epsilon", "path_id", "lambda_1", "lambda_2", "lambda_3",
                "lambda_4", "h_ks"], rows)
    _write_json(out_dir / "lyapunov_metadata.json",
                _metadata(rc, "lyapunov", {"outputs": outputs, "runs": runs}))
    return 3 if all_failed else 0


def cmd_kam_check(rc: RunConfig, out_dir: Path, workers: int, svg: bool) -> int:
    exp = rc.experiment
    integ = rc.integrator
    i_x, i_v = exp["i_x"], exp["i_v"]
    rows = []
    for eps in exp["epsilons"]:
        params = dataclasses.replace(rc.params, epsilon=eps)
        report = predicted_frequencies(params, i_x, i_v)
        ic = from_action_angle(params, ActionAngle(i_x, 0.0, i_v, 0.0))
        traj = integrate(params, ic, integ.dt, integ.n_steps,
                         scheme=integ.scheme, record_every=integ.record_every)
        try:
            measured = dominant_frequency(traj.component("q1"), traj.dt)
        except (NoPeakError, ValueError):
            measured = float("nan")
        rows.append((eps, i_x, i_v, report.omega_x, report.omega_v,
                     report.omega_x_pred, report.omega_v_pred, measured,
                     report.resonance_distance))
    _write_csv(out_dir / "kam.csv",
               ["epsilon", "i_x", "i_v", "omega_x", "omega_v", "omega_x_pred",
                "omega_v_pred", "omega_x_measured", "resonance_distance"], rows)
    _write_json(out_dir / "kam-check_metadata.json",
                _metadata(rc, "kam-check", {"outputs": ["kam.csv"]}))
    return 0


def cmd_sample_hist(rc: RunConfig, out_dir: Path, workers: int, svg: bool) -> int:
    exp = rc.experiment
    integ = rc.integrator
    try:
        ic = _single_path_ic(rc)
    except SamplingExhaustedError as exc:
        _write_json(out_dir / "sample-hist_metadata.json",
                    _metadata(rc, "sample-hist", {"error": str(exc), "outputs": []}))
        return 3
    traj = integrate(rc.params, ic, integ.dt, integ.n_steps,
                     scheme=integ.scheme, record_every=integ.record_every)
    xs = subsample(traj, exp["every_n"], "x")
    ts = subsample(traj, exp["every_n"], "t")
    _write_csv(out_dir / "sampled.csv", ["sample_index", "t", "x"],
               [(i, float(t), float(x)) for i, (t, x) in enumerate(zip(ts, xs))])
    rng_ = tuple(exp["hist_range"]) if exp.get("hist_range") else None
    edges, counts = histogram(xs, exp["n_bins"], rng_)
    _write_csv(out_dir / "hist.csv", ["bin_left", "bin_right", "count"],
               [(float(edges[i]), float(edges[i + 1]), int(counts[i]))
                for i in range(len(counts))])
    _write_json(out_dir / "sample-hist_metadata.json",
                _metadata(rc, "sample-hist",
                          {"status": _status_dict(traj.status),
                           "outputs": ["sampled.csv", "hist.csv"]}))
    return 0


def cmd_potential_grid(rc: RunConfig, out_dir: Path, workers: int, svg: bool) -> int:
    exp = rc.experiment
    grid = potential_grid(rc.params, exp["x_range"], exp["v_range"], exp["n"])
    rows = []
    for i, x in enumerate(grid.x_values):
        for j, v in enumerate(grid.v_values):
            rows.append((float(x), float(v), float(grid.values[i, j])))
    _write_csv(out_dir / "potential.csv", ["x", "v", "V"], rows)
    _write_json(out_dir / "potential-grid_metadata.json",
                _metadata(rc, "potential-grid", {"outputs": ["potential.csv"]}))
    return 0


_DISPATCH = {
    "simulate": ("simulate", cmd_simulate),
    "poincare": ("poincare", cmd_poincare),
    "lyapunov": ("lyapunov", cmd_lyapunov),
    "kam-check": ("kam_check", cmd_kam_check),
    "sample-hist": ("sample_hist", cmd_sample_hist),
    "potential-grid": ("potential_grid", cmd_potential_grid),
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chaos-mm",
        description="Market-maker dynamics experiments with deterministic outputs.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--workers", type=int, default=1,
                       help="maximum concurrent path batches")
        p.add_argument("--svg", action="store_true", help="also emit SVG scatter plots")
    args = parser.parse_args(argv)

    try:
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from exc
        expected_kind, runner = _DISPATCH[args.command]
        rc = parse_config(raw, expected_kind)
    except ConfigError as exc:
        print(f"config error: {exc.field}: {exc.message}", file=sys.stderr)
        return 2

    out_dir = Path(args.out) if args.out else Path(rc.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    svg = args.svg or "svg" in rc.formats
    workers = max(1, args.workers)
    return runner(rc, out_dir, workers, svg)


if __name__ == "__main__":
    sys.exit(main())
