"""Command-line front end.

    python -m shortcut_gates pulse  [--config FILE] [--out FILE] [--set key=value ...]
    python -m shortcut_gates evolve ...
    python -m shortcut_gates gate   ...
    python -m shortcut_gates sweep  ...
    python -m shortcut_gates figure fig3b ...

Parameters come from built-in defaults, then the figure preset, then the
config file, then flags.  Every output is a CSV with ``#`` provenance lines.
Exit codes: 0 ok, 1 config error, 2 numerical error, 3 threshold violation.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import os
import sys
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .dynamics import (
    EvolutionConfig,
    IntegrationAccuracyError,
    cavity_step_decay_set,
    fidelity,
    lindblad_evolve,
    schrodinger_evolve,
    spontaneous_emission_set,
    sweep_2d,
)
from .gates import (
    FULL,
    HALF,
    execute_plan,
    multiqubit_plan,
    one_qubit_phase_plan,
    resolve_epsilon,
    sweep_pulses,
    three_qubit_ccz_plan,
    transfer_stage,
    two_qubit_cz_plan,
    zeno_stage,
)
from .hilbert import BasisLabel, RangeError, SpaceDescriptor, ket
from .models import one_qubit_hamiltonian

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_THRESHOLD = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "epsilon": 0.25,
    "tf_over_g": 10.0,
    "zeno_tf_over_g": 20 * math.sqrt(2),
    "delta_beta": "pi",
    "g": 1.0,
    "gamma": 0.0,
    "kappa": 0.0,
    "n_steps": 20000,
    "samples": 1001,
    "swapped": False,
    "model": "one_qubit",
    "initial": "",
    "target": "",
    "target_sign": -1.0,
    "labels": "",
    "open": False,
    "protocol": "two_qubit",
    "use_effective": False,
    "exact": False,
    "threshold": None,
    "photon_cutoff": 1,
    "x": "epsilon",
    "y": "tf_over_g",
    "grid.x.min": 0.1,
    "grid.x.max": 1.0,
    "grid.x.count": 30,
    "grid.y.min": 5.0,
    "grid.y.max": 50.0,
    "grid.y.count": 30,
    "workers": 1,
    "output": "",
    "pulse_set": "single",
}

FIGURES = {
    "fig2a": ("pulse", {"epsilon": 0.25, "tf_over_g": 10.0, "delta_beta": "pi"}),
    "fig2b": ("evolve", {"model": "one_qubit", "initial": "1", "labels": "1,2,4"}),
    "fig3a": (
        "sweep",
        {"model": "one_qubit", "x": "epsilon", "y": "tf_over_g",
         "grid.x.min": 0.1, "grid.x.max": 1.0, "grid.y.min": 5.0, "grid.y.max": 50.0},
    ),
    "fig3b": (
        "sweep",
        {"model": "one_qubit", "x": "gamma", "y": "t", "open": True,
         "grid.x.min": 0.0, "grid.x.max": 0.1},
    ),
    "fig4a": ("pulse", {"pulse_set": "two_qubit", "tf_over_g": 10.0}),
    "fig4b": ("evolve", {"model": "transfer", "initial": "01", "labels": "01,02"}),
    "fig4c": ("evolve", {"model": "pair_step", "initial": "12", "labels": "12,21", "zeno_tf_over_g": 10.0}),
    "fig5a": (
        "sweep",
        {"model": "pair_step", "x": "kappa", "y": "t", "open": True,
         "grid.x.min": 0.0, "grid.x.max": 0.1},
    ),
    "fig5b": (
        "sweep",
        {"model": "pair_step", "x": "gamma", "y": "t", "open": True,
         "grid.x.min": 0.0, "grid.x.max": 0.1},
    ),
}

# evolve/sweep model presets: default initial state, target and plotted labels
MODEL_DEFAULTS = {
    "one_qubit": ("1", "1", "1,2,4"),
    "transfer": ("01", "02", "01,02"),
    "pair_step": ("12", "12", "12,21"),
}


# ------------------------------------------------------------------ config


def parse_angle(value) -> float:
    """Numbers, or multiples of pi written as ``pi``, ``pi/2``, ``2*pi``, ``0.5pi``."""
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip().lower().replace(" ", "")
    if "pi" not in text:
        return float(text)
    num, _, den = text.partition("/")
    coeff = num.replace("*", "").replace("pi", "")
    coeff = {"": 1.0, "+": 1.0, "-": -1.0}.get(coeff) or float(coeff)
    return coeff * math.pi / (float(den) if den else 1.0)


def _coerce(key: str, raw):
    default = DEFAULTS.get(key)
    if isinstance(raw, str):
        raw = raw.strip()
    if key == "delta_beta":
        return parse_angle(raw)
    if key == "threshold":
        return None if raw in (None, "", "none") else float(raw)
    if isinstance(default, bool):
        if isinstance(raw, bool):
            return raw
        if str(raw).lower() in ("1", "true", "yes", "on"):
            return True
        if str(raw).lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return str(raw)


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` comments; an optional ``[section]`` header is ignored."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[__flat__]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    values = {}
    for section in parser.sections():
        values.update(parser.items(section))
    return values


def resolve(layers: list[dict]) -> dict:
    """Merge parameter layers left to right and coerce every value to its schema type."""
    params = dict(DEFAULTS)
    for layer in layers:
        for key, raw in layer.items():
            if raw is None:
                continue
            if key not in DEFAULTS:
                raise ConfigError(f"unknown parameter {key!r}")
            try:
                params[key] = _coerce(key, raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    params["delta_beta"] = parse_angle(params["delta_beta"])
    return params


def label_list(text: str) -> list[BasisLabel]:
    try:
        return [BasisLabel.parse(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ------------------------------------------------------------------ output


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def write_csv(path: str, header: list[str], rows, provenance: list[str]) -> None:
    """Atomic CSV write: ``#`` provenance lines, a header row, then ``rows``."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            for line in provenance:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([fmt(v) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".txt")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def provenance(command: str, params: dict, timestamp: bool) -> list[str]:
    lines = [f"tool: shortcut_gates {__version__}", f"command: {command}"]
    lines += [f"{k} = {fmt(params[k])}" for k in sorted(params)]
    if timestamp:
        lines.append(f"timestamp: {datetime.now(timezone.utc).isoformat(timespec='seconds')}")
    return lines


# ------------------------------------------------------------------ builders


def _eps(params, delta_beta, zeno):
    return resolve_epsilon(params["exact"], None if params["exact"] else params["epsilon"], delta_beta, zeno)


@dataclass(frozen=True)
class ModelBuilder:
    """Picklable recipe for the ``one_qubit``, ``transfer`` and ``pair_step`` models."""

    params: tuple

    @classmethod
    def of(cls, params: dict) -> "ModelBuilder":
        return cls(tuple(sorted((k, v) for k, v in params.items())))

    def build(self, **overrides):
        p = dict(self.params)
        p.update(overrides)
        name = p["model"]
        g = p["g"]
        if name == "one_qubit":
            space = SpaceDescriptor(1, 0)
            eps = _eps(p, p["delta_beta"], False)
            model = one_qubit_hamiltonian(sweep_pulses(eps, p["tf_over_g"], p["delta_beta"]), space)
            jumps = spontaneous_emission_set(space, p["gamma"]) if p["open"] else None
            t_f = p["tf_over_g"]
        elif name == "transfer":
            space = SpaceDescriptor(2, p["photon_cutoff"])
            model = transfer_stage(space, 1, _eps(p, HALF, False), p["tf_over_g"], g).model
            jumps = spontaneous_emission_set(space, p["gamma"], atom=1) if p["open"] else None
            t_f = p["tf_over_g"]
        elif name == "pair_step":
            space = SpaceDescriptor(2, p["photon_cutoff"])
            t_f = p["zeno_tf_over_g"]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                stage = zeno_stage(space, [(0, "sin"), (1, "cos")], 1, _eps(p, FULL, True), t_f, FULL, g, "pair step")
            model = stage.model
            jumps = cavity_step_decay_set(space, p["kappa"], p["gamma"]) if p["open"] else None
        else:
            raise ConfigError(f"unknown model {name!r} (one_qubit, transfer, pair_step)")
        return model, space, t_f, jumps

    def states(self):
        p = dict(self.params)
        initial, target, _ = MODEL_DEFAULTS[p["model"]]
        return p["initial"] or initial, p["target"] or target

    def __call__(self, x_name, y_name, x, y):
        """Sweep-cell factory for :func:`sweep_2d`."""
        model, space, t_f, jumps = self.build(**{x_name: x, y_name: y})
        initial, _ = self.states()
        return model, ket(space, initial), EvolutionConfig(t_f, dict(self.params)["n_steps"]), jumps


@dataclass(frozen=True)
class _Cell:
    builder: ModelBuilder
    x_name: str
    y_name: str

    def __call__(self, x, y):
        return self.builder(self.x_name, self.y_name, x, y)


def _target(space, params, builder):
    _, target = builder.states()
    try:
        return params["target_sign"] * ket(space, target), target
    except (RangeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _evolve(model, space, jumps, initial, config):
    psi0 = ket(space, initial)
    if jumps is None:
        return schrodinger_evolve(model, psi0, config)
    return lindblad_evolve(model, jumps, psi0, config)


# ------------------------------------------------------------------ commands


def cmd_pulse(params: dict):
    n = params["samples"]
    t_f = params["tf_over_g"]
    g = params["g"]
    if params["pulse_set"] == "two_qubit":
        # step-1 half sweep pair and step-2 full sweep pair on a shared time axis
        transfer = sweep_pulses(_eps(params, HALF, False), t_f, HALF)
        imprint = sweep_pulses(_eps(params, FULL, True), t_f, FULL)
        t = np.linspace(0, t_f, n)
        header = ["t", "omega1", "omega2", "omega1_cavity_step", "omega2_cavity_step"]
        cols = [t, transfer.omega1(t) / g, transfer.omega2(t) / g, imprint.omega1(t) / g, imprint.omega2(t) / g]
    elif params["pulse_set"] == "single":
        eps = _eps(params, params["delta_beta"], False)
        pulses = sweep_pulses(eps, t_f, params["delta_beta"])
        if params["swapped"]:
            pulses = pulses.swap()
        t, o1, o2 = pulses.sample(n)
        header = ["t", "omega1", "omega2"]
        cols = [t, o1 / g, o2 / g]
    else:
        raise ConfigError(f"unknown pulse_set {params['pulse_set']!r} (single, two_qubit)")
    return header, list(zip(*cols)), None, None


def cmd_evolve(params: dict):
    builder = ModelBuilder.of(params)
    model, space, t_f, jumps = builder.build()
    initial, _ = builder.states()
    labels = label_list(params["labels"] or MODEL_DEFAULTS[params["model"]][2])
    target, target_name = _target(space, params, builder)
    try:
        for lab in labels + [BasisLabel.parse(initial)]:
            space.check_label(lab)
    except (RangeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    n = params["n_steps"]
    record_every = max(1, n // max(1, params["samples"] - 1))
    rec = _evolve(model, space, jumps, initial, EvolutionConfig(t_f, n, record_every))
    pops = rec.populations(labels)
    fids = [fidelity(s, target) for s in rec.states]
    header = ["t"] + [f"pop[{''.join(map(str, l.atom_levels))},{l.photon_number}]" for l in labels] + [
        "fidelity",
        "overlap",
    ]
    rows = [
        [t, *p, f.fidelity_population if not rec.open_system else f.fidelity_overlap, f.fidelity_overlap]
        for t, p, f in zip(rec.times, pops, fids)
    ]
    return header, rows, rows[-1][-2], None


def _time_axis_row(args):
    builder, x_name, x, count = args
    model, space, t_f, jumps = builder.build(**{x_name: x})
    initial, _ = builder.states()
    target, _ = _target(space, dict(builder.params), builder)
    n = dict(builder.params)["n_steps"]
    n = math.ceil(n / (count - 1)) * (count - 1)
    try:
        rec = _evolve(model, space, jumps, initial, EvolutionConfig(t_f, n, n // (count - 1)))
    except Exception as exc:  # noqa: BLE001 - recorded in-row
        return [(x, t, math.nan, math.nan, repr(exc)) for t in np.linspace(0, t_f, count)]
    rows = []
    for t, state in zip(rec.times, rec.states):
        f = fidelity(state, target)
        pop = f.fidelity_overlap if rec.open_system else f.fidelity_population
        rows.append((x, t, pop, f.fidelity_overlap, ""))
    return rows


def cmd_sweep(params: dict):
    builder = ModelBuilder.of(params)
    x_name, y_name = params["x"], params["y"]
    for name in (x_name, y_name):
        if name != "t" and name not in ("epsilon", "tf_over_g", "zeno_tf_over_g", "gamma", "kappa", "g"):
            raise ConfigError(f"cannot sweep {name!r}")
    if x_name == "t":
        raise ConfigError("the time axis must be y")
    builder.build()  # validate the model name early
    xs = np.linspace(params["grid.x.min"], params["grid.x.max"], params["grid.x.count"])
    header = ["x:" + x_name, "y:" + y_name, "fidelity", "overlap", "error"]
    if y_name == "t":
        count = params["grid.y.count"]
        if count < 2:
            raise ConfigError("time-axis sweeps need grid.y.count >= 2")
        jobs = [(builder, x_name, x, count) for x in xs]
        if params["workers"] > 1:
            with ProcessPoolExecutor(params["workers"]) as pool:
                blocks = list(pool.map(_time_axis_row, jobs))
        else:
            blocks = [_time_axis_row(j) for j in jobs]
        rows = [r for block in blocks for r in block]
        final = [b[-1][2] for b in blocks]
    else:
        ys = np.linspace(params["grid.y.min"], params["grid.y.max"], params["grid.y.count"])
        _, space, _, _ = builder.build()
        target, _ = _target(space, params, builder)
        grid = sweep_2d(_Cell(builder, x_name, y_name), xs, ys, target, params["workers"], raise_errors=False)
        open_system = params["open"]
        rows = []
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                err = grid.errors.get((x, y), "")
                f = grid.overlap[i, j] if open_system else grid.population[i, j]
                rows.append((x, y, f, grid.overlap[i, j], err))
        final = [r[2] for r in rows]
    finite = [f for f in final if not math.isnan(f)]
    return header, rows, (min(finite) if finite else math.nan), None


def build_plan(params: dict):
    protocol = params["protocol"]
    exact = params["exact"]
    eps = None if exact else params["epsilon"]
    common = dict(g=params["g"], exact=exact, photon_cutoff=params["photon_cutoff"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if protocol == "one_qubit":
            return one_qubit_phase_plan(eps, params["tf_over_g"], exact)
        if protocol == "two_qubit":
            return two_qubit_cz_plan(eps, eps, params["tf_over_g"], params["zeno_tf_over_g"], **common)
        kw = dict(eps_transfer=eps, eps_pair=eps, eps_imprint=eps,
                  t_transfer=params["tf_over_g"], t_zeno=params["zeno_tf_over_g"], **common)
        if protocol == "three_qubit":
            return three_qubit_ccz_plan(**kw)
        if protocol.startswith("multiqubit:"):
            try:
                n = int(protocol.split(":", 1)[1])
            except ValueError as exc:
                raise ConfigError(f"bad protocol {protocol!r}") from exc
            if n < 3:
                raise ConfigError("multiqubit:n needs n >= 3")
            return multiqubit_plan(n, **kw)
    raise ConfigError(f"unknown protocol {protocol!r} (one_qubit, two_qubit, three_qubit, multiqubit:n)")


def cmd_gate(params: dict):
    plan = build_plan(params)
    lindblad = None
    if params["open"]:
        # cavity and atomic decay during the cavity-assisted stages only
        lindblad = {
            i: cavity_step_decay_set(plan.space, params["kappa"], params["gamma"], tuple(range(plan.n_qubits)))
            for i, step in enumerate(plan.steps)
            if any(s.kind == "zeno" for s in step.stages)
        }
    report = execute_plan(plan, params["use_effective"], lindblad, params["n_steps"], workers=params["workers"])
    names = ["".join(map(str, l.atom_levels)) for l in report.labels]
    header = ["input", "state_fidelity", "phase", "leakage", "max_boundary_population"]
    m = report.realized_matrix
    if m is not None:
        header += [f"re[{n}]" for n in names] + [f"im[{n}]" for n in names]
    rows = []
    for i, name in enumerate(names):
        row = [name, report.state_fidelity[i], report.phases[i], report.leakage[i], report.boundary_populations[i].max()]
        if m is not None:
            row += list(m[:, i].real) + list(m[:, i].imag)
        rows.append(row)
    lines = [
        f"protocol: {params['protocol']}",
        f"steps: {len(plan.steps)}",
        *[f"  {k + 1}. {s.description} (t_f = {fmt(s.duration)})" for k, s in enumerate(plan.steps)],
        f"gate_fidelity: {fmt(report.gate_fidelity)}",
        "input  fidelity  phase  leakage",
        *[f"  |{n}>  {fmt(report.state_fidelity[i])}  {fmt(report.phases[i])}  {fmt(report.leakage[i])}"
          for i, n in enumerate(names)],
        *[f"flag: {f}" for f in report.flags],
    ]
    return header, rows, report.gate_fidelity, "\n".join(lines) + "\n"


COMMANDS = {"pulse": cmd_pulse, "evolve": cmd_evolve, "gate": cmd_gate, "sweep": cmd_sweep}


# ------------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shortcut_gates", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"shortcut_gates {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("pulse", "evolve", "gate", "sweep", "figure"):
        p = sub.add_parser(name)
        if name == "figure":
            p.add_argument("figure_id", choices=sorted(FIGURES))
        p.add_argument("--config", help="flat key = value parameter file")
        p.add_argument("--out", help="output CSV path (default: <command>.csv)")
        p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp provenance line")
        p.add_argument("--exact-epsilon", action="store_true", help="pick angles from the phase condition")
        p.add_argument("--threshold", type=float, help="minimum acceptable fidelity (exit 3 below it)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one parameter")
        p.add_argument("--workers", type=int, help="process pool size for independent runs")
    return parser


def _flag_layer(args) -> dict:
    layer = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        layer[key.strip()] = value
    if args.exact_epsilon:
        layer["exact"] = True
    if args.threshold is not None:
        layer["threshold"] = args.threshold
    if args.workers is not None:
        layer["workers"] = args.workers
    return layer


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        command, preset = args.command, {}
        if command == "figure":
            command, preset = FIGURES[args.figure_id]
        file_layer = read_config_file(args.config) if args.config else {}
        params = resolve([preset, file_layer, _flag_layer(args)])
        label = args.figure_id if args.command == "figure" else command
        out = args.out or params["output"] or f"{label}.csv"
        # an unstable step is reported through IntegrationAccuracyError instead
        with np.errstate(over="ignore", invalid="ignore"):
            header, rows, score, report = COMMANDS[command](params)
        prov = provenance(f"{args.command} {getattr(args, 'figure_id', '')}".strip(), params, not args.no_timestamp)
        write_csv(out, header, rows, prov)
        if report is not None:
            write_text(os.path.splitext(out)[0] + ".report.txt", report)
    except IntegrationAccuracyError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # ConfigError, ParameterError, RangeError, ModelError and bad step counts
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {out}" + (f" (score {fmt(score)})" if score is not None else ""))
    threshold = params["threshold"]
    if threshold is not None and score is not None and not score >= threshold:
        print(f"threshold violation: {fmt(score)} < {fmt(threshold)}", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def main() -> None:
    sys.exit(run())
