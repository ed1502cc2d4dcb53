"""Command-line front end.

Usage::

    drlyap <subcommand> CONFIG.json [--seed S] [--out DIR] [--candidate FILE]

Subcommands: synth, train, validate, radius, reproduce-table1, heatgrid.

Config files are JSON objects with the sections ``system``, ``formulation``,
``samples``, ``train``, ``validate``, ``heatgrid``, ``radius``, ``table1``
and an optional top-level ``seed``.  Every summary embeds the resolved
config, which can be fed back in unchanged.

Exit codes: 0 success, 2 infeasible, 3 config or I/O error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import files, sdp
from .bench import DisturbanceSpec, SampleSet, UncertainSystem, builtin_system, polynomial_system, sample_disturbances
from .nnlf import TrainingConfig, TrainingDivergence, default_config, train
from .poly import Polynomial, PolyVector
from .synth import Formulation, SignMode, SosSynthesisSpec, SynthesisError, synthesize
from .uncertainty import AmbiguityConfig, PolyCandidate, RadiusParams, UncertaintyError, wasserstein_radius
from .validate import ValidationConfig, emit_heatgrid, monte_carlo

logger = logging.getLogger("drlyap")

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4

# offline sampling distribution and Wasserstein radius per builtin case
CASE_DEFAULTS = {
    "poly-case1": {"samples": {"kind": "gaussian", "mean": [5.0, 3.0], "std": [1.0, 1.0]}, "radius": 0.25},
    "poly-case2": {"samples": {"kind": "gaussian", "mean": [6.0, 0.0], "std": [1.0, 1.0]}, "radius": 0.15},
}

# shifted online distributions for the comparison table
TABLE1_ONLINE = {
    "poly-case1": {
        "uniform": {"kind": "uniform", "low": [1.0, 1.0], "high": [4.0, 2.0]},
        "gaussian": {"kind": "gaussian", "mean": [4.0, 1.0], "var": [1.5, 1.5]},
    },
    "poly-case2": {
        "uniform": {"kind": "uniform", "low": [5.0, -1.0], "high": [7.0, 1.0]},
        "gaussian": {"kind": "gaussian", "mean": [7.0, 1.0], "std": [1.0, 1.0]},
    },
}

# NN settings for the comparison table, shared by all three losses
TABLE1_NN_DEFAULTS = {"wrapper": "squared", "gamma": 0.01, "epochs": 3000, "batch_size": 500}

TABLE1_ROWS = ("SOS", "CC-SOS", "DRCC-SOS", "NN", "CC-NN", "DRCC-NN")


class ConfigError(ValueError):
    pass


def _section(raw: dict, key: str) -> dict:
    sec = raw.get(key, {})
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{key}: expected an object, got {type(sec).__name__}")
    return sec


def _field(sec: dict, path: str, key: str, kind, default=None, required: bool = False):
    if key not in sec:
        if required:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    val = sec[key]
    try:
        if kind is tuple:
            return tuple(val)
        return kind(val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.{key}: {exc}") from None


def _distribution(data, path: str) -> DisturbanceSpec:
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a distribution object")
    try:
        return DisturbanceSpec.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad distribution ({exc})") from None


def _polyvector(items, path: str) -> PolyVector:
    try:
        return PolyVector([Polynomial.from_dict(p) for p in items])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad polynomial ({exc})") from None


def _system(sec: dict) -> UncertainSystem:
    if "builtin" in sec:
        try:
            return builtin_system(sec["builtin"], **{k: v for k, v in sec.items() if k != "builtin"})
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"system.builtin: {exc}") from None
    for key in ("f", "d", "region"):
        if key not in sec:
            raise ConfigError(f"system: give 'builtin' or inline 'f', 'd', 'region' (missing {key!r})")
    f = _polyvector(sec["f"], "system.f")
    d = [_polyvector(col, f"system.d[{j}]") for j, col in enumerate(sec["d"])]
    try:
        return polynomial_system(sec.get("name", "inline"), f, d, tuple(tuple(map(float, r)) for r in sec["region"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"system: {exc}") from None


@dataclass
class ExperimentConfig:
    """Fully resolved experiment settings plus the dict they were resolved to."""

    resolved: dict
    system: UncertainSystem
    formulation: Formulation
    synth: SosSynthesisSpec
    ambiguity: AmbiguityConfig
    samples: SampleSet | None
    train: TrainingConfig
    validate: ValidationConfig | None
    online: dict[str, DisturbanceSpec] = field(default_factory=dict)
    heatgrid: dict = field(default_factory=dict)
    radius: RadiusParams | None = None


def resolve_config(raw: dict, seed: int | None = None) -> ExperimentConfig:
    """Validate ``raw`` and fill defaults; ``seed`` overrides every sub-seed."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    base_seed = int(seed if seed is not None else raw.get("seed", 0))
    sys_sec = _section(raw, "system")
    if not sys_sec:
        sys_sec = {"builtin": "poly-case2"}
    system = _system(sys_sec)
    case = CASE_DEFAULTS.get(system.name, {})

    form_sec = _section(raw, "formulation")
    try:
        formulation = Formulation(form_sec.get("kind", "baseline"))
        sign = SignMode(form_sec.get("sign_mode", "derivation"))
    except ValueError as exc:
        raise ConfigError(f"formulation: {exc}") from None
    try:
        ambiguity = AmbiguityConfig(
            _field(form_sec, "formulation", "radius", float, case.get("radius", 0.0)),
            _field(form_sec, "formulation", "beta", float, 0.1),
        )
        synth_spec = SosSynthesisSpec(
            degree=_field(form_sec, "formulation", "degree", int, 4),
            epsilon=_field(form_sec, "formulation", "epsilon", float, 1e-3),
            formulation=formulation,
            ambiguity=ambiguity,
            sign_mode=sign,
        )
    except (UncertaintyError, SynthesisError) as exc:
        raise ConfigError(f"formulation: {exc}") from None

    samp_sec = _section(raw, "samples")
    samples = None
    samp_resolved: dict = {}
    if "values" in samp_sec:
        try:
            samples = SampleSet(np.asarray(samp_sec["values"], dtype=float))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"samples.values: {exc}") from None
        samp_resolved = {"values": samples.samples.tolist()}
    elif samp_sec or case:
        dist_raw = samp_sec.get("distribution", case.get("samples"))
        if dist_raw is None:
            raise ConfigError("samples: give 'values' or a 'distribution'")
        dist = _distribution(dist_raw, "samples.distribution")
        count = _field(samp_sec, "samples", "count", int, 9)
        s_seed = base_seed if seed is not None else _field(samp_sec, "samples", "seed", int, base_seed)
        if count < 1:
            raise ConfigError("samples.count: must be >= 1")
        samples = sample_disturbances(dist, count, s_seed)
        samp_resolved = {"distribution": dist.to_dict(), "count": count, "seed": s_seed}
    if samples is not None and samples.m != system.m:
        raise ConfigError(f"samples: disturbance length {samples.m} does not match system m={system.m}")

    train_sec = dict(_section(raw, "train"))
    t_seed = base_seed if seed is not None else int(train_sec.pop("seed", base_seed))
    train_sec.pop("seed", None)
    train_sec.pop("ambiguity", None)
    if "region" in train_sec and train_sec["region"] is not None:
        train_sec["region"] = tuple(tuple(r) for r in train_sec["region"])
    if "hidden" in train_sec:
        train_sec["hidden"] = tuple(train_sec["hidden"])
    try:
        tcfg = default_config(system.name, seed=t_seed, ambiguity=ambiguity, **train_sec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"train: {exc}") from None

    uses_samples = formulation is not Formulation.BASELINE or tcfg.loss != "lf"
    if uses_samples and samples is not None:
        try:
            ambiguity.check_samples(samples.n)
        except UncertaintyError as exc:
            raise ConfigError(f"formulation.beta: {exc}") from None

    val_sec = _section(raw, "validate")
    online: dict[str, DisturbanceSpec] = {}
    if "online" in val_sec:
        online = {"online": _distribution(val_sec["online"], "validate.online")}
    table_sec = _section(raw, "table1")
    table_online_raw = table_sec.get("online", TABLE1_ONLINE.get(system.name, {}))
    table_online = {k: _distribution(v, f"table1.online.{k}") for k, v in table_online_raw.items()}
    v_seed = base_seed if seed is not None else _field(val_sec, "validate", "seed", int, base_seed)
    region = val_sec.get("region")
    try:
        vcfg = ValidationConfig(
            online.get("online") or next(iter(table_online.values()), DisturbanceSpec.point([0.0] * system.m)),
            realizations=_field(val_sec, "validate", "realizations", int, 5000),
            points=_field(val_sec, "validate", "points", int, 10000),
            region=tuple(tuple(r) for r in region) if region else None,
            seed=v_seed,
            exclusion_radius=_field(val_sec, "validate", "exclusion_radius", float, 0.0),
            workers=_field(val_sec, "validate", "workers", int, 1),
        )
    except ValueError as exc:
        raise ConfigError(f"validate: {exc}") from None

    heat = _section(raw, "heatgrid")
    heat_resolved = {}
    if heat:
        xi = heat.get("xi")
        if xi is None or len(xi) != system.m:
            raise ConfigError(f"heatgrid.xi: expected {system.m} values")
        heat_resolved = {"xi": [float(v) for v in xi], "resolution": heat.get("resolution", 100), "region": heat.get("region")}

    rad_sec = _section(raw, "radius")
    rparams = None
    if rad_sec:
        try:
            rparams = RadiusParams(
                n_samples=_field(rad_sec, "radius", "n_samples", int, required=True),
                m=_field(rad_sec, "radius", "m", int, system.m),
                alpha=_field(rad_sec, "radius", "alpha", float, required=True),
                c1=_field(rad_sec, "radius", "c1", float, required=True),
                c2=_field(rad_sec, "radius", "c2", float, required=True),
                rho=_field(rad_sec, "radius", "rho", float, required=True),
            )
        except UncertaintyError as exc:
            raise ConfigError(f"radius: {exc}") from None

    vdict = vcfg.to_dict()
    vdict.pop("online")
    vdict.pop("candidate_kind")
    resolved = {
        "seed": base_seed,
        "system": sys_sec,
        "formulation": {
            "kind": formulation.value,
            "degree": synth_spec.degree,
            "epsilon": synth_spec.epsilon,
            "beta": ambiguity.beta,
            "radius": ambiguity.radius,
            "sign_mode": sign.value,
        },
        "samples": samp_resolved,
        "train": tcfg.to_dict(),
        "validate": {**({"online": online["online"].to_dict()} if online else {}), **vdict},
        "table1": {"online": {k: v.to_dict() for k, v in table_online.items()}, "nn": table_sec.get("nn", {})},
    }
    resolved["train"].pop("ambiguity")
    if heat_resolved:
        resolved["heatgrid"] = heat_resolved
    if rparams is not None:
        resolved["radius"] = {k: getattr(rparams, k) for k in ("n_samples", "m", "alpha", "c1", "c2", "rho")}
    return ExperimentConfig(
        resolved, system, formulation, synth_spec, ambiguity, samples, tcfg, vcfg,
        online=online or table_online, heatgrid=heat_resolved, radius=rparams,
    )


def load_config(path: str | Path, seed: int | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return resolve_config(raw, seed)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _synth_exit(result) -> int:
    if result.feasible:
        return EXIT_OK
    if result.status in (sdp.Status.NUMERICAL_FAILURE.value, sdp.Status.MAX_ITERATIONS.value):
        return EXIT_NUMERICAL
    return EXIT_INFEASIBLE


def cmd_synth(cfg: ExperimentConfig, out: Path) -> int:
    result = synthesize(cfg.system, cfg.synth, cfg.samples)
    info = {
        "feasible": result.feasible,
        "margin": float(result.margin),
        "status": result.status,
        "iterations": result.iterations,
        "message": result.message,
        **result.metadata,
    }
    if result.feasible:
        files.write_json(out / "certificate.json", files.certificate_to_dict(result, cfg.resolved))
        info["verified"] = result.verify()
    files.write_json(out / "summary.json", files.summary("synth", cfg.resolved, info))
    print(f"synth {cfg.formulation.value}: feasible={result.feasible} margin={result.margin:.4g} status={result.status}")
    return _synth_exit(result)


def cmd_train(cfg: ExperimentConfig, out: Path) -> int:
    try:
        res = train(cfg.train, cfg.system, cfg.samples)
    except TrainingDivergence as exc:
        exc.model.save(out / "checkpoint.json")
        print(f"train: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    res.model.save(out / "checkpoint.json")
    (out / "losses.csv").write_text(res.loss_csv())
    final = res.losses[-1] if res.losses else None
    files.write_json(out / "summary.json", files.summary("train", cfg.resolved, {"final_loss": final, "epochs": len(res.losses)}))
    print(f"train {cfg.train.loss}: epochs={len(res.losses)} final_loss={final}")
    return EXIT_OK


def cmd_validate(cfg: ExperimentConfig, out: Path, candidate_path: str | None) -> int:
    if candidate_path is None:
        raise ConfigError("validate: --candidate FILE is required")
    cand, kind = files.load_candidate(candidate_path)
    vcfg = replace(cfg.validate, candidate_kind=kind)
    report = monte_carlo(cand, cfg.system, vcfg)
    (out / "report.csv").write_text(report.to_csv())
    files.write_json(out / "summary.json", files.summary("validate", cfg.resolved, report.summary()))
    print(f"validate: rate={report.violation_rate:.4f} area={report.violation_area:.6f}")
    return EXIT_OK


def cmd_radius(cfg: ExperimentConfig, out: Path) -> int:
    if cfg.radius is None:
        raise ConfigError("radius: section missing")
    r = wasserstein_radius(cfg.radius)
    files.write_json(out / "summary.json", files.summary("radius", cfg.resolved, {"radius": r}))
    print(repr(r))
    return EXIT_OK


def cmd_heatgrid(cfg: ExperimentConfig, out: Path, candidate_path: str | None) -> int:
    if not cfg.heatgrid:
        raise ConfigError("heatgrid: section missing")
    if candidate_path is None:
        raise ConfigError("heatgrid: --candidate FILE is required")
    cand, _ = files.load_candidate(candidate_path)
    h = cfg.heatgrid
    grid = emit_heatgrid(cand, cfg.system, h["xi"], h["region"], h["resolution"], out / "heatgrid.csv")
    print(f"heatgrid: {grid.shape[0]} points, {int(np.count_nonzero(grid[:, -1] > 0))} positive")
    return EXIT_OK


def _table_csv(rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def reproduce_table1(cfg: ExperimentConfig, out: Path) -> dict:
    """Run the six formulations and validate each under every online distribution.

    Writes ``table1.csv`` plus one report CSV per (row, distribution) under
    ``out/reports``.  Returns the table as ``{row: {dist: (rate, area)}}``.
    """
    if cfg.samples is None:
        raise ConfigError("reproduce-table1: samples are required")
    if not cfg.online:
        raise ConfigError("reproduce-table1: no online distributions (table1.online)")
    reports = out / "reports"
    reports.mkdir(parents=True, exist_ok=True)
    candidates = {}
    status = {}
    for row, form in zip(TABLE1_ROWS[:3], Formulation):
        res = synthesize(cfg.system, replace(cfg.synth, formulation=form), cfg.samples)
        status[row] = {"feasible": res.feasible, "status": res.status, "margin": float(res.margin)}
        if res.feasible:
            candidates[row] = PolyCandidate(res.V)
            files.write_json(reports / f"{row}.certificate.json", files.certificate_to_dict(res, cfg.resolved))
    nn_over = {**TABLE1_NN_DEFAULTS, **cfg.resolved["table1"].get("nn", {})}
    for row, loss in zip(TABLE1_ROWS[3:], ("lf", "cc", "drcc")):
        tcfg = replace(cfg.train, loss=loss, **{k: (tuple(v) if k == "hidden" else v) for k, v in nn_over.items()})
        try:
            res = train(tcfg, cfg.system, cfg.samples)
        except TrainingDivergence as exc:
            status[row] = {"feasible": False, "status": str(exc)}
            continue
        candidates[row] = res.model
        status[row] = {"feasible": True, "final_loss": res.losses[-1] if res.losses else None}
        res.model.save(reports / f"{row}.checkpoint.json")
    dists = list(cfg.online)
    table: dict = {}
    for row in TABLE1_ROWS:
        table[row] = {}
        for name in dists:
            if row not in candidates:
                table[row][name] = (float("nan"), float("nan"))
                continue
            kind = "sos-polynomial" if row.endswith("SOS") else "nn-checkpoint"
            vcfg = replace(cfg.validate, online=cfg.online[name], candidate_kind=kind)
            rep = monte_carlo(candidates[row], cfg.system, vcfg)
            (reports / f"{row}.{name}.csv").write_text(rep.to_csv())
            table[row][name] = (rep.violation_rate, rep.violation_area)
            logger.info("%s %s: rate %.4f area %.6f", row, name, *table[row][name])
    header = ["formulation"] + [f"{name}_{col}" for name in dists for col in ("rate", "area")]
    rows = [header] + [[row] + [v for name in dists for v in table[row][name]] for row in TABLE1_ROWS]
    (out / "table1.csv").write_text(_table_csv(rows))
    result = {"table": {r: {n: list(v) for n, v in d.items()} for r, d in table.items()}, "candidates": status}
    files.write_json(out / "summary.json", files.summary("reproduce-table1", {**cfg.resolved, "table1_nn": nn_over}, result))
    return table


def cmd_reproduce_table1(cfg: ExperimentConfig, out: Path) -> int:
    table = reproduce_table1(cfg, out)
    dists = list(cfg.online)
    print("formulation  " + "  ".join(f"{n + ' rate':>14}{n + ' area':>14}" for n in dists))
    for row, vals in table.items():
        print(f"{row:<12} " + "  ".join(f"{vals[n][0]:>14.2%}{vals[n][1]:>14.2%}" for n in dists))
    return EXIT_OK


COMMANDS = ("synth", "train", "validate", "radius", "reproduce-table1", "heatgrid")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drlyap", description="Lyapunov function synthesis under distributional uncertainty.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="JSON experiment config")
        sp.add_argument("--seed", type=int, default=None, help="override every seed in the config")
        sp.add_argument("--out", default=".", help="output directory (default: current directory)")
        if name in ("validate", "heatgrid"):
            sp.add_argument("--candidate", default=None, help="certificate or NN checkpoint file")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, args.seed)
        out = _out_dir(args)
        if args.command == "synth":
            return cmd_synth(cfg, out)
        if args.command == "train":
            return cmd_train(cfg, out)
        if args.command == "validate":
            return cmd_validate(cfg, out, args.candidate)
        if args.command == "radius":
            return cmd_radius(cfg, out)
        if args.command == "heatgrid":
            return cmd_heatgrid(cfg, out, args.candidate)
        return cmd_reproduce_table1(cfg, out)
    except (ConfigError, files.CandidateFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UncertaintyError, SynthesisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except sdp.SdpError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
