"""Experiment plans in INI form.

A plan file has a ``[plan]`` section naming the experiment and, optionally,
one axis to sweep, followed by ``[run]``, ``[optimizer]`` and ``[problem]``
sections whose keys mirror :class:`RunConfig` and :class:`ProblemSpec`. See
``configs/example.cfg`` for every key with comments.

Errors carry the file name, line number and ``section.key`` that failed.
"""
from __future__ import annotations

import configparser
import math
import os
import re
from dataclasses import dataclass, replace
from typing import Optional

from .cluster import ConfigError, RunConfig
from .problems import ProblemSpec


class PlanError(ValueError):
    """Parse or validation failure; the message is ready to print."""


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional_int(text: str) -> Optional[int]:
    return None if text.strip().lower() in ("", "none") else int(text)


RUN_KEYS = {
    "n_nodes": int,
    "steps": int,
    "period": int,
    "rank": int,
    "compressor": str,
    "k": _optional_int,
    "error_feedback": _bool,
    "base_seed": int,
    "init_scale": float,
    "metrics_every": int,
    "replica_check_every": int,
}
OPTIMIZER_KEYS = {
    "kind": ("optimizer", str),
    "lr": ("lr", float),
    "beta": ("beta", float),
    "beta1": ("beta1", float),
    "beta2": ("beta2", float),
    "epsilon": ("epsilon", float),
    "adam_mode": ("adam_mode", str),
    "schedule": ("schedule", str),
}
PROBLEM_KEYS = {
    "kind": str,
    "m": int,
    "n": int,
    "L": float,
    "sigma": float,
    "heterogeneity": float,
    "seed": int,
    "samples_per_node": int,
    "feature_scale": float,
}
PLAN_KEYS = ("name", "sweep", "values", "lr_scaling", "loss_tolerance")
SWEEP_AXES = ("n_nodes", "rank", "period", "compressor", "optimizer")
SECTIONS = ("plan", "run", "optimizer", "problem")


@dataclass
class ExperimentPlan:
    name: str
    runs: list[RunConfig]
    out_dir: str = "out"
    sweep: Optional[str] = None
    # compare: max allowed final-loss ratio against the first run
    loss_tolerance: Optional[float] = None

    def __post_init__(self):
        if not self.runs:
            raise PlanError("plan has no runs")
        labels = [r.label for r in self.runs]
        dupes = sorted({x for x in labels if labels.count(x) > 1})
        if dupes:
            raise PlanError(f"duplicate run labels: {', '.join(dupes)}")


def _find_line(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        m = re.match(r"\[([^\]]+)\]", stripped)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return no
            continue
        if current == section and key is not None:
            m = re.match(r"([^=:\s]+)\s*[=:]", stripped)
            if m and m.group(1).lower() == key.lower():
                return no
    return None


def _where(path: str, text: str, section: str, key: Optional[str] = None) -> str:
    line = _find_line(text, section, key)
    field = f"{section}.{key}" if key else f"[{section}]"
    return f"{path}:{line}: {field}" if line else f"{path}: {field}"


def _parse_overrides(overrides) -> list[tuple[str, str, str]]:
    out = []
    for item in overrides or ():
        if "=" not in item:
            raise PlanError(f"--set expects section.key=value, got {item!r}")
        lhs, value = item.split("=", 1)
        if "." not in lhs:
            raise PlanError(f"--set expects section.key=value, got {item!r}")
        section, key = lhs.strip().split(".", 1)
        if section not in SECTIONS:
            raise PlanError(f"--set: unknown section {section!r}")
        out.append((section, key.strip(), value.strip()))
    return out


def parse_plan_text(
    text: str,
    path: str = "<plan>",
    overrides=None,
    seed: Optional[int] = None,
    out_dir: Optional[str] = None,
) -> ExperimentPlan:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str  # keys are case sensitive (L)
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        raise PlanError(f"{path}: parse error: {exc}".replace("\n", " ")) from exc

    for section in cp.sections():
        if section not in SECTIONS:
            raise PlanError(f"{_where(path, text, section)}: unknown section")
    for section, key, value in _parse_overrides(overrides):
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value)

    run_kw: dict = {}
    prob_kw: dict = {}

    def cast(section, key, caster, raw):
        try:
            return caster(raw)
        except ValueError as exc:
            raise PlanError(f"{_where(path, text, section, key)}: bad value {raw!r} ({exc})") from None

    for section in ("run", "optimizer", "problem"):
        if not cp.has_section(section):
            continue
        for key, raw in cp.items(section):
            if section == "run":
                if key not in RUN_KEYS:
                    raise PlanError(f"{_where(path, text, section, key)}: unknown key")
                run_kw[key] = cast(section, key, RUN_KEYS[key], raw)
            elif section == "optimizer":
                if key not in OPTIMIZER_KEYS:
                    raise PlanError(f"{_where(path, text, section, key)}: unknown key")
                attr, caster = OPTIMIZER_KEYS[key]
                run_kw[attr] = cast(section, key, caster, raw)
            else:
                if key not in PROBLEM_KEYS:
                    raise PlanError(f"{_where(path, text, section, key)}: unknown key")
                prob_kw[key] = cast(section, key, PROBLEM_KEYS[key], raw)

    plan_sec = cp["plan"] if cp.has_section("plan") else {}
    for key in plan_sec:
        if key not in PLAN_KEYS:
            raise PlanError(f"{_where(path, text, 'plan', key)}: unknown key")
    name = plan_sec.get("name", os.path.splitext(os.path.basename(path))[0])
    if seed is not None:
        run_kw["base_seed"] = seed

    try:
        spec = ProblemSpec(**prob_kw)
    except (TypeError, ValueError) as exc:
        raise PlanError(f"{_where(path, text, 'problem')}: {exc}") from None
    base = RunConfig(problem=spec, **run_kw)

    sweep = plan_sec.get("sweep")
    tolerance = None
    if "loss_tolerance" in plan_sec:
        tolerance = cast("plan", "loss_tolerance", float, plan_sec["loss_tolerance"])
    if sweep is None:
        runs = [replace(base, label=name)]
    else:
        if sweep not in SWEEP_AXES:
            raise PlanError(f"{_where(path, text, 'plan', 'sweep')}: cannot sweep {sweep!r}; choose one of {', '.join(SWEEP_AXES)}")
        if "values" not in plan_sec:
            raise PlanError(f"{_where(path, text, 'plan')}: sweep needs a values list")
        caster = str if sweep in ("compressor", "optimizer") else int
        values = [v.strip() for v in plan_sec["values"].split(",") if v.strip()]
        values = [cast("plan", "values", caster, v) for v in values]
        scaling = plan_sec.get("lr_scaling", "none")
        if scaling not in ("none", "sqrt", "linear"):
            raise PlanError(f"{_where(path, text, 'plan', 'lr_scaling')}: expected none, sqrt or linear")
        if scaling != "none" and sweep != "n_nodes":
            raise PlanError(f"{_where(path, text, 'plan', 'lr_scaling')}: only applies to an n_nodes sweep")
        runs = []
        for v in values:
            cfg = replace(base, **{sweep: v}, label=f"{name}_{sweep}{v}" if caster is int else f"{name}_{v}")
            if scaling == "sqrt":
                cfg = replace(cfg, lr=base.lr * math.sqrt(v))
            elif scaling == "linear":
                cfg = replace(cfg, lr=base.lr * v)
            runs.append(cfg)

    for cfg in runs:
        try:
            cfg.validate()
        except ConfigError as exc:
            raise PlanError(f"{path}: run {cfg.label}: {exc}") from None
    return ExperimentPlan(name, runs, out_dir or "out", sweep, tolerance)


def load_plan(path: str, overrides=None, seed: Optional[int] = None, out_dir: Optional[str] = None) -> ExperimentPlan:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise PlanError(f"{path}: cannot read plan ({exc.strerror})") from None
    return parse_plan_text(text, path, overrides, seed, out_dir)

