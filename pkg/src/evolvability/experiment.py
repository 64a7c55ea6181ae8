"""Experiment orchestration behind the command-line tool.

Each command expands an :class:`ExperimentConfig` into independent runs, seeds
run ``r`` of configuration ``c`` with ``(seed, c, r)``, executes the runs
serially or in a process pool, and merges them in index order. Finished runs
are written to ``<out>/state/`` so an interrupted batch can be resumed.
"""

from __future__ import annotations

import base64
import csv
import hashlib
import io
import json
import logging
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from evolvability import landscape
from evolvability._accel import backend_name
from evolvability._seeding import substream
from evolvability.diversity import METRIC_NAMES, Archive, metric_from_name
from evolvability.environment import (
    ConstantLandscape,
    LinearLandscape,
    PointPushWorld,
    PushBehavior,
    SinusoidLandscape,
)
from evolvability.genotype import (
    genotype_digest,
    genotype_from_bytes,
    genotype_to_bytes,
    shape_from_sequence,
    xavier_init,
)
from evolvability.markov import (
    TransitionMatrix,
    child_distribution,
    estimate_transition_matrix,
    expected_child_coverage,
    l_evolvability_from_distribution,
    one_hot,
)
from evolvability.niches import NicheGrid
from evolvability.stats import kruskal_wallis, spearman, summarize
from evolvability.variation import MutationConfig, sample_neighbors
from evolvability.walks import WalkConfig, run_walk

log = logging.getLogger(__name__)

REPORT_FIELDS = (
    "ls_max",
    "ls_expected",
    "evolvability_max",
    "evolvability_expected",
    "niche_coverage",
    "ratio_r",
    "ratio_r_star",
)
RUN_COLUMNS = (
    "walk_kind",
    "top_fraction",
    "pressure",
    "metric",
    "run",
    "step",
    *REPORT_FIELDS,
    "chosen",
    "archive_size",
    "parent_digest",
)
SUMMARY_COLUMNS = ("walk_kind", "metric", "step", "mean", "ci95", "run_count")

PROFILES = {
    "desk": {"runs_per_config": 10, "walk_length": 25, "mutation": {"offspring_count": 30}},
    "paper": {"runs_per_config": 50, "walk_length": 50, "mutation": {"offspring_count": 30}},
}

_DEFAULTS = {
    "environment": {"type": "push", "hidden_dims": [32, 32]},
    "grid": {"lo": [0.0, 0.0], "hi": [1.0, 1.0], "cells_per_dim": [10, 10]},
    "mutation": {"scale": 0.05, "per_weight_prob": 1.0, "offspring_count": 30},
    "metric": {"name": "knn", "k": 15, "bandwidth": 0.5, "discount": 1.0},
    "archive": {"capacity": 1200, "admission_prob": 0.10},
    "walk_length": 25,
    "runs_per_config": 10,
    "walks": [
        {"kind": "selective"},
        {"kind": "adaptive", "top_fraction": 0.25},
        {"kind": "adaptive", "top_fraction": 0.5},
        {"kind": "random"},
    ],
    "metrics": ["knn", "knn_noarchive", "ancestors", "kde"],
    "walk_kind": "selective",
    "markov": {
        "budget": 10000,
        "batch_size": 1,
        "initial_count": 10,
        "l_values": [1, 2, 3],
        "U": 30,
        "repeats": 200,
        "sample_size": 30,
        "genotype_count": 5,
        "genotype_paths": [],
        "transition_matrix": None,
        "niches": True,
    },
    "dissimila": {"sample_count": 50},
    "seed": 0,
    "jobs": 1,
    "out": "results",
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


@dataclass
class ExperimentConfig:
    """Validated experiment settings.

    ``raw`` is the fully merged dictionary; everything else is derived from it.
    """

    raw: dict
    grid: NicheGrid = field(init=False)
    mutation: MutationConfig = field(init=False)

    def __post_init__(self):
        r = self.raw
        unknown = set(r) - set(_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            self.grid = NicheGrid.from_dict(r["grid"])
            self.mutation = MutationConfig(**r["mutation"])
            metric_from_name(**r["metric"])
            for name in r["metrics"]:
                metric_from_name(name)
            if int(r["runs_per_config"]) < 1:
                raise ConfigError("runs_per_config must be >= 1")
            if int(r["jobs"]) < 1:
                raise ConfigError("jobs must be >= 1")
            self.walk_configs()
            build_behavior(json.dumps(r["environment"], sort_keys=True))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    @classmethod
    def from_dict(cls, data: dict | None = None, profile: str = "desk", **overrides):
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
        merged = _merge(_merge(_DEFAULTS, PROFILES[profile]), data or {})
        merged = _merge(merged, {k: v for k, v in overrides.items() if v is not None})
        return cls(merged)

    @classmethod
    def load(cls, path, profile: str = "desk", **overrides):
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data, profile, **overrides)

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def jobs(self) -> int:
        return int(self.raw["jobs"])

    @property
    def out(self) -> Path:
        return Path(self.raw["out"])

    @property
    def runs(self) -> int:
        return int(self.raw["runs_per_config"])

    def canonical(self) -> str:
        """Config text that determines results (output location and jobs excluded)."""
        body = {k: v for k, v in self.raw.items() if k not in ("out", "jobs")}
        return json.dumps(body, sort_keys=True)

    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def behavior(self):
        return build_behavior(json.dumps(self.raw["environment"], sort_keys=True))

    def metric(self, name: str | None = None):
        m = dict(self.raw["metric"])
        if name is not None:
            m["name"] = name
        return metric_from_name(**m)

    def new_archive(self, dim: int) -> Archive:
        a = self.raw["archive"]
        return Archive(int(a["capacity"]), float(a["admission_prob"]), dim)

    def walk_configs(self) -> list[WalkConfig]:
        base = WalkConfig(
            length=int(self.raw["walk_length"]), metric=self.metric(), mutation=self.mutation
        )
        out = []
        for spec in self.raw["walks"]:
            spec = dict(spec)
            metric = spec.pop("metric", None)
            wc = replace(base, **spec)
            if metric is not None:
                wc = replace(wc, metric=self.metric(metric))
            out.append(wc)
        return out

    def metric_walk_configs(self) -> list[WalkConfig]:
        kind = self.raw["walk_kind"]
        return [
            WalkConfig(
                kind=kind,
                length=int(self.raw["walk_length"]),
                metric=self.metric(name),
                mutation=self.mutation,
            )
            for name in self.raw["metrics"]
        ]


@lru_cache(maxsize=8)
def build_behavior(env_json: str):
    env = json.loads(env_json)
    kind = env.get("type", "push")
    hidden = tuple(env.get("hidden_dims", (32, 32)))
    if kind == "push":
        return PushBehavior(PointPushWorld(**env.get("world", {})), hidden)
    shape = shape_from_sequence(env.get("dims", [8, *hidden, 2]))
    if kind == "constant":
        return ConstantLandscape(shape, env.get("value", [0.5, 0.5]))
    if kind == "linear":
        return LinearLandscape.identity(shape, int(env.get("dim", 2)), env.get("offset"))
    if kind == "sinusoid":
        return SinusoidLandscape.random(
            shape, int(env.get("dim", 2)), float(env.get("frequency", 3.0)), int(env.get("seed", 0))
        )
    raise ConfigError(f"unknown environment type {kind!r}")


# --------------------------------------------------------------------------- #
# parallel runs with persisted state
# --------------------------------------------------------------------------- #


def _walk_task(args):
    raw, family, ci, ri = args
    cfg = ExperimentConfig(json.loads(raw))
    configs = cfg.walk_configs() if family == "pressure" else cfg.metric_walk_configs()
    wc = replace(configs[ci], seed=(cfg.seed, ci, ri))
    phi = cfg.behavior()
    rec = run_walk(wc, phi, archive=cfg.new_archive(phi.dim), grid=cfg.grid)
    steps = [
        [s.step, *(getattr(s.report, f) for f in REPORT_FIELDS),
         -1 if s.chosen is None else s.chosen, s.archive_size, s.parent_digest]
        for s in rec.steps
    ]
    return {
        "config_index": ci,
        "run_index": ri,
        "walk_kind": wc.label,
        "top_fraction": wc.effective_top_fraction(),
        "pressure": wc.pressure,
        "metric": wc.metric.name,
        "stall_count": rec.stall_count,
        "final_genotype": base64.b64encode(genotype_to_bytes(rec.final)).decode(),
        "steps": steps,
    }


def _pool(jobs: int):
    methods = multiprocessing.get_all_start_methods()
    ctx = multiprocessing.get_context("fork" if "fork" in methods else "spawn")
    return ProcessPoolExecutor(max_workers=jobs, mp_context=ctx)


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def run_batch(cfg: ExperimentConfig, family: str, n_configs: int) -> list[list[dict]]:
    """Run (or resume) every ``(config, run)`` pair; results grouped by config."""
    state_dir = cfg.out / "state" / family
    state_dir.mkdir(parents=True, exist_ok=True)
    fp = cfg.fingerprint()
    results: dict[tuple[int, int], dict] = {}
    todo = []
    for ci in range(n_configs):
        for ri in range(cfg.runs):
            path = state_dir / f"c{ci:03d}_r{ri:03d}.json"
            if path.exists():
                try:
                    state = json.loads(path.read_text())
                except json.JSONDecodeError:
                    state = None
                if state and state.get("fingerprint") == fp:
                    results[ci, ri] = state["result"]
                    continue
            todo.append((ci, ri))
    if results:
        log.info("resuming: %d runs restored, %d to go", len(results), len(todo))
    raw = json.dumps(cfg.raw, sort_keys=True)
    tasks = [(raw, family, ci, ri) for ci, ri in todo]

    def store(res):
        key = (res["config_index"], res["run_index"])
        results[key] = res
        path = state_dir / f"c{key[0]:03d}_r{key[1]:03d}.json"
        _atomic_write(path, json.dumps({"fingerprint": fp, "result": res}))

    if cfg.jobs == 1 or len(tasks) <= 1:
        for t in tasks:
            store(_walk_task(t))
    else:
        with _pool(cfg.jobs) as pool:
            for res in pool.map(_walk_task, tasks):
                store(res)
    return [[results[ci, ri] for ri in range(cfg.runs)] for ci in range(n_configs)]


# --------------------------------------------------------------------------- #
# writers
# --------------------------------------------------------------------------- #


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _run_rows(groups):
    for runs in groups:
        for res in runs:
            for step in res["steps"]:
                yield [
                    res["walk_kind"], res["top_fraction"], res["pressure"], res["metric"],
                    res["run_index"], *step,
                ]


def _series(runs, name="evolvability_expected"):
    col = 1 + REPORT_FIELDS.index(name)
    return [np.array([s[col] for s in res["steps"]], dtype=np.float64) for res in runs]


def _summary_rows(groups):
    rows = []
    for runs in groups:
        summ = summarize(_series(runs))
        head = runs[0]
        for step, (mean, ci) in enumerate(zip(summ.mean, summ.ci95_half_width)):
            rows.append([head["walk_kind"], head["metric"], step, float(mean), float(ci), summ.run_count])
    return rows


def _write_series_outputs(cfg, groups):
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "runs.csv").write_text(_csv_text(RUN_COLUMNS, _run_rows(groups)))
    (cfg.out / "summary.csv").write_text(_csv_text(SUMMARY_COLUMNS, _summary_rows(groups)))


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _final_values(runs):
    return [float(s[-1]) for s in _series(runs)]


# --------------------------------------------------------------------------- #
# commands
# --------------------------------------------------------------------------- #


def pressure_sweep(cfg: ExperimentConfig) -> dict:
    """Walks at several selection strengths; Spearman of pressure vs final evolvability."""
    configs = cfg.walk_configs()
    if len(configs) < 2:
        raise ConfigError("pressure-sweep needs at least two walk configurations")
    groups = run_batch(cfg, "pressure", len(configs))
    _write_series_outputs(cfg, groups)
    pressure, final = [], []
    levels = []
    for runs in groups:
        vals = _final_values(runs)
        final.extend(vals)
        pressure.extend([runs[0]["pressure"]] * len(vals))
        levels.append(
            {
                "walk_kind": runs[0]["walk_kind"],
                "pressure": runs[0]["pressure"],
                "final_mean": float(np.mean(vals)),
            }
        )
    rho, p = spearman(pressure, final)
    payload = {
        "command": "pressure-sweep",
        "backend": backend_name(),
        "final_step": int(cfg.raw["walk_length"]) - 1,
        "levels": levels,
        "spearman": {"rho": rho, "p": p, "n": len(final)},
    }
    _write_json(cfg.out / "stats.json", payload)
    return payload


def metric_comparison(cfg: ExperimentConfig) -> dict:
    """One walk family per diversity metric; Kruskal-Wallis across final-step evolvability."""
    names = list(cfg.raw["metrics"])
    if len(names) < 2:
        raise ConfigError("metric-comparison needs at least two metrics")
    unknown = [n for n in names if n not in METRIC_NAMES]
    if unknown:
        raise ConfigError(f"unknown metrics {unknown}")
    groups = run_batch(cfg, "metrics", len(names))
    _write_series_outputs(cfg, groups)
    finals = [_final_values(runs) for runs in groups]
    h, p = kruskal_wallis(finals)
    payload = {
        "command": "metric-comparison",
        "backend": backend_name(),
        "final_step": int(cfg.raw["walk_length"]) - 1,
        "metrics": [
            {"metric": runs[0]["metric"], "final_mean": float(np.mean(f))}
            for runs, f in zip(groups, finals)
        ],
        "kruskal_wallis": {"H": h, "p": p},
    }
    _write_json(cfg.out / "stats.json", payload)
    return payload


def _markov_genotypes(cfg, phi):
    mk = cfg.raw["markov"]
    out = []
    for path in mk.get("genotype_paths", []):
        g = genotype_from_bytes(Path(path).read_bytes())
        if g.shape != phi.shape:
            raise ConfigError(f"genotype in {path} does not fit the environment's network")
        out.append((str(path), g))
    for i in range(int(mk["genotype_count"])):
        out.append((f"random-{i}", xavier_init(phi.shape, substream(cfg.seed, 0, i))))
    return out


def markov_estimate(cfg: ExperimentConfig) -> dict:
    """Estimate (or load) the niche transition matrix and tabulate l-evolvability."""
    mk = cfg.raw["markov"]
    phi = cfg.behavior()
    grid = cfg.grid
    cfg.out.mkdir(parents=True, exist_ok=True)
    if mk.get("transition_matrix"):
        T = TransitionMatrix.load(mk["transition_matrix"])
        if T.grid is not None:
            grid = T.grid
    else:
        T = estimate_transition_matrix(
            grid, phi, cfg.mutation, int(mk["budget"]), substream(cfg.seed, 1),
            initial_count=int(mk["initial_count"]), batch_size=int(mk["batch_size"]),
        )
    if T.n != grid.n:
        raise ConfigError(f"transition matrix has {T.n} niches, grid has {grid.n}")
    T.save(cfg.out / "transition_matrix.json")
    ls = [int(l) for l in mk["l_values"]]
    U, repeats = int(mk["U"]), int(mk["repeats"])
    header = ["id", "digest", "child_coverage"]
    for l in ls:
        header += [f"l{l}_mean", f"l{l}_se"]

    def cells(D, key):
        row = [expected_child_coverage(D, U)]
        for l in ls:
            est = l_evolvability_from_distribution(T, D, l, U, repeats, substream(cfg.seed, *key, l))
            row += [est.mean_coverage, est.std_error]
        return row

    geno_rows = []
    for i, (name, g) in enumerate(_markov_genotypes(cfg, phi)):
        D = child_distribution(g, grid, phi, cfg.mutation, int(mk["sample_size"]), substream(cfg.seed, 2, i))
        geno_rows.append([name, genotype_digest(g), *cells(D, (3, i))])
    (cfg.out / "genotypes.csv").write_text(_csv_text(header, geno_rows))
    niche_rows = []
    if mk.get("niches", True):
        observed = T.observed
        for j in range(T.n):
            niche_rows.append([j, "observed" if observed[j] else "unobserved", *cells(one_hot(j, T.n), (4, j))])
        (cfg.out / "niches.csv").write_text(
            _csv_text(["niche", "status", *header[2:]], niche_rows)
        )
    payload = {
        "command": "markov-estimate",
        "backend": backend_name(),
        "n": T.n,
        "observed_rows": int(T.observed.sum()),
        "l_values": ls,
        "U": U,
        "repeats": repeats,
        "genotypes": len(geno_rows),
    }
    _write_json(cfg.out / "stats.json", payload)
    return payload


def dissimila_scan(cfg: ExperimentConfig) -> dict:
    """Expected-form ratio r* for a sample of genotypes, lowest (most deceptive) first."""
    phi = cfg.behavior()
    count = int(cfg.raw["dissimila"]["sample_count"])
    rows = []
    for i in range(count):
        g = xavier_init(phi.shape, substream(cfg.seed, 0, i))
        off = sample_neighbors(g, cfg.mutation, phi, substream(cfg.seed, 1, i))
        pb = phi(g)
        rep = landscape.metric_report(pb, off.behaviors)
        rows.append([i, genotype_digest(g), rep.ls_expected, rep.evolvability_expected, rep.ratio_r_star])
    rows.sort(key=lambda r: r[4])
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "dissimila.csv").write_text(
        _csv_text(["genotype", "digest", "ls_expected", "evolvability_expected", "r_star"], rows)
    )
    payload = {"command": "dissimila-scan", "backend": backend_name(), "genotypes": count}
    _write_json(cfg.out / "stats.json", payload)
    return payload


COMMANDS = {
    "pressure-sweep": pressure_sweep,
    "metric-comparison": metric_comparison,
    "markov-estimate": markov_estimate,
    "dissimila-scan": dissimila_scan,
}
