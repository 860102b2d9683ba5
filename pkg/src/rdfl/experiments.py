"""Experiment pipelines behind the command line, driven by one YAML config.

Every pipeline writes CSV files (header row with units) and a ``manifest.json``
holding the normalized config, the master seed, library versions and a SHA-256
of each output. Outputs depend only on the config, so reruns are byte-identical.

Config schema (all sections optional except ``experiment``; unknown keys are errors)::

    experiment: rd_sweep | vote | train | compare | ablate_rotation
                | ablate_normalization | rounding_compare
    master_seed: 0
    output_dir: results
    grid: [0.05, ..., 17.5]          # step sizes
    code: gamma | delta
    updates:                          # update source for the update-level pipelines
      source: synthetic | training    # training = collect from an uncompressed pilot run
      kind: power_law | laplace
      num_clients: 50
      dimension: 1000
      sparsity: 0.9
      scale: 1.0
      tail: 3.0
      norm_sigma: 0.0
      rounds: 20                      # pilot rounds when source = training
    task: {kind, dimension, num_clients, ...}        # TaskSpec fields except master_seed
    training: {rounds, clients_per_round, ..., seeds} # FedConfig fields plus seeds
    compressor: {method: ours, step: 1.0}             # train; or budget_bits_per_elem
    methods: {ours: [0.5, 1.0], topk: [0.1], qsgd: [16], drive: [null], tlc: [1.0], none: [null]}
    vote: {lam: null, target_delta: null}
    rotation: {rotation_seed: 0, per_client: false}
    normalization: {delta: 1.0, rel_tol: 0.05}
    rounding: {quantizers: [round, stochastic, dithered]}
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from . import __version__
from .ablations import normalization_ablation, rotation_ablation
from .baselines import METHODS, BaselineConfig
from .codec import Code, coding_overhead, payload_length, stream_overhead
from .fedsim import CodecConfig, FedConfig, TaskSpec, generate_task, run_training
from .quantize import dequantize, quantize
from .rd import (
    DEFAULT_GRID,
    RD_COLUMNS,
    lambda_for_delta,
    modal_fraction,
    rd_sweep,
    select_delta_for_budget,
    update_rng,
    vote_histogram,
    vote_mode,
)
from .synthetic import synthetic_updates
from .updates import ClientUpdate, derive_seed, pooled_histogram, symbol_entropy, update_stats

EXPERIMENTS = (
    "rd_sweep",
    "vote",
    "train",
    "compare",
    "ablate_rotation",
    "ablate_normalization",
    "rounding_compare",
)


class ConfigError(ValueError):
    pass


# Schema sections.


@dataclass(frozen=True)
class UpdateSource:
    source: str = "synthetic"
    kind: str = "power_law"
    num_clients: int = 50
    dimension: int = 1000
    sparsity: float = 0.9
    scale: float = 1.0
    tail: float = 3.0
    norm_sigma: float = 0.0
    rounds: int = 20

    def __post_init__(self):
        if self.source not in ("synthetic", "training"):
            raise ConfigError(f"updates.source must be 'synthetic' or 'training', not {self.source!r}")
        if self.kind not in ("power_law", "laplace"):
            raise ConfigError(f"updates.kind must be 'power_law' or 'laplace', not {self.kind!r}")
        if self.num_clients < 1 or self.dimension < 1 or self.rounds < 1:
            raise ConfigError("updates.num_clients, dimension and rounds must be >= 1")
        if not 0 <= self.sparsity <= 1:
            raise ConfigError("updates.sparsity must be in [0, 1]")


@dataclass(frozen=True)
class TrainingSection:
    rounds: int = 200
    clients_per_round: int = 10
    local_epochs: int = 1
    batch_size: int = 32
    client_lr: float = 0.005
    server_lr: float = 1.0
    server_opt: str = "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-3
    workers: int = 1
    seeds: int = 1

    def __post_init__(self):
        if self.seeds < 1:
            raise ConfigError("training.seeds must be >= 1")

    def fed_config(self, compressor, seed: int) -> FedConfig:
        kw = dataclasses.asdict(self)
        kw.pop("seeds")
        return FedConfig(compressor=compressor, seed=seed, **kw)


@dataclass(frozen=True)
class CompressorSection:
    method: str = "ours"
    step: Optional[float] = None
    budget_bits_per_elem: Optional[float] = None
    quantizer: str = "stochastic"
    topk_fraction: float = 0.1
    qsgd_levels: int = 16
    tlc_sparsity: float = 1.0

    def __post_init__(self):
        if self.method not in ("ours",) + METHODS:
            raise ConfigError(f"unknown compressor method {self.method!r}")
        if self.step is not None and self.budget_bits_per_elem is not None:
            raise ConfigError("give compressor.step or compressor.budget_bits_per_elem, not both")


@dataclass(frozen=True)
class VoteSection:
    lam: Optional[float] = None
    target_delta: Optional[float] = None

    def __post_init__(self):
        if self.lam is not None and self.target_delta is not None:
            raise ConfigError("give vote.lam or vote.target_delta, not both")


@dataclass(frozen=True)
class RotationSection:
    rotation_seed: int = 0
    per_client: bool = False


@dataclass(frozen=True)
class NormalizationSection:
    delta: float = 1.0
    rel_tol: float = 0.05


@dataclass(frozen=True)
class RoundingSection:
    quantizers: tuple = ("round", "stochastic", "dithered")

    def __post_init__(self):
        for q in self.quantizers:
            if q not in ("round", "stochastic", "dithered"):
                raise ConfigError(f"unknown rounding method {q!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    master_seed: int = 0
    output_dir: str = "results"
    grid: tuple = DEFAULT_GRID
    code: str = "gamma"
    updates: UpdateSource = field(default_factory=UpdateSource)
    task: TaskSpec = field(default_factory=TaskSpec)
    training: TrainingSection = field(default_factory=TrainingSection)
    compressor: CompressorSection = field(default_factory=CompressorSection)
    methods: dict = field(default_factory=lambda: {"ours": [1.0], "topk": [0.1], "none": [None]})
    vote: VoteSection = field(default_factory=VoteSection)
    rotation: RotationSection = field(default_factory=RotationSection)
    normalization: NormalizationSection = field(default_factory=NormalizationSection)
    rounding: RoundingSection = field(default_factory=RoundingSection)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))


_SECTIONS = {
    "updates": UpdateSource,
    "task": TaskSpec,
    "training": TrainingSection,
    "compressor": CompressorSection,
    "vote": VoteSection,
    "rotation": RotationSection,
    "normalization": NormalizationSection,
    "rounding": RoundingSection,
}


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _coerce(value, default, where: str):
    """Check ``value`` against the type of the field's default."""
    if value is None:
        if default is None:
            return None
        raise ConfigError(f"{where}: null is not allowed here")
    if default is None:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number or null, got {value!r}")
        return float(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{where}: expected a nonempty list, got {value!r}")
        return tuple(_coerce(v, default[0], f"{where}[{i}]") for i, v in enumerate(value))
    return value


def _build(cls, raw, where: str, skip=()):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping")
    defaults = {f.name: f for f in dataclasses.fields(cls) if f.name not in skip}
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(map(str, unknown))}")
    kwargs = {}
    for name, value in raw.items():
        f = defaults[name]
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        kwargs[name] = _coerce(value, default, f"{where}.{name}")
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _parse_methods(raw) -> dict:
    if not isinstance(raw, dict) or not raw:
        raise ConfigError("methods: expected a nonempty mapping of method -> parameter list")
    out = {}
    for method, params in raw.items():
        if method not in ("ours",) + METHODS:
            raise ConfigError(f"methods: unknown method {method!r}")
        if not isinstance(params, list) or not params:
            raise ConfigError(f"methods.{method}: expected a nonempty list")
        if method in ("drive", "none"):
            if any(p is not None for p in params) or len(params) != 1:
                raise ConfigError(f"methods.{method}: takes no parameter, use [null]")
        else:
            for p in params:
                if isinstance(p, bool) or not isinstance(p, (int, float)):
                    raise ConfigError(f"methods.{method}: parameters must be numbers, got {p!r}")
        out[method] = list(params)
    return out


def parse_config(raw: Any) -> ExperimentConfig:
    """Validate a loaded YAML document. Raises :class:`ConfigError`."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    top = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(raw) - top)
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {', '.join(map(str, unknown))}")
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}; got {exp!r}")
    kw: dict[str, Any] = {"experiment": exp}
    kw["master_seed"] = _coerce(raw.get("master_seed", 0), 0, "master_seed")
    if not 0 <= kw["master_seed"] < 2**64:
        raise ConfigError("master_seed must be a 64-bit unsigned integer")
    kw["output_dir"] = _coerce(raw.get("output_dir", "results"), "", "output_dir")
    grid = _coerce(raw.get("grid", list(DEFAULT_GRID)), (1.0,), "grid")
    if any(g <= 0 or not math.isfinite(g) for g in grid) or len(set(grid)) != len(grid):
        raise ConfigError("grid: steps must be positive, finite and distinct")
    kw["grid"] = tuple(sorted(grid))
    code = _coerce(raw.get("code", "gamma"), "", "code")
    if code not in ("gamma", "delta"):
        raise ConfigError("code must be 'gamma' or 'delta'")
    kw["code"] = code
    for name, cls in _SECTIONS.items():
        if name == "task":
            spec = _build(cls, raw.get(name), name, skip=("master_seed",))
            kw[name] = dataclasses.replace(spec, master_seed=kw["master_seed"])
        else:
            kw[name] = _build(cls, raw.get(name), name)
    if "methods" in raw:
        kw["methods"] = _parse_methods(raw["methods"])
    return ExperimentConfig(**kw)


def load_config(path, experiment: Optional[str] = None) -> ExperimentConfig:
    """Read and validate a YAML config. I/O errors propagate as ``OSError``.

    ``experiment`` fills in a missing ``experiment`` key and must agree with a present one.
    """
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from None
    if raw is None:
        raw = {}
    if experiment is not None and isinstance(raw, dict):
        given = raw.setdefault("experiment", experiment)
        if given != experiment:
            raise ConfigError(f"config is for experiment {given!r}, not {experiment!r}")
    return parse_config(raw)


# Shared helpers.


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def trial_seed(master_seed: int, trial: int) -> int:
    return derive_seed(master_seed, "trial", trial)


def collect_updates(cfg: ExperimentConfig) -> list[ClientUpdate]:
    """Client updates from the configured source."""
    src = cfg.updates
    if src.source == "synthetic":
        return synthetic_updates(
            src.num_clients, src.dimension, derive_seed(cfg.master_seed, "updates"), src.kind,
            src.sparsity, src.scale, src.tail, src.norm_sigma,
        )
    dataset = generate_task(cfg.task)
    fed = dataclasses.replace(cfg.training.fed_config(None, trial_seed(cfg.master_seed, 0)), rounds=src.rounds)
    collected: list[ClientUpdate] = []
    run_training(dataset, fed, collect=collected)
    return collected


def make_compressor(method: str, param, quantizer: str = "stochastic", code: str = "gamma"):
    if method == "ours":
        return CodecConfig(float(param), quantizer, code)
    if method == "none":
        return None
    if method == "topk":
        return BaselineConfig("topk", topk_fraction=float(param))
    if method == "qsgd":
        return BaselineConfig("qsgd", qsgd_levels=int(param))
    if method == "tlc":
        return BaselineConfig("tlc", tlc_sparsity=float(param))
    return BaselineConfig(method)


@dataclass
class TrialSummary:
    final_accuracy: float
    final_accuracy_std: float
    final_eval_loss: float
    total_upstream_bits: float
    mean_rate: float
    mean_distortion: float


def run_trials(dataset, training: TrainingSection, compressor, master_seed: int) -> tuple[TrialSummary, list]:
    traces = [
        run_training(dataset, training.fed_config(compressor, trial_seed(master_seed, i)))
        for i in range(training.seeds)
    ]
    acc = np.array([t.final_accuracy for t in traces])
    summary = TrialSummary(
        float(acc.mean()),
        float(acc.std(ddof=1)) if acc.size > 1 else 0.0,
        float(np.mean([t.records[-1].eval_loss for t in traces])),
        float(np.mean([t.total_bits for t in traces])),
        float(np.mean([t.mean_rate for t in traces])),
        float(np.mean([t.mean_distortion for t in traces])),
    )
    return summary, traces


# Pipelines. Each returns (files, summary).


def _rd_sweep(cfg: ExperimentConfig, out: Path):
    updates = collect_updates(cfg)
    points = rd_sweep(updates, cfg.grid, cfg.master_seed, cfg.code)
    write_csv(out / "rd_sweep.csv", RD_COLUMNS, [(p.delta, p.mean_rate, p.mean_distortion, p.mean_entropy) for p in points])

    stats_rows, hist_rows = [], []
    for delta in cfg.grid:
        symbols = [quantize(up.values, delta, "stochastic", update_rng(cfg.master_seed, up)).symbols for up in updates]
        sparsity = np.mean([update_stats(q).sparsity for q in symbols])
        pooled = np.concatenate(symbols)
        nonzero = np.any(pooled != 0)
        stats_rows.append((
            delta,
            float(sparsity),
            symbol_entropy(pooled),
            stream_overhead(pooled, cfg.code),
            coding_overhead(pooled, cfg.code) if nonzero else math.nan,
        ))
        for sym, count in sorted(pooled_histogram(symbols).items()):
            hist_rows.append((delta, int(sym), count))
    write_csv(
        out / "update_stats.csv",
        ("delta", "mean_sparsity_fraction", "pooled_entropy_bits_per_symbol",
         "stream_overhead_ratio", "magnitude_overhead_ratio"),
        stats_rows,
    )
    write_csv(out / "histogram.csv", ("delta", "symbol", "count"), hist_rows)
    files = ["rd_sweep.csv", "update_stats.csv", "histogram.csv"]
    return files, {"updates": len(updates)}


def _vote(cfg: ExperimentConfig, out: Path):
    updates = collect_updates(cfg)
    if cfg.vote.lam is not None:
        lam = cfg.vote.lam
    else:
        target = cfg.vote.target_delta if cfg.vote.target_delta is not None else cfg.grid[len(cfg.grid) // 2]
        lam = float(lambda_for_delta(target))
    hist = vote_histogram(updates, lam, cfg.grid, cfg.master_seed, cfg.code)
    n = sum(hist.values())
    write_csv(out / "votes.csv", ("delta", "votes", "vote_fraction"), [(d, c, c / n) for d, c in hist.items()])
    return ["votes.csv"], {"lambda": lam, "mode": vote_mode(hist), "modal_fraction": modal_fraction(hist)}


def resolve_step(cfg: ExperimentConfig) -> float:
    """The configured step, or the smallest grid step meeting the bit budget."""
    c = cfg.compressor
    if c.step is not None:
        return c.step
    if c.budget_bits_per_elem is None:
        raise ConfigError("compressor 'ours' needs step or budget_bits_per_elem")
    curve = rd_sweep(collect_updates(cfg), cfg.grid, cfg.master_seed, cfg.code)
    return select_delta_for_budget(curve, c.budget_bits_per_elem)


def _train(cfg: ExperimentConfig, out: Path):
    c = cfg.compressor
    param = {"ours": None, "topk": c.topk_fraction, "qsgd": c.qsgd_levels, "tlc": c.tlc_sparsity}.get(c.method)
    if c.method == "ours":
        param = resolve_step(cfg)
    compressor = make_compressor(c.method, param, c.quantizer, cfg.code)
    dataset = generate_task(cfg.task)
    fed = cfg.training.fed_config(compressor, cfg.master_seed)
    trace = run_training(dataset, fed)
    trace.write(out / "training.csv", {"task": cfg.task.to_dict(), "fed": fed.to_dict()})
    return ["training.csv", "training.json"], {
        "final_accuracy": trace.final_accuracy,
        "total_upstream_bits": trace.total_bits,
        "step": param,
    }


COMPARE_COLUMNS = (
    "method",
    "parameter",
    "seeds",
    "final_accuracy",
    "final_accuracy_std",
    "final_eval_loss",
    "total_upstream_bits",
    "mean_rate_bits_per_elem",
    "mean_distortion_per_elem",
)


def _compare(cfg: ExperimentConfig, out: Path):
    dataset = generate_task(cfg.task)
    rows = []
    for method, params in cfg.methods.items():
        for p in params:
            s, _ = run_trials(dataset, cfg.training, make_compressor(method, p, code=cfg.code), cfg.master_seed)
            rows.append((method, p, cfg.training.seeds, s.final_accuracy, s.final_accuracy_std, s.final_eval_loss,
                         s.total_upstream_bits, s.mean_rate, s.mean_distortion))
    write_csv(out / "compare.csv", COMPARE_COLUMNS, rows)
    return ["compare.csv"], {"rows": len(rows)}


def _ablate_rotation(cfg: ExperimentConfig, out: Path):
    updates = collect_updates(cfg)
    rows = rotation_ablation(updates, cfg.grid, cfg.master_seed, cfg.rotation.rotation_seed,
                             cfg.rotation.per_client, cfg.code)
    write_csv(
        out / "rotation.csv",
        ("delta", "entropy_bits_per_symbol", "entropy_rotated_bits_per_symbol",
         "distortion_sqerr_per_elem", "distortion_rotated_sqerr_per_elem",
         "rate_bits_per_elem", "rate_rotated_bits_per_elem"),
        [dataclasses.astuple(r) for r in rows],
    )
    return ["rotation.csv"], {"padding": "padded coordinates excluded from entropy, counted in rate"}


def _ablate_normalization(cfg: ExperimentConfig, out: Path):
    updates = collect_updates(cfg)
    cmp = normalization_ablation(updates, cfg.normalization.delta, cfg.master_seed, cfg.normalization.rel_tol, cfg.code)
    rows = [
        ("fixed_step", p.step, p.bits, p.rate, p.distortion, p.distortion_per_element)
        for p in [cmp.fixed]
    ] + [("normalized", cmp.normalized.step, cmp.normalized.bits, cmp.normalized.rate,
          cmp.normalized.distortion, cmp.normalized.distortion_per_element)]
    write_csv(
        out / "normalization.csv",
        ("scheme", "step", "total_bits", "rate_bits_per_elem", "total_distortion_sqerr", "distortion_sqerr_per_elem"),
        rows,
    )
    return ["normalization.csv"], {"rate_mismatch": cmp.rate_mismatch}


def _rounding_compare(cfg: ExperimentConfig, out: Path):
    updates = collect_updates(cfg)
    rows = []
    for method in cfg.rounding.quantizers:
        for delta in cfg.grid:
            rate = dist = ent = bias = 0.0
            for up in updates:
                u = up.values
                seed = derive_seed(cfg.master_seed, "dither", up.round, up.client_id)
                q = quantize(u, delta, method, rng=update_rng(cfg.master_seed, up), dither_seed=seed)
                err = dequantize(q) - u
                rate += payload_length(q.symbols, cfg.code) / u.size
                dist += float(err @ err) / u.size
                ent += symbol_entropy(q.symbols)
                bias += float(err.mean())
            n = len(updates)
            rows.append((method, delta, rate / n, dist / n, ent / n, bias / n))
    write_csv(
        out / "rounding.csv",
        ("quantizer", "delta", "mean_rate_bits_per_elem", "mean_distortion_per_elem",
         "mean_entropy_bits_per_symbol", "mean_error_per_elem"),
        rows,
    )
    return ["rounding.csv"], {}


PIPELINES = {
    "rd_sweep": _rd_sweep,
    "vote": _vote,
    "train": _train,
    "compare": _compare,
    "ablate_rotation": _ablate_rotation,
    "ablate_normalization": _ablate_normalization,
    "rounding_compare": _rounding_compare,
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_experiment(cfg: ExperimentConfig, output_dir=None) -> dict:
    """Run the configured pipeline and write its CSVs and manifest. Returns the manifest."""
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files, summary = PIPELINES[cfg.experiment](cfg, out)
    manifest = {
        "experiment": cfg.experiment,
        "master_seed": cfg.master_seed,
        "config": cfg.to_dict(),
        "versions": {"rdfl": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "outputs": {name: _sha256(out / name) for name in files},
        "summary": summary,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return manifest
