"""Experiment runner: residual, suboptimality and gain-preservation traces.

Every algorithm gets the same budget of ``n`` operator applications and
starts from zero, so each CSV has ``n + 1`` rows. Algorithm 1 splits the
budget into two phases of ``n / 2`` (``n`` must be even).
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import chain, generators, oracle, solvers
from .bellman import greedy, residual_average
from .errors import ConfigError
from .mdp import Mdp, load, sup_norm

log = logging.getLogger(__name__)

ALGORITHMS = ("vi", "alg1", "alg2", "alg3", "baseline")
OUTPUTS = ("csv", "svg", "json")
CSV_HEADER = "iter,fpe,subopt,gain_pres"
COLORS = {"vi": "#d62728", "alg1": "#1f77b4", "alg2": "#2ca02c", "alg3": "#9467bd", "baseline": "#ff7f0e"}


@dataclass
class ExperimentConfig:
    instance: dict
    algorithms: list
    n: int
    seeds: list = field(default_factory=lambda: [0])
    outputs: dict = field(default_factory=lambda: {"csv": True, "svg": False, "json": True})
    out_dir: str = "bench_out"
    gamma: float | None = None
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError(f"n must be a positive integer, got {self.n!r}")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ConfigError(f"unknown algorithms {unknown}; expected a subset of {ALGORITHMS}")
        if "alg1" in self.algorithms and self.n % 2:
            raise ConfigError(f"alg1 splits the budget into two equal phases; n={self.n} is odd")
        if "baseline" in self.algorithms and self.n < 4:
            raise ConfigError("the discounted baseline needs n >= 4")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        bad = [k for k in self.outputs if k not in OUTPUTS]
        if bad:
            raise ConfigError(f"unknown outputs {bad}; expected a subset of {OUTPUTS}")
        if not any(self.outputs.values()):
            raise ConfigError("at least one output must be enabled")
        if "kind" not in self.instance:
            raise ConfigError("instance needs a 'kind'")
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        fields = set(cls.__dataclass_fields__)
        extra = set(data) - fields
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        missing = {"instance", "algorithms", "n"} - set(data)
        if missing:
            raise ConfigError(f"missing config keys {sorted(missing)}")
        return cls(**data)

    @property
    def discount(self) -> float:
        """Discount for alg2/alg3: the config value or 1 - 2/n."""
        return self.gamma if self.gamma is not None else 1.0 - 2.0 / self.n


def build_instance(spec: dict, seed: int) -> tuple[Mdp, object]:
    """``(mdp, reference_policy_or_None)`` for an instance spec."""
    kind = spec["kind"]
    params = {k: v for k, v in spec.items() if k != "kind"}
    try:
        if kind == "mkt":
            return generators.gen_mkt(params["k"], params["T"], params["eps"], seed), generators.mkt_optimal_policy(
                params["k"]
            )
        if kind == "four-state":
            return generators.gen_four_state(params["eps"]), generators.four_state_optimal_policy()
        if kind == "random":
            return generators.gen_random_multichain(seed=seed, **params), None
        if kind == "file":
            return load(Path(params["path"]).read_bytes()), None
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad parameters for instance kind {kind!r}: {exc}") from None
    raise ConfigError(f"unknown instance kind {kind!r}")


def _run_algorithm(mdp: Mdp, alg: str, config: ExperimentConfig):
    """``(report, gamma_for_greedy)`` with every iterate retained."""
    n = config.n
    zero = np.zeros(mdp.n_states)
    if alg == "vi":
        rep = solvers.picard(solvers.bellman_operator(mdp), zero, n, keep="full")
        rep.output_policy = greedy(mdp, rep.output_value)
        return rep, 1.0
    if alg == "alg1":
        return solvers.approx_shifted_halpern(mdp, zero, n // 2, keep="full"), 1.0
    if alg == "alg2":
        gamma = config.discount
        rep = solvers.halpern_then_picard(solvers.bellman_operator(mdp, gamma), zero, n, keep="full")
        rep.output_policy = greedy(mdp, rep.output_value, gamma)
        return rep, gamma
    if alg == "alg3":
        gamma = config.discount
        return solvers.warm_start_htp(mdp, gamma, n, keep="full"), gamma
    rep = solvers.dmdp_baseline(mdp, n, keep="full")
    return rep, rep.meta["gamma"]


def trace_rows(mdp: Mdp, iterates, rho_star, gamma) -> list[tuple]:
    """``(iter, fpe, subopt, gain_pres)`` for each iterate's greedy policy."""
    rows = []
    for t, h in enumerate(iterates):
        fpe = residual_average(mdp, h, rho_star)
        pi = greedy(mdp, h, gamma)
        subopt = sup_norm(rho_star - chain.gain(mdp, pi))
        gain_pres = sup_norm(mdp.P[pi.flat_index(mdp)] @ rho_star - rho_star)
        rows.append((t, fpe, subopt, gain_pres))
    return rows


def _cell(v) -> str:
    return "" if v is None else repr(float(v))


def write_csv(path: Path, rows) -> None:
    lines = [CSV_HEADER] + [",".join([str(r[0])] + [_cell(v) for v in r[1:]]) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def svg_chart(series: dict, title: str, width=640, height=400) -> str:
    """Static log-scale line chart of fixed-point error per algorithm."""
    pad_l, pad_r, pad_t, pad_b = 70, 120, 40, 50
    floor = 1e-16
    logs = {k: [math.log10(max(v, floor)) for v in vals] for k, vals in series.items()}
    flat = [x for v in logs.values() for x in v] or [0.0]
    lo, hi = math.floor(min(flat)), math.ceil(max(flat))
    if hi == lo:
        hi = lo + 1
    steps = max(len(v) for v in series.values()) - 1 or 1
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def px(t, y):
        return pad_l + pw * t / steps, pad_t + ph * (hi - y) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle">{title}</text>',
        f'<line x1="{pad_l}" y1="{pad_t + ph}" x2="{pad_l + pw}" y2="{pad_t + ph}" stroke="black"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + ph}" stroke="black"/>',
    ]
    for e in range(lo, hi + 1):
        _, y = px(0, e)
        out.append(f'<text x="{pad_l - 8}" y="{y + 4:.1f}" text-anchor="end">1e{e}</text>')
        out.append(f'<line x1="{pad_l}" y1="{y:.1f}" x2="{pad_l + pw}" y2="{y:.1f}" stroke="#eee"/>')
    for t in (0, steps // 2, steps):
        x, _ = px(t, lo)
        out.append(f'<text x="{x:.1f}" y="{pad_t + ph + 18}" text-anchor="middle">{t}</text>')
    out.append(f'<text x="{pad_l + pw / 2}" y="{height - 10}" text-anchor="middle">iteration</text>')
    for i, (name, vals) in enumerate(logs.items()):
        color = COLORS.get(name.split(" ")[0], "#333")
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in (px(t, v) for t, v in enumerate(vals)))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = pad_t + 16 * i + 10
        out.append(f'<line x1="{pad_l + pw + 10}" y1="{ly}" x2="{pad_l + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{pad_l + pw + 35}" y="{ly + 4}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


@dataclass
class ExperimentResult:
    traces: dict
    files: list
    index_path: Path | None = None


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    traces, files, index = {}, [], {"config": _config_dict(config), "runs": []}
    for seed in config.seeds:
        mdp, reference = build_instance(config.instance, seed)
        gt = oracle.ground_truth(mdp, reference=reference)
        fpe_series = {}
        for alg in config.algorithms:
            report, gamma = _run_algorithm(mdp, alg, config)
            rows = trace_rows(mdp, report.trace.iterates, gt.rho_star, gamma)
            traces[(alg, seed)] = rows
            fpe_series[alg] = [r[1] for r in rows]
            stem = out_dir / f"{alg}_seed{seed}"
            entry = {"algorithm": alg, "seed": seed, "final_fpe": rows[-1][1], "final_subopt": rows[-1][2]}
            if config.outputs.get("csv"):
                write_csv(stem.with_suffix(".csv"), rows)
                files.append(stem.with_suffix(".csv"))
                entry["csv"] = stem.with_suffix(".csv").name
            if config.outputs.get("json"):
                data = report.to_dict()
                data["trace"].pop("iterates", None)
                data["ground_truth"] = gt.to_dict()
                stem.with_suffix(".json").write_text(json.dumps(data, indent=2))
                files.append(stem.with_suffix(".json"))
                entry["json"] = stem.with_suffix(".json").name
            index["runs"].append(entry)
            log.info("%s seed=%s final fpe %.4e", alg, seed, rows[-1][1])
        if config.outputs.get("svg"):
            path = out_dir / f"fpe_seed{seed}.svg"
            path.write_text(svg_chart(fpe_series, f"{mdp.name}: ||T(h) - h - rho*||"))
            files.append(path)
    index_path = out_dir / "index.json"
    index_path.write_text(json.dumps(index, indent=2))
    return ExperimentResult(traces, files, index_path)


def _config_dict(config: ExperimentConfig) -> dict:
    return {k: getattr(config, k) for k in config.__dataclass_fields__}
