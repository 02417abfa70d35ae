"""Random instances, Monte-Carlo sweeps and file formats.

Instances are drawn per task from a counter-keyed generator: task k of draw
d always comes from ``SeedSequence([seed, d, k])``. A draw with K tasks is
therefore the first K tasks of the same draw with more tasks, and every
method and every deadline sees the very same instance (common random
numbers). Results do not depend on iteration order or worker count.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .closed_form import solve_negligible
from .errors import FormatError, InfeasibleError, SizeError
from .model import Instance, SystemParams, TaskSpec
from .solvers import (MAX_OPTIMAL_K, baseline_equal_split, baseline_lemma1_horizon,
                      solve_optimal, solve_suboptimal)

log = logging.getLogger(__name__)

CSV_HEADER = ("K,T_s,method,mean_energy_J,std_energy_J,"
              "mean_makespan_s,fastpath_rate,mean_walltime_s")

METHODS = {
    "optimal": solve_optimal,
    "suboptimal": solve_suboptimal,
    "baseline1": lambda inst: baseline_equal_split(inst, "nonnegligible"),
    "baseline2": baseline_lemma1_horizon,
    "negligible": solve_negligible,
    "equal_split": lambda inst: baseline_equal_split(inst, "negligible"),
}

CONFIG_DIR = Path(__file__).with_name("configs")

# assumed default: the reference simulation setting leaves the bandwidth open
DEFAULT_BANDWIDTH_HZ = 1e6
DEFAULT_NUM_DRAWS = 200


def solve_with(method: str, instance: Instance):
    try:
        fn = METHODS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(METHODS)}") from None
    return fn(instance)


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    K_range: tuple
    T_range_s: tuple
    methods: tuple
    num_draws: int = DEFAULT_NUM_DRAWS
    bs_cpu_hz: float = 6e9
    switched_capacitance: float = 1e-29
    bandwidth_hz: float = DEFAULT_BANDWIDTH_HZ
    noise_power_w: float = 1e-9
    bs_weight: float = 0.1
    upload_bits_range: tuple = (1e5, 5e5)
    download_bits_range: tuple = (1e5, 5e5)
    workload_cycles_range: tuple = (0.5e7, 1.5e7)
    mean_gain: float = 1e-3

    def __post_init__(self):
        for name in ("K_range", "T_range_s", "methods", "upload_bits_range",
                     "download_bits_range", "workload_cycles_range"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64):
            raise FormatError("seed must be an integer in [0, 2^64)")
        if self.num_draws < 1:
            raise SizeError("num_draws must be >= 1")
        if not self.K_range or any(not isinstance(k, int) or k < 1 for k in self.K_range):
            raise FormatError("K_range must be a nonempty list of positive integers")
        if not self.T_range_s or any(not (t > 0 and math.isfinite(t)) for t in self.T_range_s):
            raise FormatError("T_range_s must be a nonempty list of positive numbers")
        if not self.methods:
            raise FormatError("methods must be nonempty")
        for m in self.methods:
            if m not in METHODS:
                raise FormatError(f"unknown method {m!r}; choose from {sorted(METHODS)}")
        if "optimal" in self.methods and max(self.K_range) > MAX_OPTIMAL_K:
            raise SizeError(f"method 'optimal' needs K <= {MAX_OPTIMAL_K}")
        for name in ("upload_bits_range", "download_bits_range", "workload_cycles_range"):
            r = getattr(self, name)
            if len(r) != 2 or not (0 < r[0] <= r[1]):
                raise FormatError(f"{name} must be [low, high] with 0 < low <= high")
        if not self.mean_gain > 0:
            raise FormatError("mean_gain must be > 0")
        # validates the physical parameters
        self.params(self.T_range_s[0])

    def params(self, deadline_s: float) -> SystemParams:
        return SystemParams(deadline_s=deadline_s, bs_cpu_hz=self.bs_cpu_hz,
                            switched_capacitance=self.switched_capacitance,
                            bandwidth_hz=self.bandwidth_hz,
                            noise_power_w=self.noise_power_w, bs_weight=self.bs_weight)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise FormatError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise FormatError(f"unknown config key(s): {', '.join(unknown)}")
        for req in ("seed", "K_range", "T_range_s", "methods"):
            if req not in data:
                raise FormatError(f"config is missing required field {req!r}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise FormatError(f"bad config value: {exc}") from None

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v
                for k, v in self.__dict__.items()}


def load_config(source) -> ScenarioConfig:
    """Load a config from a path, or by name from the shipped configs."""
    path = Path(source)
    if not path.exists():
        shipped = CONFIG_DIR / (str(source) if str(source).endswith(".json") else f"{source}.json")
        if not shipped.exists():
            raise FormatError(f"no config file or shipped config named {str(source)!r}")
        path = shipped
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return ScenarioConfig.from_dict(data)


def _task_rng(seed: int, draw_index: int, task_index: int):
    return np.random.default_rng(np.random.SeedSequence([seed, draw_index, task_index]))


def generate_instance(config: ScenarioConfig, K: int, draw_index: int,
                      deadline_s: float | None = None) -> Instance:
    """Draw ``K`` tasks and gains for one Monte-Carlo sample.

    Bits and cycles are uniform on the configured ranges, power gains are
    exponential (Rayleigh amplitude) with mean ``mean_gain``.
    """
    if K < 1:
        raise SizeError("K must be >= 1")
    T = config.T_range_s[0] if deadline_s is None else deadline_s
    tasks, gains = [], []
    for k in range(K):
        rng = _task_rng(config.seed, draw_index, k)
        up = rng.uniform(*config.upload_bits_range)
        down = rng.uniform(*config.download_bits_range)
        cycles = rng.uniform(*config.workload_cycles_range)
        gain = rng.exponential(config.mean_gain)
        tasks.append(TaskSpec(upload_bits=up, workload_cycles=cycles, download_bits=down))
        gains.append(gain)
    return Instance(tasks, gains, config.params(T))


@dataclass
class SweepRow:
    K: int
    T_s: float
    method: str
    mean_energy_j: float
    std_energy_j: float
    mean_makespan_s: float
    fastpath_rate: float
    mean_walltime_s: float
    solved: int = 0
    infeasible: int = 0
    energies: list = field(default_factory=list, repr=False)


def _fast_path(res) -> float:
    d = res.diagnostics
    if "fast_path" in d:
        return float(d["fast_path"])
    if "relaxation_feasible" in d:
        return float(d["relaxation_feasible"])
    return math.nan


def _run_point(args):
    config, K, T, draws = args
    per_method = {m: {"e": [], "span": [], "fast": [], "wall": [], "bad": 0}
                  for m in config.methods}
    for d in draws:
        inst = generate_instance(config, K, d, T)
        for m in config.methods:
            acc = per_method[m]
            t0 = time.perf_counter()
            try:
                res = solve_with(m, inst)
            except InfeasibleError:
                acc["bad"] += 1
                acc["e"].append(math.nan)
                continue
            acc["wall"].append(time.perf_counter() - t0)
            acc["e"].append(res.energy_j)
            acc["span"].append(res.makespan_s)
            acc["fast"].append(_fast_path(res))
    return K, T, per_method


def _summarise(K, T, method, acc) -> SweepRow:
    e = np.array(acc["e"], dtype=float)
    ok = e[np.isfinite(e)]
    if len(ok):
        mean, std = float(ok.mean()), float(ok.std())
        span = float(np.mean(acc["span"]))
        fast = float(np.mean(acc["fast"]))
        wall = float(np.mean(acc["wall"]))
    else:
        mean = std = span = fast = wall = math.nan
    return SweepRow(K, T, method, mean, std, span, fast, wall,
                    solved=len(ok), infeasible=acc["bad"], energies=list(e))


def run_sweep(config: ScenarioConfig, methods=None, threads: int = 1) -> list:
    """Mean energy for every (K, T, method); rows sorted by (K, T, method).

    Draws whose instance is infeasible for a method (execution alone exceeds
    T) are counted in ``SweepRow.infeasible`` and left out of the means.
    """
    if methods is not None:
        config = ScenarioConfig.from_dict({**config.to_dict(), "methods": list(methods)})
    if config.num_draws < 1:
        raise SizeError("num_draws must be >= 1")
    draws = tuple(range(config.num_draws))
    jobs = [(config, K, T, draws) for K in sorted(set(config.K_range))
            for T in sorted(set(config.T_range_s))]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(_run_point, jobs))
    else:
        outs = [_run_point(j) for j in jobs]
    rows = [_summarise(K, T, m, acc) for K, T, per in outs for m, acc in per.items()]
    rows.sort(key=lambda r: (r.K, r.T_s, r.method))
    bad = sum(r.infeasible for r in rows)
    if bad:
        log.warning("%d infeasible (instance, method) pairs skipped", bad)
    return rows


def _num(x) -> str:
    # repr is the shortest string that round-trips
    return repr(float(x)) if math.isfinite(x) else "nan"


def emit_csv(rows, include_timing: bool = False) -> bytes:
    """CSV bytes. Wall time is written only on request so output is reproducible."""
    lines = [CSV_HEADER]
    for r in rows:
        wall = _num(r.mean_walltime_s) if include_timing else "nan"
        lines.append(",".join([str(r.K), _num(r.T_s), r.method, _num(r.mean_energy_j),
                               _num(r.std_energy_j), _num(r.mean_makespan_s),
                               _num(r.fastpath_rate), wall]))
    return ("\n".join(lines) + "\n").encode()


# ---- instance JSON ----------------------------------------------------------

_PARAM_FIELDS = ("deadline_s", "bs_cpu_hz", "switched_capacitance",
                 "bandwidth_hz", "noise_power_w", "bs_weight")
_TASK_FIELDS = ("upload_bits", "workload_cycles", "download_bits")


def instance_to_dict(instance: Instance) -> dict:
    p = instance.params
    return {
        "params": {f: float(getattr(p, f)) for f in _PARAM_FIELDS},
        "tasks": [{f: float(getattr(t, f)) for f in _TASK_FIELDS} for t in instance.tasks],
        "channel_gains": [float(g) for g in instance.channel_gains],
    }


def emit_instance_json(instance: Instance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2) + "\n"


def _field(obj, name, where):
    if not isinstance(obj, dict):
        raise FormatError(f"{where} must be a JSON object")
    if name not in obj:
        raise FormatError(f"missing field {name!r} in {where}")
    return obj[name]


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise FormatError(f"field {where} must be a number, got {v!r}")
    return float(v)


def instance_from_dict(data) -> Instance:
    params = _field(data, "params", "instance")
    tasks = _field(data, "tasks", "instance")
    gains = _field(data, "channel_gains", "instance")
    extra = set(data) - {"params", "tasks", "channel_gains"}
    if extra:
        raise FormatError(f"unknown field(s) in instance: {', '.join(sorted(extra))}")
    pv = {f: _number(_field(params, f, "params"), f"params.{f}") for f in _PARAM_FIELDS}
    if not isinstance(tasks, list) or not isinstance(gains, list):
        raise FormatError("fields 'tasks' and 'channel_gains' must be lists")
    specs = []
    for i, t in enumerate(tasks):
        vals = {f: _number(_field(t, f, f"tasks[{i}]"), f"tasks[{i}].{f}") for f in _TASK_FIELDS}
        try:
            specs.append(TaskSpec(**vals))
        except ValueError as exc:
            raise FormatError(f"tasks[{i}]: {exc}") from None
    gv = [_number(g, f"channel_gains[{i}]") for i, g in enumerate(gains)]
    try:
        return Instance(specs, gv, SystemParams(**pv))
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def parse_instance_json(text: str) -> Instance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return instance_from_dict(data)
