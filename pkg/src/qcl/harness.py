"""Seeded batch campaigns: sweeps over sigma0, tau or T, aggregation, plot data.

Every run has its own seed, derived from ``(master_seed, problem label,
sweep-point index, run index)`` through ``numpy.random.SeedSequence``; results
therefore do not depend on how runs are scheduled over workers. Completed runs
are appended to ``checkpoint.jsonl`` as they finish, and a rerun into the same
directory skips every run id already present there.
"""

import csv
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid
from .fields import RNG_ALGORITHM, synthesize_with_log
from .flow import FlowOptions, Status, optimize
from .problems import LABELS, PROBLEM_F_STREAM, get_problem

try:
    from importlib.metadata import version as _dist_version
    SOFTWARE_VERSION = _dist_version("artifact")
except Exception:  # pragma: no cover - running from a bare source tree
    SOFTWARE_VERSION = "0+unknown"

AXES = ("sigma0", "tau", "T")
RUN_COLUMNS = ("run_id", "problem", "seed", "sigma0", "tau", "eta", "T", "L", "status",
               "iterations", "j_initial", "j_final", "sigma_opt", "wall_ms")
SUMMARY_COLUMNS = ("point", "axis", "value", "n_runs", "n_converged", "n_failed", "n_maxiter",
                   "n_underflow", "mse", "mean_sigma_opt", "success_fraction")
CHECKPOINT = "checkpoint.jsonl"
SEED_ENV = "QCL_SEED"
_LABEL_CODES = {lab: k for k, lab in enumerate(LABELS)}


def run_seed(master_seed, label, point, run):
    """64-bit seed of one run; a pure function of its four arguments."""
    ss = np.random.SeedSequence([int(master_seed), _LABEL_CODES[label.upper()], int(point), int(run)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def master_seed_from_env(default=None):
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        if default is None:
            raise ConfigInvalid(f"no master seed given and {SEED_ENV} is unset")
        return default
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigInvalid(f"{SEED_ENV}={raw!r} is not an integer") from None


def _fmt(x):
    """CSV cell: repr for floats, blank for absent or NaN."""
    if x is None:
        return ""
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


@dataclass
class RunRecord:
    run_id: str
    problem: str
    seed: int
    sigma0: float
    tau: float
    eta: float
    T: float
    L: int
    status: str
    iterations: int
    j_initial: float
    j_final: float
    sigma_opt: float
    wall_ms: float = None
    point: int = 0
    max_unitarity_error: float = 0.0
    monotone: bool = True

    def row(self):
        return [_fmt(getattr(self, c)) for c in RUN_COLUMNS]

    @property
    def converged(self):
        return self.status == Status.CONVERGED.value


def _trace_monotone(j_trace, maximize, atol=1e-14):
    if len(j_trace) < 2:
        return True
    d = np.diff(j_trace)
    return bool(np.all(d >= -atol)) if maximize else bool(np.all(d <= atol))


def run_single(problem, sigma0, seed, opts=FlowOptions(), t_final=None, l_slices=None):
    """Synthesize the seeded initial field, optimize, return ``(result, metadata)``.

    ``problem`` is a label or a ``ControlProblem``; with a label, problem F's
    random instance is drawn from the same seed.
    """
    if isinstance(problem, str):
        label = problem.upper()
        if label not in LABELS:
            raise ConfigInvalid(f"unknown problem label {problem!r}")
        problem = get_problem(label, seed=seed, t_final=t_final, l_slices=l_slices)
    spec = problem.init_spec(seed, sigma0 if problem.uses_rfs else None)
    field0, draws = synthesize_with_log(spec, problem.system, problem.t_final, problem.l_slices)
    result = optimize(problem, field0, opts)
    meta = {
        "problem": problem.label,
        "seed": int(seed),
        "rng": RNG_ALGORITHM,
        "field_substreams": [[int(seed), c] for c in range(problem.system.k)],
        "problem_substream": [int(seed), PROBLEM_F_STREAM] if problem.label == "F" else None,
        "redraws": [d.redraws for d in draws],
        "init": {"sigma0": spec.target_sigma0, "peak_amplitude": spec.peak_amplitude,
                 "m_modes": spec.m_modes, "zeta": spec.zeta, "omega_range": spec.omega_range},
        "T": problem.t_final,
        "L": problem.l_slices,
        "options": asdict(opts),
        "software_version": SOFTWARE_VERSION,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "iteration_unit": result.meta["iteration_unit"],
    }
    result.meta.update(meta)
    return result, meta


@dataclass(frozen=True)
class RunTask:
    run_id: str
    point: int
    label: str
    seed: int
    sigma0: float
    tau: float
    t_final: float
    l_slices: int
    opts: FlowOptions
    record_timing: bool = False


def _execute(task):
    opts = replace(task.opts, tau=task.tau)
    start = time.perf_counter()
    res, meta = run_single(task.label, task.sigma0, task.seed, opts, task.t_final, task.l_slices)
    wall = (time.perf_counter() - start) * 1e3
    maximize = res.meta["gamma"] > 0
    return RunRecord(
        run_id=task.run_id, problem=task.label, seed=task.seed,
        sigma0=task.sigma0 if meta["init"]["sigma0"] is not None else None,
        tau=opts.tau, eta=res.eta, T=float(meta["T"]), L=int(meta["L"]), status=res.status.value,
        iterations=res.iterations, j_initial=float(res.j_initial), j_final=float(res.j_final),
        sigma_opt=float(res.sigma_opt), wall_ms=round(wall, 3) if task.record_timing else None,
        point=task.point, max_unitarity_error=res.max_unitarity_error,
        monotone=_trace_monotone(res.j_trace, maximize),
    )


@dataclass
class SweepConfig:
    """One batch experiment: a problem, one sweep axis, and a run count per point."""

    problem: str
    runs_per_point: int = 20
    sigma0_list: tuple = ()
    tau_list: tuple = ()
    t_list: tuple = ()
    sigma0: float = 1.0
    tau: float = 1e-8
    t_final: float = None
    l_slices: int = None
    options: FlowOptions = field(default_factory=FlowOptions)
    master_seed: int = None
    workers: int = 1
    output_dir: str = None
    record_timing: bool = False

    def __post_init__(self):
        self.problem = str(self.problem).upper()
        if self.problem not in LABELS:
            raise ConfigInvalid(f"unknown problem label {self.problem!r}")
        self.sigma0_list = tuple(float(x) for x in self.sigma0_list)
        self.tau_list = tuple(float(x) for x in self.tau_list)
        self.t_list = tuple(float(x) for x in self.t_list)
        if sum(bool(a) for a in (self.sigma0_list, self.tau_list, self.t_list)) != 1:
            raise ConfigInvalid("exactly one of sigma0_list, tau_list, t_list must be non-empty")
        if self.runs_per_point < 1:
            raise ConfigInvalid("runs_per_point must be >= 1")
        if self.workers < 1:
            raise ConfigInvalid("workers must be >= 1")
        if self.t_list and self.problem in ("D", "E"):
            raise ConfigInvalid(f"problem {self.problem} has a locked T")
        if self.sigma0_list and self.problem == "G":
            raise ConfigInvalid("problem G does not use RFS initialization")
        values = self.sigma0_list + self.tau_list + self.t_list
        if any(not v > 0 for v in values) or not self.tau > 0:
            raise ConfigInvalid("sweep values must be positive")
        if self.master_seed is None:
            self.master_seed = master_seed_from_env()
        if isinstance(self.options, dict):
            self.options = FlowOptions(**self.options)

    @property
    def axis(self):
        if self.sigma0_list:
            return "sigma0"
        return "tau" if self.tau_list else "T"

    @property
    def points(self):
        return self.sigma0_list or self.tau_list or self.t_list

    def tasks(self):
        out = []
        for p, value in enumerate(self.points):
            sigma0 = value if self.axis == "sigma0" else self.sigma0
            tau = value if self.axis == "tau" else self.tau
            t_final = value if self.axis == "T" else self.t_final
            for r in range(self.runs_per_point):
                out.append(RunTask(
                    run_id=f"p{p:03d}-r{r:05d}", point=p, label=self.problem,
                    seed=run_seed(self.master_seed, self.problem, p, r), sigma0=sigma0, tau=tau,
                    t_final=t_final, l_slices=self.l_slices, opts=self.options,
                    record_timing=self.record_timing))
        return out

    @classmethod
    def from_dict(cls, doc):
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        doc = dict(doc)
        if "options" in doc:
            try:
                doc["options"] = FlowOptions(**doc["options"])
            except (TypeError, ValueError) as exc:
                raise ConfigInvalid(f"bad options: {exc}") from None
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from None

    @classmethod
    def from_json(cls, path):
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self):
        d = asdict(self)
        d["sigma0_list"], d["tau_list"], d["t_list"] = map(list, (self.sigma0_list, self.tau_list,
                                                                  self.t_list))
        return d


@dataclass
class PointStats:
    point: int
    axis: str
    value: float
    n_runs: int
    n_converged: int
    n_failed: int
    n_maxiter: int
    n_underflow: int
    mse: float
    mean_sigma_opt: float
    success_fraction: float

    def row(self):
        return [_fmt(getattr(self, c)) for c in SUMMARY_COLUMNS]


@dataclass
class SweepStats:
    axis: str
    points: list
    records: list

    def __getitem__(self, k):
        return self.points[k]

    def __len__(self):
        return len(self.points)

    @property
    def success_fractions(self):
        return [p.success_fraction for p in self.points]


def aggregate(records, axis, values):
    """Per-point statistics. Failed counts non-monotone and step-underflow runs.

    MSE and mean sigma_opt are over Converged runs only and are None when no
    run converged.
    """
    out = []
    for p, value in enumerate(values):
        rs = [r for r in records if r.point == p]
        conv = [r for r in rs if r.converged]
        n_max = sum(r.status == Status.MAX_ITERATIONS.value for r in rs)
        n_under = sum(r.status == Status.STEP_UNDERFLOW.value for r in rs)
        n_fail = sum(r.status == Status.FAILED_NON_MONOTONE.value for r in rs) + n_under
        mse = float(np.mean([r.iterations for r in conv])) if conv else None
        sig = [r.sigma_opt for r in conv if not math.isnan(r.sigma_opt)]
        out.append(PointStats(
            point=p, axis=axis, value=float(value), n_runs=len(rs), n_converged=len(conv),
            n_failed=n_fail, n_maxiter=n_max, n_underflow=n_under, mse=mse,
            mean_sigma_opt=float(np.mean(sig)) if sig else None,
            success_fraction=len(conv) / len(rs) if rs else None))
    return out


def _load_checkpoint(path):
    done = {}
    if not path.exists():
        return done
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = RunRecord(**json.loads(line))
            except (json.JSONDecodeError, TypeError):
                continue  # torn last line from an interrupted write
            done[rec.run_id] = rec
    return done


def _run_all(tasks, workers, checkpoint=None):
    records = {}
    done = _load_checkpoint(checkpoint) if checkpoint is not None else {}
    valid = {t.run_id for t in tasks}
    records.update({k: v for k, v in done.items() if k in valid})
    todo = [t for t in tasks if t.run_id not in records]
    fh = None
    if checkpoint is not None:
        fh = checkpoint.open("a")
        if checkpoint.stat().st_size and not checkpoint.read_bytes().endswith(b"\n"):
            fh.write("\n")  # isolate a torn line left by an interrupted run
    try:
        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for rec in pool.map(_execute, todo, chunksize=1):
                    records[rec.run_id] = rec
                    if fh:
                        fh.write(json.dumps(asdict(rec)) + "\n")
                        fh.flush()
        else:
            for t in todo:
                rec = _execute(t)
                records[rec.run_id] = rec
                if fh:
                    fh.write(json.dumps(asdict(rec)) + "\n")
                    fh.flush()
    finally:
        if fh:
            fh.close()
    return [records[k] for k in sorted(records)]


def write_runs_csv(path, records):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_COLUMNS)
        for r in sorted(records, key=lambda r: r.run_id):
            w.writerow(r.row())


def read_runs_csv(path):
    """Rows of a per-run CSV as dicts of strings."""
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def write_summary_csv(path, points):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for p in points:
            w.writerow(p.row())


def write_plot(out_dir, points, axis):
    """``plot.csv`` (axis value, success fraction) and a bare SVG line chart."""
    out_dir = Path(out_dir)
    with (out_dir / "plot.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([axis, "success_fraction"])
        for p in points:
            w.writerow([repr(p.value), _fmt(p.success_fraction)])
    (out_dir / "plot.svg").write_text(svg_line_chart(
        [p.value for p in points], [p.success_fraction for p in points],
        xlabel=axis, ylabel="success fraction", logx=axis in ("sigma0", "tau")))


def svg_line_chart(xs, ys, xlabel="x", ylabel="y", logx=False, width=480, height=320):
    pad = 50
    xv = np.log10(xs) if logx else np.asarray(xs, dtype=float)
    lo, hi = float(xv.min()), float(xv.max())
    span = hi - lo if hi > lo else 1.0

    def px(x):
        return pad + (x - lo) / span * (width - 2 * pad)

    def py(y):
        return height - pad - y * (height - 2 * pad)

    pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xv, ys) if y is not None)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>',
    ]
    for x, y in zip(xv, ys):
        if y is not None:
            parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="steelblue"/>')
    for x, raw in zip(xv, xs):
        parts.append(f'<text x="{px(x):.2f}" y="{height - pad + 16}" font-size="10" '
                     f'text-anchor="middle">{raw:g}</text>')
    for y in (0.0, 0.5, 1.0):
        parts.append(f'<text x="{pad - 6}" y="{py(y) + 3:.2f}" font-size="10" '
                     f'text-anchor="end">{y:g}</text>')
    xl = f"log10 {xlabel}" if logx else xlabel
    parts.append(f'<text x="{width / 2}" y="{height - 12}" font-size="12" text-anchor="middle">{xl}</text>')
    parts.append(f'<text x="14" y="{height / 2}" font-size="12" text-anchor="middle" '
                 f'transform="rotate(-90 14 {height / 2})">{ylabel}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def run_sweep(config):
    """Execute a sweep; with ``output_dir`` set, write runs, summary, plot and config files."""
    tasks = config.tasks()
    checkpoint = None
    out = None
    if config.output_dir is not None:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        checkpoint = out / CHECKPOINT
    records = _run_all(tasks, config.workers, checkpoint)
    stats = SweepStats(config.axis, aggregate(records, config.axis, config.points), records)
    if out is not None:
        write_runs_csv(out / "runs.csv", records)
        write_summary_csv(out / "summary.csv", stats.points)
        write_plot(out, stats.points, config.axis)
        cfg = config.to_dict()
        cfg["software_version"] = SOFTWARE_VERSION
        cfg["rng"] = RNG_ALGORITHM
        (out / "config.json").write_text(json.dumps(cfg, indent=1, sort_keys=True) + "\n")
    return stats


@dataclass
class ToleranceGrid:
    sigma0_list: tuple
    tau_list: tuple
    failed: np.ndarray
    n_runs: int
    records: list

    def violations(self, allowance=0):
        """Cells where failures grow by more than ``allowance`` as tau decreases."""
        order = np.argsort(self.tau_list)[::-1]
        bad = []
        for i, s in enumerate(self.sigma0_list):
            row = self.failed[i, order]
            for a in range(len(order) - 1):
                if row[a + 1] > row[a] + allowance:
                    bad.append((s, self.tau_list[order[a]], self.tau_list[order[a + 1]]))
        return bad

    def monotone(self, allowance=0):
        return not self.violations(allowance)


def run_tolerance_grid(problem, sigma0_list, tau_list, runs, master_seed=None, workers=1,
                       options=FlowOptions(), output_dir=None):
    """Failure counts for every (sigma0, tau) cell.

    Runs in the same sigma0 row share seeds, so each tau sees the same initial
    fields and the tau dependence is not blurred by sampling noise.
    """
    label = problem.upper()
    if label not in LABELS:
        raise ConfigInvalid(f"unknown problem label {problem!r}")
    if get_problem(label).uses_rfs is False:
        raise ConfigInvalid(f"problem {label} does not use RFS initialization")
    if runs < 1 or not sigma0_list or not tau_list:
        raise ConfigInvalid("need runs >= 1 and non-empty sigma0 and tau lists")
    if master_seed is None:
        master_seed = master_seed_from_env()
    sigma0_list = tuple(float(s) for s in sigma0_list)
    tau_list = tuple(float(t) for t in tau_list)
    tasks = []
    for i, s in enumerate(sigma0_list):
        for j, tau in enumerate(tau_list):
            for r in range(runs):
                tasks.append(RunTask(
                    run_id=f"s{i:02d}-t{j:02d}-r{r:05d}", point=i * len(tau_list) + j, label=label,
                    seed=run_seed(master_seed, label, i, r), sigma0=s, tau=tau, t_final=None,
                    l_slices=None, opts=options))
    checkpoint = None
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        checkpoint = out / CHECKPOINT
    records = _run_all(tasks, workers, checkpoint)
    failed = np.zeros((len(sigma0_list), len(tau_list)), dtype=int)
    for r in records:
        if r.status in (Status.FAILED_NON_MONOTONE.value, Status.STEP_UNDERFLOW.value):
            failed[divmod(r.point, len(tau_list))] += 1
    grid = ToleranceGrid(sigma0_list, tau_list, failed, runs, records)
    if output_dir is not None:
        write_runs_csv(out / "runs.csv", records)
        with (out / "grid.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sigma0"] + [repr(t) for t in tau_list])
            for s, row in zip(sigma0_list, failed):
                w.writerow([repr(s)] + [int(c) for c in row])
    return grid
