"""Experiment driver: schedulability sweeps, exclusive-count tables, soundness campaigns, plots.

Every system in a sweep gets its own seed from :func:`derive_seed`, so points
and systems can be evaluated in any order (or in parallel) and the output is
assembled in (point, system index) order afterwards.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analysis_baselines import analyze
from .analysis_leftrs import response_time
from .model import SystemSpec
from .taskgen import GenConfig, generate

log = logging.getLogger(__name__)

ALL_PROTOCOLS = ("leftrs", "msrpft", "msrpft-of", "checkpointing")
LABELS = {"leftrs": "LEFT-RS", "msrpft": "MSRP-FT", "msrpft-of": "MSRP-FT-OF", "checkpointing": "Checkpointing"}

DESK_SCALE = 200
FULL_SCALE = 1000

# swept parameter -> default x-axis values
AXES: dict[str, tuple] = {
    "M": tuple(range(2, 17, 2)),
    "N": tuple(range(2, 10)),
    "rsf": tuple(round(0.1 * k, 1) for k in range(9)),
    "L": (15, 50, 100, 150, 200, 250, 300),
    "A": (1, 5, 10, 15, 20, 25, 30, 35),
    "f": tuple(range(8)),
}


def apply_param(base: GenConfig, param: str, value) -> GenConfig:
    """The generator config for one sweep point."""
    if param == "M":
        return replace(base, M=int(value))
    if param == "N":
        return replace(base, N=int(value))
    if param == "rsf":
        return replace(base, rsf=float(value))
    if param == "L":
        return replace(base, cs_range=(1, int(value)))
    if param == "A":
        return replace(base, A=int(value))
    if param == "f":
        return replace(base, f_max=int(value))
    raise ValueError(f"unknown sweep parameter {param!r}; expected one of {sorted(AXES)}")


def derive_seed(master: int, param: str, value, k: int) -> int:
    """H(master, point, k): first 8 bytes of sha256 over ``"master:param:value:k"``, as an int."""
    key = f"{master}:{param}:{fmt_value(value)}:{k}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def fmt_value(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


@dataclass(frozen=True)
class SweepConfig:
    param: str = "M"
    values: tuple = ()  # empty -> AXES[param]
    base: GenConfig = field(default_factory=GenConfig)
    systems_per_point: int = DESK_SCALE
    protocols: tuple[str, ...] = ALL_PROTOCOLS
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.values and self.param in AXES:
            object.__setattr__(self, "values", AXES[self.param])
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "protocols", tuple(self.protocols))

    def check(self) -> list[str]:
        errs = []
        if self.param not in AXES:
            errs.append(f"unknown sweep parameter {self.param!r}")
        if not self.values:
            errs.append("value list is empty")
        if self.systems_per_point < 1:
            errs.append("systems_per_point must be >= 1")
        if not self.protocols:
            errs.append("protocol list is empty")
        bad = [p for p in self.protocols if p not in ALL_PROTOCOLS]
        if bad:
            errs.append(f"unknown protocols {bad}")
        if self.workers < 1:
            errs.append("workers must be >= 1")
        return errs

    def full_scale(self) -> "SweepConfig":
        return replace(self, systems_per_point=FULL_SCALE)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["values"] = list(self.values)
        d["protocols"] = list(self.protocols)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        d = dict(d)
        if "base" in d:
            d["base"] = GenConfig.from_dict(d["base"])
        for key in ("values", "protocols"):
            if key in d:
                d[key] = tuple(d[key])
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown SweepConfig keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class SchedulabilityCurve:
    """Per-system verdicts of a sweep; fractions and exclusive counts are derived from them."""

    param: str
    protocols: tuple[str, ...]
    values: list
    verdicts: dict  # value -> bool array (systems x protocols)
    skipped: dict = field(default_factory=dict)  # value -> reason

    def count(self, value) -> int:
        return int(self.verdicts[value].shape[0])

    def _col(self, protocol: str) -> int:
        try:
            return self.protocols.index(protocol)
        except ValueError:
            raise KeyError(f"protocol {protocol!r} not in this curve") from None

    def schedulable(self, protocol: str, value) -> int:
        return int(self.verdicts[value][:, self._col(protocol)].sum())

    def fraction(self, protocol: str, value) -> float:
        n = self.count(value)
        return self.schedulable(protocol, value) / n if n else 0.0

    def points(self) -> list:
        return [v for v in self.values if v not in self.skipped]

    def series(self, protocol: str) -> list[tuple]:
        """(value, fraction, count) per evaluated point."""
        return [(v, self.fraction(protocol, v), self.count(v)) for v in self.points()]

    def exclusive(self, value, a: str = "msrpft", b: str = "leftrs") -> tuple[int, int]:
        """(# schedulable only by a, # schedulable only by b) at one point."""
        V = self.verdicts[value]
        A, B = V[:, self._col(a)], V[:, self._col(b)]
        return int((A & ~B).sum()), int((B & ~A).sum())

    def relative_improvement(self, a: str = "leftrs", b: str = "msrpft") -> float:
        """Mean over points of (frac_a - frac_b) / frac_b, in percent; points with frac_b = 0 are left out."""
        rel = [(self.fraction(a, v) - self.fraction(b, v)) / self.fraction(b, v)
               for v in self.points() if self.fraction(b, v) > 0]
        return 100.0 * float(np.mean(rel)) if rel else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "value", "protocol", "schedulable", "count", "fraction"])
        for v in self.points():
            for p in self.protocols:
                w.writerow([self.param, fmt_value(v), p, self.schedulable(p, v), self.count(v),
                            f"{self.fraction(p, v):.6f}"])
        return buf.getvalue()

    def exclusive_csv(self, a: str = "msrpft", b: str = "leftrs") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "value", "exclA", "exclB"])
        for v, ea, eb in exclusive_table(self, a, b):
            w.writerow([self.param, fmt_value(v), ea, eb])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "param": self.param,
            "points": [fmt_value(v) for v in self.points()],
            "skipped": {fmt_value(v): r for v, r in self.skipped.items()},
            "fractions": {p: [round(f, 6) for _, f, _ in self.series(p)] for p in self.protocols},
        }


def exclusive_table(curve: SchedulabilityCurve, a: str = "msrpft", b: str = "leftrs") -> list[tuple]:
    """Rows of (value, only-a, only-b), one per evaluated point."""
    return [(v, *curve.exclusive(v, a, b)) for v in curve.points()]


def _evaluate(job) -> tuple[bool, ...]:
    gen, protocols = job
    system = generate(gen)
    return tuple(analyze(system, p).schedulable for p in protocols)


def _run_jobs(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    chunk = max(1, len(jobs) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs, chunksize=chunk))


def sweep(cfg: SweepConfig) -> SchedulabilityCurve:
    """Generate ``systems_per_point`` systems per value and record each protocol's verdict."""
    errs = cfg.check()
    if errs:
        raise ValueError("invalid SweepConfig: " + "; ".join(errs))
    jobs, owners, skipped = [], [], {}
    for v in cfg.values:
        point = apply_param(cfg.base, cfg.param, v)
        bad = point.check()
        if bad:
            skipped[v] = "; ".join(bad)
            log.warning("skipping %s=%s: %s", cfg.param, v, skipped[v])
            continue
        for k in range(cfg.systems_per_point):
            jobs.append((replace(point, seed=derive_seed(cfg.seed, cfg.param, v, k)), cfg.protocols))
            owners.append(v)
    out = _run_jobs(_evaluate, jobs, cfg.workers)
    verdicts = {}
    for v in cfg.values:
        if v not in skipped:
            rows = [r for o, r in zip(owners, out) if o == v]
            verdicts[v] = np.array(rows, bool).reshape(len(rows), len(cfg.protocols))
    return SchedulabilityCurve(cfg.param, cfg.protocols, list(cfg.values), verdicts, skipped)


# -- soundness -------------------------------------------------------------------

SMALL_GEN = GenConfig(M=3, N=2, K=2, A=3, f_max=3, period_range=(1_000, 20_000))


@dataclass
class Violation:
    system_seed: int
    run_seed: int
    task: int
    observed: int
    bound: int


@dataclass
class ProbeCheck:
    system_seed: int
    task: int
    resource: int
    n: int
    m: int
    probe: int
    cap: int  # (n + m + 1) c


@dataclass
class SoundnessReport:
    systems: int = 0  # schedulable systems simulated
    candidates: int = 0  # systems generated to find them
    sims: int = 0
    violations: list[Violation] = field(default_factory=list)
    unfinished: int = 0  # jobs still running at the end of a run
    max_ratio: float = 0.0  # max observed response / R over all tasks
    probes: list[ProbeCheck] = field(default_factory=list)

    @property
    def probe_failures(self) -> list[ProbeCheck]:
        return [p for p in self.probes if p.probe > p.cap]

    @property
    def ok(self) -> bool:
        return not self.violations and not self.probe_failures and self.unfinished == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        d["probe_failures"] = len(self.probe_failures)
        return d


def _probe_system(system: SystemSpec, seed: int) -> list[ProbeCheck]:
    from .sim import ProbeBoundExceeded, worst_case_probe

    out = []
    for t in system.tasks:
        for x in sorted(t.used):
            m = len({u.core for u in system.users(x) if u.core != t.core})
            try:
                got = worst_case_probe(system, t.id, x)
            except ProbeBoundExceeded:
                continue
            c = system.resource(x).c
            out.append(ProbeCheck(seed, t.id, x, t.f + 1, m, got, (t.f + 1 + m + 1) * c))
    return out


def _sound_one(job) -> tuple:
    """Simulate one schedulable system under ``runs`` seeds; returns per-system findings."""
    from .sim import FaultSchedule, ReleasePattern, Simulator

    gen, runs, small = job
    system = generate(gen)
    res = response_time(system)
    if not res.schedulable:
        return None
    R = np.array([res.task(t.id).R for t in system.tasks], np.int64)
    sim = Simulator(system, "leftrs")
    viol, unfinished, ratio = [], 0, 0.0
    for s in range(runs):
        pattern = ReleasePattern("synchronous-periodic") if s == 0 else ReleasePattern("sporadic", s)
        worst, left = sim.max_response(pattern, FaultSchedule.randomized(s))
        unfinished += left
        for i in np.flatnonzero(worst > R):
            viol.append(Violation(gen.seed, s, int(i), int(worst[i]), int(R[i])))
        done = worst >= 0
        if done.any():
            ratio = max(ratio, float((worst[done] / np.maximum(R[done], 1)).max()))
    probes = _probe_system(system, gen.seed) if small else []
    return viol, unfinished, ratio, probes


def soundness_campaign(n_systems: int = 100, seeds_per_system: int = 100, small: bool = False, *,
                       base: GenConfig | None = None, seed: int = 0, max_candidates: int | None = None,
                       workers: int = 1) -> SoundnessReport:
    """Simulate schedulable generated systems and compare observed response times with R_i.

    Candidates are drawn with seeds ``derive_seed(seed, "sound", 0, k)`` until
    ``n_systems`` of them pass the LEFT-RS analysis (or ``max_candidates`` is
    hit). Run 0 uses synchronous periodic releases; run s > 0 uses sporadic
    releases and randomized faults seeded with s.
    """
    base = base or (SMALL_GEN if small else GenConfig())
    max_candidates = max_candidates or 50 * n_systems
    rep = SoundnessReport()
    k = 0
    batch = max(1, workers * 4)
    while rep.systems < n_systems and k < max_candidates:
        jobs = []
        for _ in range(min(batch, max_candidates - k)):
            jobs.append((replace(base, seed=derive_seed(seed, "sound", 0, k)), seeds_per_system, small))
            k += 1
        for out in _run_jobs(_sound_one, jobs, workers):
            rep.candidates += 1
            if out is None:
                continue
            if rep.systems >= n_systems:
                break
            viol, unfinished, ratio, probes = out
            rep.systems += 1
            rep.sims += seeds_per_system
            rep.violations.extend(viol)
            rep.unfinished += unfinished
            rep.max_ratio = max(rep.max_ratio, ratio)
            rep.probes.extend(probes)
    return rep


# -- output ----------------------------------------------------------------------


def plot(curve: SchedulabilityCurve, out_path: str | os.PathLike, title: str | None = None) -> Path:
    """Write an SVG of fraction vs parameter value (one series per protocol) and the CSV next to it."""
    if not curve.protocols:
        raise ValueError("curve has no protocols to plot")
    if not curve.points():
        raise ValueError("curve has no evaluated points")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_path)
    if out.suffix.lower() != ".svg":
        out = out.with_suffix(".svg")
    out.parent.mkdir(parents=True, exist_ok=True)
    plt.rcParams["svg.hashsalt"] = "leftrs"  # stable element ids across runs
    fig, ax = plt.subplots(figsize=(5, 3.5))
    xs = curve.points()
    for p in curve.protocols:
        ax.plot([float(v) for v in xs], [curve.fraction(p, v) for v in xs], marker="o", label=LABELS.get(p, p))
    ax.set_xticks([float(v) for v in xs])
    ax.set_xticklabels([fmt_value(v) for v in xs])
    ax.set_xlabel("N (M = 10)" if curve.param == "N" else ("L upper bound (us)" if curve.param == "L" else curve.param))
    ax.set_ylabel("schedulable fraction")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    out.with_suffix(".csv").write_text(curve.to_csv())
    return out


def write_outputs(curve: SchedulabilityCurve, out_dir: str | os.PathLike, stem: str | None = None) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or f"sweep_{curve.param}"
    a = out_dir / f"{stem}.csv"
    b = out_dir / f"{stem}_exclusive.csv"
    a.write_text(curve.to_csv())
    paths = [a]
    if "msrpft" in curve.protocols and "leftrs" in curve.protocols:
        b.write_text(curve.exclusive_csv())
        paths.append(b)
    return paths


def read_curve_csv(text: str) -> SchedulabilityCurve:
    """Rebuild fractions from a sweep CSV. Per-system verdicts are not stored, so only
    counts survive; the verdict matrix is synthesised with the right column sums."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty sweep CSV")
    param = rows[0]["param"]
    protocols: list[str] = []
    values: list = []
    counts: dict = {}
    for r in rows:
        v = _parse_value(r["value"])
        if r["protocol"] not in protocols:
            protocols.append(r["protocol"])
        if v not in values:
            values.append(v)
        counts[(v, r["protocol"])] = (int(r["schedulable"]), int(r["count"]))
    verdicts = {}
    for v in values:
        n = counts[(v, protocols[0])][1]
        V = np.zeros((n, len(protocols)), bool)
        for j, p in enumerate(protocols):
            V[: counts[(v, p)][0], j] = True
        verdicts[v] = V
    return SchedulabilityCurve(param, tuple(protocols), values, verdicts)


def _parse_value(s: str):
    try:
        return int(s)
    except ValueError:
        return float(s)


def sweep_all(params: Iterable[str] = tuple(AXES), **kw) -> dict[str, SchedulabilityCurve]:
    return {p: sweep(SweepConfig(param=p, **kw)) for p in params}
