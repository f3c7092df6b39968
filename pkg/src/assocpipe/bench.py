"""Per-stage speedup measurement over a fixed input."""
from __future__ import annotations

import io
import logging
import os
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from . import pipeline
from .config import ALL_STAGES, PipelineConfig
from .tablestore import open_store

log = logging.getLogger(__name__)


@dataclass
class SpeedupRow:
    stage: int
    workers: int
    seconds: float
    speedup: float
    efficiency: float


@dataclass
class SpeedupReport:
    rows: list[SpeedupRow] = field(default_factory=list)
    stages: tuple[int, ...] = ALL_STAGES
    worker_list: tuple[int, ...] = (1,)
    consistent: bool = True
    error: str | None = None

    def get(self, stage: int, workers: int) -> SpeedupRow:
        for r in self.rows:
            if r.stage == stage and r.workers == workers:
                return r
        raise KeyError((stage, workers))

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w") as f:
            f.write("stage,workers,seconds,speedup,efficiency\n")
            for r in self.rows:
                f.write(f"{r.stage},{r.workers},{r.seconds:.9g},{r.speedup:.9g},{r.efficiency:.9g}\n")

    def write_dat(self, path: str | os.PathLike) -> None:
        """gnuplot data: one line per worker count, one speedup column per stage.

        Plot with e.g. ``set logscale xy; plot for [i=2:7] 'bench.dat' u 1:i w lp``.
        """
        with open(path, "w") as f:
            f.write("# workers " + " ".join(f"s{s}_{pipeline.STAGE_NAMES[s]}" for s in self.stages) + "\n")
            for w in self.worker_list:
                vals = []
                for s in self.stages:
                    try:
                        vals.append(f"{self.get(s, w).speedup:.6f}")
                    except KeyError:
                        vals.append("?")
                f.write(f"{w} " + " ".join(vals) + "\n")

    def write_plot_script(self, path: str | os.PathLike, dat_name: str = "bench.dat") -> None:
        """gnuplot script drawing speedup against workers on log-log axes."""
        cols = ", ".join(f"'{dat_name}' u 1:{i + 2} w lp t '{s} {pipeline.STAGE_NAMES[s]}'"
                         for i, s in enumerate(self.stages))
        top = max(self.worker_list)
        with open(path, "w") as f:
            f.write("set logscale xy 2\nset xlabel 'workers'\nset ylabel 'speedup'\nset key left top\n")
            f.write(f"set xrange [1:{top}]\nset yrange [0.25:{top}]\n")
            f.write(f"plot x t 'linear' dt 2, {cols}\n")

    def table(self) -> str:
        lines = [f"{'stage':>5} {'workers':>7} {'seconds':>10} {'speedup':>8} {'eff':>6}"]
        for r in self.rows:
            lines.append(f"{r.stage:>5} {r.workers:>7} {r.seconds:>10.4f} {r.speedup:>8.3f} {r.efficiency:>6.3f}")
        return "\n".join(lines)


def dump_store(store_dir: str | os.PathLike, compact: bool = True) -> str:
    """Every table as ``# <name>`` followed by its cells in TSV form."""
    store = open_store(store_dir)
    out = io.StringIO()
    for name in store.tables():
        t = store.table(name)
        if compact:
            t.compact()
        out.write(f"# {name}\n")
        t.dump(out)
    return out.getvalue()


def bench(cfg: PipelineConfig, worker_list, scratch: str | os.PathLike | None = None,
          repeats: int = 1, keep: bool = False) -> SpeedupReport:
    """Run the full pipeline once per worker count on a fresh work tree.

    Each point starts from the same input and an empty store.  With
    ``repeats > 1`` the fastest time per stage is kept.  The store dump of
    every point is compared with the first one.
    """
    worker_list = tuple(worker_list)
    if not worker_list or worker_list[0] != 1:
        raise ValueError("worker_list must start at 1")
    scratch = Path(scratch) if scratch is not None else cfg.work_dir / "bench"
    stages = tuple(cfg.stages)
    report = SpeedupReport(stages=stages, worker_list=worker_list)
    base: dict[int, float] = {}
    reference = None
    for w in worker_list:
        best: dict[int, float] = {}
        for rep in range(repeats):
            root = scratch / f"w{w:03d}-r{rep}"
            shutil.rmtree(root, ignore_errors=True)
            point = cfg.with_(work_dir=root / "work", store_dir=root / "store", workers=w,
                              stages=tuple(range(1, stages[-1] + 1)))
            try:
                result = pipeline.run(point)
            except OSError as e:
                report.error = f"workers={w}: {e}"
                return report
            if not result.ok:
                report.error = f"workers={w}: {result.errors[0][2]}"
                return report
            for r in result.records:
                best[r.stage] = min(best.get(r.stage, float("inf")), r.seconds)
            if 6 in point.stages:
                dump = dump_store(point.store_dir)
                if reference is None:
                    reference = dump
                elif dump != reference:
                    report.consistent = False
            if not keep:
                shutil.rmtree(root, ignore_errors=True)
        for s in stages:
            t = best[s]
            if w == 1:
                base[s] = t
            speedup = base[s] / t
            report.rows.append(SpeedupRow(s, w, t, speedup, speedup / w))
        log.info("workers=%d done", w)
    return report
