"""The six-stage capture processing pipeline.

uncompress -> split -> parse -> sort -> sparse -> ingest.  Each stage is one
function taking a :class:`FileTask`; :func:`run` enumerates the tasks of each
stage from the work tree, hands them round-robin to ``workers`` processes and
waits for the whole stage before starting the next.

Work-tree layout (``<d>`` is ``<work_dir>/<domain>``)::

    <data_dir>/<domain>/<f>.pcap.gz       input
    <d>/<f>.pcap                          stage 1
    <d>/<f>/<f>.pcap.NNNN                 stage 2
    <d>/<f>/<f>.pcap.NNNN.tsv             stage 3
    <d>/<f>/<f>.pcap.NNNN.tsv.A.bin       stage 4
    <d>/<f>/<f>.pcap.NNNN.tsv.A.bin.E.bin stage 5
    <store_dir>/{Tedge,TedgeT,TedgeDeg}   stage 6
"""
from __future__ import annotations

import csv
import logging
import multiprocessing
import os
import re
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import timezone, tzinfo
from pathlib import Path

from . import assoc
from .assoc import AssociativeArray, cat_str, find, from_triples, put_col, put_row, select, transpose, val2col
from .config import PipelineConfig
from .packets import (
    first_timestamp_us,
    gzip_uncompress,
    parse_packets,
    read_pcap,
    read_tsv,
    sortable_time,
    split_pcap,
    write_tsv,
)
from .tablestore import open_edge_schema

log = logging.getLogger(__name__)

STAGE_NAMES = {1: "uncompress", 2: "split", 3: "parse", 4: "sort", 5: "sparse", 6: "ingest"}
SPLIT_RE = re.compile(r"\.pcap\.\d+$")
ROW_DIGITS = 7
SEP = "|"


@dataclass(frozen=True)
class FileTask:
    stage: int
    input: Path
    output: Path
    file_id: str
    split_id: str = ""

    @property
    def task_id(self) -> str:
        return f"{self.file_id}/{self.split_id}" if self.split_id else self.file_id


@dataclass
class TaskResult:
    bytes_in: int = 0
    bytes_out: int = 0
    skipped: int = 0
    error: str | None = None
    task: str = ""


@dataclass
class TimingRecord:
    stage: int
    workers: int
    seconds: float
    bytes_in: int = 0
    bytes_out: int = 0
    files: int = 0
    skipped: int = 0


@dataclass
class PipelineReport:
    records: list[TimingRecord] = field(default_factory=list)
    errors: list[tuple[int, str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def seconds(self, stage: int) -> float:
        return sum(r.seconds for r in self.records if r.stage == stage)

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["stage", "workers", "seconds", "bytes_in", "bytes_out", "files"])
            for r in self.records:
                w.writerow([r.stage, r.workers, f"{r.seconds:.9g}", r.bytes_in, r.bytes_out, r.files])


def _size(p: Path) -> int:
    try:
        return p.stat().st_size
    except FileNotFoundError:
        return 0


# -- stage bodies -----------------------------------------------------------

def step1_uncompress(task: FileTask) -> TaskResult:
    """Uncompress one ``.pcap.gz``, keeping the original (``gunzip -k``).

    Skips work when the output already exists; outputs are written atomically
    so an existing file is always complete.
    """
    if not task.output.exists():
        gzip_uncompress(task.input, task.output)
    return TaskResult(_size(task.input), _size(task.output))


def step2_split(task: FileTask, split_size: int) -> TaskResult:
    """Split one capture into ``<f>/<f>.pcap.NNNN`` files of ~``split_size`` bytes.

    Earlier splits of the same capture (and anything derived from them) are
    removed first so a re-run reproduces the same file set.
    """
    task.output.mkdir(parents=True, exist_ok=True)
    for old in task.output.glob(f"{task.file_id}.pcap.*"):
        old.unlink()
    outs = split_pcap(task.input, split_size, task.output)
    return TaskResult(_size(task.input), sum(_size(p) for p in outs))


def step3_parse(task: FileTask, original: Path, tz: tzinfo = timezone.utc) -> TaskResult:
    """Extract the nine header fields of every packet into a TSV file.

    ``frame.time_relative`` is measured from the first packet of the original
    (unsplit) capture; ``frame.time`` is rendered in ``tz``.  Malformed packets
    are skipped and counted.
    """
    t0 = first_timestamp_us(original)
    records, skipped = parse_packets(read_pcap(task.input), t0, tz)
    write_tsv(records, task.output)
    return TaskResult(_size(task.input), _size(task.output), skipped)


def tsv_to_assoc(header: list[str], rows: list[list[str]]) -> AssociativeArray:
    """Dense string array from TSV rows; row keys are zero-padded ordinals from 1."""
    r, c, v = [], [], []
    for i, row in enumerate(rows, 1):
        key = f"{i:0{ROW_DIGITS}d}"
        for name, val in zip(header, row):
            if val:
                r.append(key)
                c.append(name)
                v.append(val)
    return from_triples(r, c, v)


def step4_sort(task: FileTask) -> TaskResult:
    """TSV -> dense sorted associative array with sortable times and global row keys.

    The ``frame.time`` column is rewritten by removing it and adding the
    replacement (``A = (A - At) + At``); rows are then renamed to
    ``<ordinal>.<split file>.A.mat``.
    """
    header, rows = read_tsv(task.input)
    A = tsv_to_assoc(header, rows)
    r, _, v = find(select(A, None, ["frame.time"]))
    At = from_triples(r, "frame.time", [sortable_time(x) for x in v])
    A = (A - At) + At
    A = put_row(A, cat_str(A.row_keys, ".", task.split_id + ".A.mat"))
    assoc.save(A, task.output)
    return TaskResult(_size(task.input), _size(task.output))


def step5_sparse(task: FileTask) -> TaskResult:
    """Dense array -> incidence matrix E via ``val2col(A, '|')``."""
    E = val2col(assoc.load(task.input), SEP)
    assoc.save(E, task.output)
    return TaskResult(_size(task.input), _size(task.output))


def step6_ingest(task: FileTask, store_dir: Path) -> TaskResult:
    """Insert E into Tedge/TedgeT and its column sums into TedgeDeg.

    Edge puts are idempotent overwrites; the degree batch carries the task id
    as a marker so a retried task never double-counts.
    """
    E = assoc.load(task.input)
    _, tedge, tedge_t, tedge_deg = open_edge_schema(store_dir)
    tedge.put_array(E, "1")
    tedge.flush()
    tedge_t.put_array(transpose(E), "1")
    tedge_t.flush()
    Edeg = put_col(assoc.sum(transpose(E), 2), ["degree"])
    tedge_deg.put_array(Edeg, marker=task.task_id)
    return TaskResult(_size(task.input), 0)


# -- task enumeration --------------------------------------------------------

def _splits(cfg: PipelineConfig, suffix: str) -> list[tuple[Path, str, str]]:
    out = []
    if not cfg.domain_dir.is_dir():
        return out
    for d in sorted(p for p in cfg.domain_dir.iterdir() if p.is_dir()):
        for p in sorted(d.glob(f"{d.name}.pcap.*{suffix}")):
            split = p.name[: len(p.name) - len(suffix)] if suffix else p.name
            if SPLIT_RE.search(split):
                out.append((p, d.name, split))
    return out


def stage_tasks(stage: int, cfg: PipelineConfig) -> list[FileTask]:
    """Enumerate the tasks of ``stage`` from what exists on disk now."""
    dd = cfg.domain_dir
    if stage == 1:
        return [FileTask(1, p, dd / p.name[:-3], p.name[:-len(".pcap.gz")])
                for p in sorted(cfg.input_dir.glob("*.pcap.gz"))]
    if stage == 2:
        return [FileTask(2, p, dd / p.name[:-5], p.name[:-5]) for p in sorted(dd.glob("*.pcap"))]
    suffix_in = {3: "", 4: ".tsv", 5: ".tsv.A.bin", 6: ".tsv.A.bin.E.bin"}[stage]
    suffix_out = {3: ".tsv", 4: ".tsv.A.bin", 5: ".tsv.A.bin.E.bin", 6: ""}[stage]
    return [FileTask(stage, p, p.parent / (split + suffix_out), fid, split)
            for p, fid, split in _splits(cfg, suffix_in)]


def execute(task: FileTask, cfg: PipelineConfig) -> TaskResult:
    s = task.stage
    if s == 1:
        return step1_uncompress(task)
    if s == 2:
        return step2_split(task, cfg.split_size)
    if s == 3:
        return step3_parse(task, cfg.domain_dir / f"{task.file_id}.pcap", cfg.tz)
    if s == 4:
        return step4_sort(task)
    if s == 5:
        return step5_sparse(task)
    return step6_ingest(task, cfg.store_dir)


def _run_chunk(tasks: list[FileTask], cfg: PipelineConfig) -> list[TaskResult]:
    results = []
    for t in tasks:
        try:
            res = execute(t, cfg)
        except Exception as e:  # reported per task; the stage barrier decides
            res = TaskResult(error=f"{type(e).__name__}: {e}\n{traceback.format_exc()}")
        res.task = str(t.input)
        results.append(res)
    return results


def run_stage(stage: int, cfg: PipelineConfig, pool: ProcessPoolExecutor | None) -> tuple[TimingRecord, list[TaskResult]]:
    """Run every task of one stage and time it, I/O included."""
    start = time.perf_counter()
    tasks = stage_tasks(stage, cfg)
    if pool is None or len(tasks) <= 1:
        results = _run_chunk(tasks, cfg)
    else:
        chunks = [tasks[w::cfg.workers] for w in range(cfg.workers)]
        futures = [pool.submit(_run_chunk, c, cfg) for c in chunks if c]
        results = [r for f in futures for r in f.result()]
    seconds = time.perf_counter() - start
    rec = TimingRecord(stage, cfg.workers, max(seconds, 1e-9),
                       sum(r.bytes_in for r in results), sum(r.bytes_out for r in results),
                       len(tasks), sum(r.skipped for r in results))
    return rec, results


def _pool(workers: int) -> ProcessPoolExecutor | None:
    if workers <= 1:
        return None
    methods = multiprocessing.get_all_start_methods()
    ctx = multiprocessing.get_context("fork" if "fork" in methods else None)
    return ProcessPoolExecutor(max_workers=workers, mp_context=ctx)


def run(cfg: PipelineConfig) -> PipelineReport:
    """Run the configured stages in order with a barrier between stages.

    A failing task lets the rest of its stage finish, then stops the run; the
    report then holds the records so far plus the errors.
    """
    cfg.domain_dir.mkdir(parents=True, exist_ok=True)
    report = PipelineReport()
    pool = _pool(cfg.workers)
    try:
        for stage in cfg.stages:
            rec, results = run_stage(stage, cfg, pool)
            report.records.append(rec)
            log.info("stage %d (%s): %d files in %.3fs", stage, STAGE_NAMES[stage], rec.files, rec.seconds)
            if stage == 1 and rec.bytes_in:
                log.info("uncompress expansion ratio %.2f", rec.bytes_out / rec.bytes_in)
            for r in results:
                if r.error:
                    report.errors.append((stage, r.task, r.error))
            if report.errors:
                log.error("stage %d had %d failed tasks; stopping", stage, len(report.errors))
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return report


def e_files(cfg: PipelineConfig) -> list[Path]:
    return [t.input for t in stage_tasks(6, cfg)]
