import shutil
from datetime import timedelta, timezone

import pytest

from assocpipe import assoc, pipeline
from assocpipe.bench import dump_store
from assocpipe.config import ConfigError, PipelineConfig, parse_stages, parse_zone, read_config_file
from assocpipe.packets import (
    FIELD_NAMES,
    GenConfig,
    build_frame,
    dataset_truth,
    generate_dataset,
    gzip_compress,
    read_pcap,
    read_tsv,
    write_pcap,
    RawPacket,
)
from assocpipe.pipeline import FileTask
from assocpipe.tablestore import open_edge_schema, open_store

import oracles

EDT = timezone(timedelta(hours=-4), "EDT")


def make_cfg(tmp, packets=3000, files=2, split=32 * 1024, workers=1, seed=1, **kw):
    data = tmp / "data"
    generate_dataset(data / "synthetic", GenConfig(packet_count=packets, seed=seed), files)
    return PipelineConfig(data_dir=data, work_dir=tmp / "work", split_size=split, workers=workers, **kw)


@pytest.fixture(scope="module")
def done(tmp_path_factory):
    cfg = make_cfg(tmp_path_factory.mktemp("run"), workers=2)
    report = pipeline.run(cfg)
    assert report.ok, report.errors
    return cfg, report


# -- config --------------------------------------------------------------------------

def test_config_validation(tmp_path):
    assert PipelineConfig().split_size == 5 * 1024 * 1024
    for bad in (dict(split_size=0), dict(workers=0), dict(stages=(1, 3)), dict(stages=(7,)), dict(stages=())):
        with pytest.raises(ConfigError):
            PipelineConfig(**bad)
    assert parse_stages("2-4") == (2, 3, 4)
    assert parse_stages("1,2") == (1, 2)
    assert PipelineConfig(work_dir=tmp_path).store_dir == tmp_path / "store"


def test_time_zone_setting():
    assert parse_zone("EDT-04:00").utcoffset(None) == timedelta(hours=-4)
    assert parse_zone("EDT-04:00").tzname(None) == "EDT"
    assert PipelineConfig(time_zone="America/New_York").tz.key == "America/New_York"
    with pytest.raises(ConfigError):
        PipelineConfig(time_zone="Nowhere/Else")


def test_config_file(tmp_path):
    p = tmp_path / "c.conf"
    p.write_text("# comment\nworkers = 3\nsplit_size = 1024\nstages = 2-5\n\ndomain=x  # trailing\n")
    cfg = PipelineConfig.from_mapping(read_config_file(p))
    assert (cfg.workers, cfg.split_size, cfg.stages, cfg.domain) == (3, 1024, (2, 3, 4, 5), "x")
    with pytest.raises(ConfigError):
        PipelineConfig.from_mapping({"bogus": "1"})


# -- single stages -------------------------------------------------------------------

def test_step1_uncompress_is_idempotent(tmp_path):
    cfg = make_cfg(tmp_path, packets=500, files=1)
    cfg.domain_dir.mkdir(parents=True)
    (task,) = pipeline.stage_tasks(1, cfg)
    res = pipeline.step1_uncompress(task)
    assert len(list(read_pcap(task.output))) == 500
    assert task.input.exists() and res.bytes_out > res.bytes_in
    mtime = task.output.stat().st_mtime_ns
    pipeline.step1_uncompress(task)
    assert task.output.stat().st_mtime_ns == mtime


def test_step2_split_counts(tmp_path):
    cfg = make_cfg(tmp_path, packets=20_000, files=1)
    pipeline.run(cfg.with_(stages=(1,)))
    (task,) = pipeline.stage_tasks(2, cfg)
    size = task.input.stat().st_size
    pipeline.step2_split(task, size // 5)
    outs = sorted(task.output.glob("cap000.pcap.*"))
    assert 5 <= len(outs) <= 6
    assert [p for o in outs for p in read_pcap(o)] == list(read_pcap(task.input))
    pipeline.step2_split(task, size * 2)
    assert [o.name for o in task.output.glob("cap000.pcap.*")] == ["cap000.pcap.0000"]


def sample_capture(tmp_path):
    data, wire = build_frame("133.40.77.44", "63.237.205.194", 6, 1500, sport=80, dport=55428, flags=0x10)
    d = tmp_path / "cap" / "cap"
    d.mkdir(parents=True)
    write_pcap(tmp_path / "cap" / "cap.pcap", [RawPacket(1491997776, 188280, data, wire)])
    shutil.copy(tmp_path / "cap" / "cap.pcap", d / "cap.pcap.0000")
    return d / "cap.pcap.0000", tmp_path / "cap" / "cap.pcap"


def test_step3_to_step5_sample_row(tmp_path, sample_header):
    split, original = sample_capture(tmp_path)
    tsv = split.with_name(split.name + ".tsv")
    pipeline.step3_parse(FileTask(3, split, tsv, "cap", split.name), original, EDT)
    header, rows = read_tsv(tsv)
    assert header == list(FIELD_NAMES) and len(rows) == 1
    assert dict(zip(header, rows[0])) == dict(sample_header)

    a_bin = tsv.with_name(tsv.name + ".A.bin")
    pipeline.step4_sort(FileTask(4, tsv, a_bin, "cap", split.name))
    A = assoc.load(a_bin)
    assert A.row_keys == ["0000001.cap.pcap.0000.A.mat"]
    assert A.get("0000001.cap.pcap.0000.A.mat", "frame.time") == "2017-04-12 07:49:36.18828"

    e_bin = a_bin.with_name(a_bin.name + ".E.bin")
    pipeline.step5_sparse(FileTask(5, a_bin, e_bin, "cap", split.name))
    E = assoc.load(e_bin)
    expect = {f"{f}|{'2017-04-12 07:49:36.18828' if f == 'frame.time' else v}" for f, v in sample_header}
    assert set(E.col_keys) == expect and E.nnz == 9


def test_empty_split_gives_empty_arrays(tmp_path):
    d = tmp_path / "cap"
    d.mkdir()
    write_pcap(tmp_path / "cap.pcap", [])
    shutil.copy(tmp_path / "cap.pcap", d / "cap.pcap.0000")
    s = d / "cap.pcap.0000"
    pipeline.step3_parse(FileTask(3, s, d / "cap.pcap.0000.tsv", "cap", s.name), tmp_path / "cap.pcap")
    assert read_tsv(d / "cap.pcap.0000.tsv")[1] == []
    pipeline.step4_sort(FileTask(4, d / "cap.pcap.0000.tsv", d / "a.bin", "cap", s.name))
    pipeline.step5_sparse(FileTask(5, d / "a.bin", d / "e.bin", "cap", s.name))
    assert assoc.load(d / "e.bin").is_empty()


def test_step6_single_entry(tmp_path):
    E = assoc.from_triples(["p1"], ["ip.src|1.1.1.1"], [1])
    assoc.save(E, tmp_path / "e.bin")
    pipeline.step6_ingest(FileTask(6, tmp_path / "e.bin", tmp_path, "f", "s"), tmp_path / "store")
    _, tedge, tedge_t, deg = open_edge_schema(tmp_path / "store")
    assert [tuple(c) for c in tedge.scan_row("p1")] == [("p1", "ip.src|1.1.1.1", "1")]
    assert [tuple(c) for c in tedge_t.scan_all()] == [("ip.src|1.1.1.1", "p1", "1")]
    assert deg.scan_row("ip.src|1.1.1.1")[0].val == "1"
    # retry of the same task must not double the degree
    pipeline.step6_ingest(FileTask(6, tmp_path / "e.bin", tmp_path, "f", "s"), tmp_path / "store")
    assert deg.scan_row("ip.src|1.1.1.1")[0].val == "1"
    E2 = assoc.from_triples(["p2", "p3"], ["ip.src|1.1.1.1"] * 2, [1, 1])
    assoc.save(E2, tmp_path / "e2.bin")
    pipeline.step6_ingest(FileTask(6, tmp_path / "e2.bin", tmp_path, "g", "s"), tmp_path / "store")
    assert deg.scan_row("ip.src|1.1.1.1")[0].val == "3"


# -- whole runs ------------------------------------------------------------------------

def test_full_run_matches_truth(done):
    cfg, report = done
    assert [r.stage for r in report.records] == [1, 2, 3, 4, 5, 6]
    assert all(r.seconds > 0 for r in report.records)
    store, tedge, _, deg = open_edge_schema(cfg.store_dir)
    got = {c.row: c.val for c in deg.scan_all()}
    assert got == oracles.expected_degrees(dataset_truth(cfg.input_dir))
    n_edges = sum(len(cols) for _, cols in oracles.exploded_tsv_rows(cfg.domain_dir))
    assert tedge.count() == n_edges == sum(dataset_truth(cfg.input_dir).values())


def test_nnz_preserved_sparse(done):
    cfg, _ = done
    for t in pipeline.stage_tasks(5, cfg):
        assert assoc.load(t.input).nnz == assoc.load(t.output).nnz


def test_layout(done):
    cfg, _ = done
    d = cfg.domain_dir
    assert (d / "cap000.pcap").exists()
    assert (d / "cap000" / "cap000.pcap.0000.tsv.A.bin.E.bin").exists()
    assert len(pipeline.e_files(cfg)) == len(pipeline.stage_tasks(3, cfg)) > 2


def test_rerun_is_idempotent(done, tmp_path):
    cfg, _ = done
    before = dump_store(cfg.store_dir)
    again = pipeline.run(cfg.with_(stages=(3, 4, 5, 6)))
    assert again.ok
    assert dump_store(cfg.store_dir) == before


def test_worker_invariance(done, tmp_path):
    cfg, _ = done
    one = pipeline.run(cfg.with_(work_dir=tmp_path / "w1", workers=1))
    four = pipeline.run(cfg.with_(work_dir=tmp_path / "w4", workers=4))
    assert one.ok and four.ok
    assert dump_store(tmp_path / "w1" / "store") == dump_store(tmp_path / "w4" / "store") == dump_store(cfg.store_dir)


def test_stage_one_only(tmp_path):
    cfg = make_cfg(tmp_path, packets=300, files=2)
    report = pipeline.run(cfg.with_(stages=(1,)))
    assert [r.stage for r in report.records] == [1]
    assert sorted(p.name for p in cfg.domain_dir.iterdir()) == ["cap000.pcap", "cap001.pcap"]
    assert not cfg.store_dir.exists()


def test_failure_gives_partial_report(tmp_path):
    cfg = make_cfg(tmp_path, packets=300, files=2, workers=2)
    bad = cfg.input_dir / "cap001.pcap.gz"
    bad.write_bytes(bad.read_bytes()[:-8])
    report = pipeline.run(cfg)
    assert not report.ok
    assert [r.stage for r in report.records] == [1]
    assert report.errors[0][0] == 1 and "cap001" in report.errors[0][1]


def test_skip_counter_reaches_report(tmp_path):
    data, wire = build_frame("10.0.0.1", "10.0.0.2", 6, 60, 1, 2)
    pkts = [RawPacket(1, 0, data, wire), RawPacket(2, 0, data[:30], wire)]
    (tmp_path / "data" / "synthetic").mkdir(parents=True)
    write_pcap(tmp_path / "raw.pcap", pkts)
    gzip_compress(tmp_path / "raw.pcap", tmp_path / "data" / "synthetic" / "x.pcap.gz")
    cfg = PipelineConfig(data_dir=tmp_path / "data", work_dir=tmp_path / "work")
    report = pipeline.run(cfg)
    assert report.ok
    rec3 = [r for r in report.records if r.stage == 3][0]
    assert rec3.skipped == 1


def test_timing_csv(done, tmp_path):
    _, report = done
    report.write_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "stage,workers,seconds,bytes_in,bytes_out,files"
    assert len(lines) == 7
