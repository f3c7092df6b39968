"""Pipeline configuration and the ``key = value`` config-file reader."""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field, fields, replace
from datetime import timedelta, timezone, tzinfo
from pathlib import Path
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

DEFAULT_SPLIT_SIZE = 5 * 1024 * 1024
ALL_STAGES = (1, 2, 3, 4, 5, 6)
WORK_DIR_ENV = "ASSOCPIPE_WORK_DIR"


class ConfigError(ValueError):
    pass


def default_work_dir() -> Path:
    return Path(os.environ.get(WORK_DIR_ENV, "work"))


@dataclass(frozen=True)
class PipelineConfig:
    data_dir: Path = Path("data")
    work_dir: Path = field(default_factory=default_work_dir)
    store_dir: Path | None = None
    domain: str = "synthetic"
    split_size: int = DEFAULT_SPLIT_SIZE
    workers: int = 1
    stages: tuple[int, ...] = ALL_STAGES
    seed: int = 0
    time_zone: str = "UTC"

    def __post_init__(self):
        object.__setattr__(self, "data_dir", Path(self.data_dir))
        object.__setattr__(self, "work_dir", Path(self.work_dir))
        if self.store_dir is None:
            object.__setattr__(self, "store_dir", self.work_dir / "store")
        else:
            object.__setattr__(self, "store_dir", Path(self.store_dir))
        stages = tuple(sorted(set(self.stages)))
        object.__setattr__(self, "stages", stages)
        if self.split_size <= 0:
            raise ConfigError("split_size must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not stages or stages[0] < 1 or stages[-1] > 6:
            raise ConfigError(f"stages must be a non-empty subset of 1..6, got {stages}")
        if stages != tuple(range(stages[0], stages[-1] + 1)):
            raise ConfigError(f"stages must be contiguous, got {stages}")
        parse_zone(self.time_zone)

    @property
    def tz(self) -> tzinfo:
        return parse_zone(self.time_zone)

    @property
    def input_dir(self) -> Path:
        return self.data_dir / self.domain

    @property
    def domain_dir(self) -> Path:
        return self.work_dir / self.domain

    def with_(self, **changes) -> "PipelineConfig":
        """Copy with ``changes``; a store dir derived from the work dir follows it."""
        if "work_dir" in changes and "store_dir" not in changes and self.store_dir == self.work_dir / "store":
            changes["store_dir"] = None
        return replace(self, **changes)

    @classmethod
    def from_mapping(cls, values: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for k, v in values.items():
            k = k.replace("-", "_")
            if k not in known:
                raise ConfigError(f"unknown config key {k!r}")
            kwargs[k] = _coerce(k, v)
        return cls(**kwargs)


def parse_stages(text: str) -> tuple[int, ...]:
    """``"1-6"``, ``"3"``, ``"2,3,4"`` -> tuple of ints."""
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return tuple(out)


_OFFSET_RE = re.compile(r"([A-Za-z]+)([+-])(\d\d):(\d\d)$")


def parse_zone(text: str) -> tzinfo:
    """``"UTC"``, an IANA name such as ``"America/New_York"``, or ``"EDT-04:00"``."""
    if text == "UTC":
        return timezone.utc
    m = _OFFSET_RE.match(text)
    if m:
        name, sign, hh, mm = m.groups()
        off = timedelta(hours=int(hh), minutes=int(mm))
        return timezone(-off if sign == "-" else off, name)
    try:
        return ZoneInfo(text)
    except (ZoneInfoNotFoundError, ValueError) as e:
        raise ConfigError(f"unknown time zone {text!r}") from e


def _coerce(key: str, v):
    if not isinstance(v, str):
        return v
    try:
        if key in ("split_size", "workers", "seed"):
            return int(v)
        if key == "stages":
            return parse_stages(v)
    except ValueError as e:
        raise ConfigError(f"bad value for {key}: {v!r}") from e
    return v


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out
