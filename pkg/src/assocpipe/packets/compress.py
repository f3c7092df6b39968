"""gzip wrappers that keep the original file, like ``gzip -k`` / ``gunzip -k``."""
from __future__ import annotations

import gzip
import os
import shutil
import zlib
from pathlib import Path


class IntegrityError(ValueError):
    """Compressed input is corrupt (bad magic, CRC or length, or truncated)."""


def gzip_compress(path: str | os.PathLike, dest: str | os.PathLike | None = None, level: int = 6) -> Path:
    """Compress ``path`` to ``path + '.gz'``.

    The gzip mtime field is zeroed so output bytes depend only on content.
    """
    path = Path(path)
    dest = Path(dest) if dest is not None else path.with_name(path.name + ".gz")
    tmp = dest.with_name(dest.name + ".tmp")
    with open(path, "rb") as src, open(tmp, "wb") as raw:
        with gzip.GzipFile(filename="", mode="wb", fileobj=raw, compresslevel=level, mtime=0) as z:
            shutil.copyfileobj(src, z, 1 << 20)
    os.replace(tmp, dest)
    return dest


def gzip_uncompress(path: str | os.PathLike, dest: str | os.PathLike | None = None) -> Path:
    path = Path(path)
    if dest is None:
        if path.suffix != ".gz":
            raise ValueError(f"{path} does not end in .gz; pass dest explicitly")
        dest = path.with_suffix("")
    dest = Path(dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    tmp = dest.with_name(dest.name + ".tmp")
    try:
        with gzip.open(path, "rb") as z, open(tmp, "wb") as out:
            shutil.copyfileobj(z, out, 1 << 20)
    except (OSError, EOFError, zlib.error) as e:
        tmp.unlink(missing_ok=True)
        if isinstance(e, FileNotFoundError):
            raise
        raise IntegrityError(f"{path}: {e}") from e
    os.replace(tmp, dest)
    return dest
