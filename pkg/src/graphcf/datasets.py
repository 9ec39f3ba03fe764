"""Obtain the MovieLens 100K ``u.data`` ratings file.

GroupLens is tried first. When it is unreachable the ratings are pulled
from the ``pytorch-widedeep`` wheel on PyPI, which ships the same 100,000
rows (in file order) as a parquet table; reading that needs pandas and
pyarrow.

    python -m graphcf.datasets data/ml-100k
"""

from __future__ import annotations

import hashlib
import io
import logging
import os
import re
import sys
import urllib.parse
import urllib.request
import zipfile
from pathlib import Path

log = logging.getLogger(__name__)

GROUPLENS_URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
WHEEL_PROJECT = "pytorch-widedeep"
WHEEL_VERSION = "1.7.0"
WHEEL_INDEX = os.environ.get("PIP_INDEX_URL", "https://pypi.org/simple").rstrip("/")
WHEEL_MEMBER = "pytorch_widedeep/datasets/data/MovieLens100k_data.parquet.brotli"
N_RATINGS = 100_000

DEFAULT_DIR = Path(os.environ.get("GRAPHCF_DATA", Path(__file__).resolve().parents[2] / "data" / "ml-100k"))


def _download(url, timeout=60) -> bytes:
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.read()


def _from_grouplens() -> bytes:
    blob = _download(GROUPLENS_URL)
    with zipfile.ZipFile(io.BytesIO(blob)) as zf:
        return zf.read("ml-100k/u.data")


def _from_wheel() -> bytes:
    import pandas as pd

    page_url = f"{WHEEL_INDEX}/{WHEEL_PROJECT}/"
    page = _download(page_url).decode()
    wheel = f"pytorch_widedeep-{WHEEL_VERSION}-py3-none-any.whl"
    m = re.search(r'href="([^"]*' + re.escape(wheel) + r')#sha256=([0-9a-f]+)"', page)
    if m is None:
        raise RuntimeError(f"{wheel} not listed at {page_url}")
    blob = _download(urllib.parse.urljoin(page_url, m.group(1)), timeout=300)
    if hashlib.sha256(blob).hexdigest() != m.group(2):
        raise RuntimeError(f"sha256 mismatch for {wheel}")
    with zipfile.ZipFile(io.BytesIO(blob)) as zf:
        df = pd.read_parquet(io.BytesIO(zf.read(WHEEL_MEMBER)))
    lines = (f"{u}\t{i}\t{r}\t{t}\n" for u, i, r, t in
             df[["user_id", "movie_id", "rating", "timestamp"]].itertuples(index=False))
    return "".join(lines).encode()


def fetch_movielens_100k(dest=DEFAULT_DIR) -> Path:
    """Ensure ``dest/u.data`` exists and return its path."""
    dest = Path(dest)
    target = dest / "u.data"
    if target.exists():
        return target
    dest.mkdir(parents=True, exist_ok=True)
    data = None
    for source in (_from_grouplens, _from_wheel):
        try:
            data = source()
            break
        except Exception as exc:  # network errors come in many types
            log.warning("%s failed: %s", source.__name__, exc)
    if data is None:
        raise RuntimeError("could not obtain MovieLens 100K from any source")
    n = data.count(b"\n")
    if n != N_RATINGS:
        raise RuntimeError(f"expected {N_RATINGS} ratings, got {n}")
    tmp = target.with_suffix(".tmp")
    tmp.write_bytes(data)
    tmp.replace(target)
    return target


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    print(fetch_movielens_100k(sys.argv[1] if len(sys.argv) > 1 else DEFAULT_DIR))
