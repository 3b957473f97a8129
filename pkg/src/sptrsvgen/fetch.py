"""Convenience downloader for SuiteSparse collection matrices.

Purely optional: every other entry point accepts local Matrix Market paths.
Downloads are cached, so a matrix is fetched over the network at most once.
"""

from __future__ import annotations

import os
import shutil
import tarfile
import tempfile
import urllib.error
import urllib.request

# group directories of matrices commonly used for triangular-solve benchmarks;
# anything else can be given explicitly as "Group/name"
KNOWN_GROUPS = {
    "lung2": "Norris",
    "torso1": "Norris",
    "torso2": "Norris",
    "torso3": "Norris",
}

_MIRRORS = (
    "https://suitesparse-collection-website.herokuapp.com/MM/{group}/{name}.tar.gz",
    "https://sparse.tamu.edu/MM/{group}/{name}.tar.gz",
)


class FetchError(RuntimeError):
    """Download failed; the message lists every URL that was attempted."""


def default_cache_dir():
    env = os.environ.get("SPTRSVGEN_CACHE")
    if env:
        return env
    return os.path.join(
        os.environ.get("XDG_CACHE_HOME", os.path.expanduser("~/.cache")), "sptrsvgen"
    )


def cached_path(name, cache_dir=None):
    """Where fetch_matrix would place (or already placed) the .mtx file."""
    base = name.split("/")[-1]
    return os.path.join(cache_dir or default_cache_dir(), f"{base}.mtx")


def fetch_matrix(name, cache_dir=None, timeout=60):
    """Download a matrix by name ("lung2") or "Group/name" and return its path.

    A cached copy short-circuits the network entirely. The archive's .mtx is
    extracted, sanity-checked for a Matrix Market header, and cached.
    """
    if "/" in name:
        group, base = name.split("/", 1)
    else:
        base = name
        group = KNOWN_GROUPS.get(base)
    target = cached_path(base, cache_dir)
    if os.path.exists(target):
        return target
    if group is None:
        raise FetchError(
            f"unknown matrix {name!r}: give it as 'Group/name' "
            f"(known short names: {', '.join(sorted(KNOWN_GROUPS))})"
        )

    os.makedirs(os.path.dirname(target), exist_ok=True)
    attempted = []
    last_err = None
    for pattern in _MIRRORS:
        url = pattern.format(group=group, name=base)
        attempted.append(url)
        try:
            _download_and_extract(url, base, target, timeout)
            return target
        except (urllib.error.URLError, OSError, tarfile.TarError) as err:
            last_err = err
    raise FetchError(
        f"could not fetch {name!r}; attempted: {', '.join(attempted)} "
        f"(last error: {last_err})"
    )


def _download_and_extract(url, base, target, timeout):
    with tempfile.TemporaryDirectory() as tmp:
        archive = os.path.join(tmp, f"{base}.tar.gz")
        with urllib.request.urlopen(url, timeout=timeout) as resp, open(archive, "wb") as out:
            shutil.copyfileobj(resp, out)
        wanted = f"{base}.mtx"
        with tarfile.open(archive, "r:gz") as tar:
            member = next(
                (m for m in tar.getmembers() if m.isfile() and os.path.basename(m.name) == wanted),
                None,
            )
            if member is None:
                raise FetchError(f"archive at {url} does not contain {wanted}")
            src = tar.extractfile(member)
            staged = os.path.join(tmp, wanted)
            with open(staged, "wb") as out:
                shutil.copyfileobj(src, out)
        with open(staged, "rb") as fh:
            head = fh.read(len(b"%%MatrixMarket"))
        if head != b"%%MatrixMarket" or os.path.getsize(staged) == 0:
            raise FetchError(f"{url} did not yield a Matrix Market file")
        shutil.move(staged, target)
