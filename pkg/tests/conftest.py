import os
import shutil
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))  # make helpers importable

_SRC = os.path.join(os.path.dirname(os.path.dirname(__file__)), "src")
try:
    import sptrsvgen  # noqa: F401
except ImportError:  # running from a checkout without an editable install
    sys.path.insert(0, _SRC)


@pytest.fixture(scope="session")
def cc():
    """Path to a C compiler, or skip."""
    compiler = shutil.which(os.environ.get("CC", "cc")) or shutil.which("gcc")
    if compiler is None:
        pytest.skip("no C compiler available")
    return compiler


@pytest.fixture(scope="session")
def lung2():
    """The lung2 lower-triangular system, fetched from SuiteSparse (cached).

    Skips when the collection is unreachable and no cached copy exists; all
    other tests are network-free.
    """
    from sptrsvgen import load_lower_system
    from sptrsvgen.fetch import FetchError, fetch_matrix

    try:
        path = fetch_matrix("lung2")
    except FetchError as err:
        pytest.skip(f"lung2 unavailable: {err}")
    return load_lower_system(path)
