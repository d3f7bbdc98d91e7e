import shutil
import subprocess
import sys

import pytest


def engine_cli(*argv):
    """Invoke the extraction engine's CLI; the exporter talks to the engine
    only through its command line and file formats."""
    exe = shutil.which("triplex")
    if exe:
        cmd = [exe, *map(str, argv)]
    else:
        cmd = [sys.executable, "-m", "triplex.cli", *map(str, argv)]
    return subprocess.run(cmd, capture_output=True, text=True)


@pytest.fixture(scope="session")
def engine_available():
    result = engine_cli("--version")
    if result.returncode != 0:
        pytest.skip("triplex engine CLI not installed")
    return True
