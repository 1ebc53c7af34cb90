import os
import shutil

import pytest


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("RWRE_CLI") or shutil.which("rwre")
    if not path:
        pytest.skip("rwre executable not available")
    return path
