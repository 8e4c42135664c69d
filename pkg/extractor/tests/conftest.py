import dataclasses
import shutil
import subprocess
from pathlib import Path

import pytest

from swab_extractor.spec import ExtractionSpec

_EXAMPLES = Path(__file__).resolve().parent.parent / "examples"


@pytest.fixture(scope="session")
def examples_dir() -> Path:
    return _EXAMPLES


@pytest.fixture()
def toy_spec(tmp_path):
    spec = ExtractionSpec.from_file(_EXAMPLES / "toy_spec.json")
    return dataclasses.replace(spec, output_dir=tmp_path / "bundle")


@pytest.fixture(scope="session")
def validate_cli():
    """Runs the engine's `swab validate` on a bundle dir (the contract)."""
    exe = shutil.which("swab")
    assert exe is not None, "the primary engine CLI must be installed"

    def run(bundle_dir) -> subprocess.CompletedProcess:
        return subprocess.run(
            [exe, "validate", str(bundle_dir)], capture_output=True, text=True
        )

    return run
