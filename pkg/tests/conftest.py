import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def ground():
    """Loader for the bundled .ground fixture problems."""
    from htnsat.hddl import parse_ground

    def _load(name):
        return parse_ground((FIXTURES / f"{name}.ground").read_text())

    return _load
