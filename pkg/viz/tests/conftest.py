from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def export_dir() -> Path:
    """A committed desk-scale optimizer export (see fixtures/README.md)."""
    path = FIXTURES / "a8_export"
    if not path.is_dir():
        pytest.fail("missing fixtures/a8_export; regenerate per fixtures/README.md")
    return path
