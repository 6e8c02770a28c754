import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from patrec.catalog import KBCatalog
from patrec.dsl import parse_context, parse_kb

REPO = Path(__file__).resolve().parent.parent
KB_DIR = REPO / "kbs"
RC_DIR = REPO / "rcs"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture(scope="session")
def authn_kb():
    return parse_kb((KB_DIR / "authn.kb").read_text(), "authn.kb")


@pytest.fixture(scope="session")
def password_kb():
    return parse_kb((KB_DIR / "password.kb").read_text(), "password.kb")


@pytest.fixture(scope="session")
def catalog():
    return KBCatalog.from_dir(KB_DIR)


@pytest.fixture(scope="session")
def contexts(authn_kb):
    return {
        path.stem: parse_context(path.read_text(), authn_kb, str(path))
        for path in sorted(RC_DIR.glob("*.ctx"))
    }
