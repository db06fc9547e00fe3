import pytest

import trajguide


@pytest.fixture(autouse=True)
def quiet():
    trajguide.set_warnings_enabled(False)
    yield
    trajguide.set_warnings_enabled(True)
