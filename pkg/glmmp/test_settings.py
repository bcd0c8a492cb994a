import re

from . import settings


def test_environment_documented():
    source = (settings.BASE_DIR / 'glmmp' / 'settings.py').read_text()
    readme = (settings.BASE_DIR / 'README.md').read_text()

    names = set(re.findall(r"os\.environ\.get\('(\w+)'", source))
    assert 'GLM_MP_HOSTNAME' in names
    assert not names - set(re.findall(r"`(\w+)`", readme))
