import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from excitonnet.network import ModelParams, build_model, rng_stream, sample_configuration

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def params():
    return ModelParams()


@pytest.fixture
def two_site():
    p = ModelParams(n_sites=2)
    return build_model(sample_configuration(p, rng_stream(0, 0)), p)


def random_model(seed_index, master_seed=1234, params=None):
    params = params or ModelParams()
    return build_model(sample_configuration(params, rng_stream(master_seed, seed_index), seed_index), params)


@pytest.fixture
def models():
    return [random_model(i) for i in range(6)]


def pytest_addoption(parser):
    parser.addoption("--skip-slow", action="store_true", help="skip the full-scale acceptance run")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--skip-slow"):
        skip = pytest.mark.skip(reason="--skip-slow given")
        for item in items:
            if "slow" in item.keywords:
                item.add_marker(skip)


# ---------------------------------------------------------------- acceptance report

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = "; ".join(v for k, v in item.user_properties if k == "detail")
        verdict = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        _CRITERIA[number] = (title, verdict, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, verdict, detail = _CRITERIA[number]
        line = f"criterion {number:2d} {verdict}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
