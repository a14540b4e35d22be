import copy

import pytest

from peering_cdn.scenario import Scenario, bundled_scenario, load_scenario, read_scenario_file

MINIMAL = {
    'name': 'minimal',
    'seed': 1,
    'duration_s': 120,
    'latency_ms': [[0, 100], [100, 0]],
    'contents': {
        'total': 20,
        'size_mb': 10,
        'owners': [{'provider': 'alpha', 'first': 1, 'last': 20}],
    },
    'providers': [
        {'id': 'alpha', 'region': 0, 'capacity_mb': 100, 'unit_storage_cost': 0.01},
        {'id': 'beta', 'region': 1, 'capacity_mb': 100, 'unit_storage_cost': 0.01},
    ],
    'workload': {'kind': 'zipf', 'arrival_rate': 2, 'region_weights': [0.5, 0.5]},
    'zipf': {'mu': 0.8},
}


# Keep every test away from the user's real ~/.cdnpeer/profiles
@pytest.fixture(scope='function', autouse=True)
def isolated_profiles(monkeypatch, tmp_path_factory):
    monkeypatch.setenv('CDNPEER_HOME', str(tmp_path_factory.mktemp('cdnpeer-home')))
    monkeypatch.delenv('CDNPEER_PROFILE', raising=False)


@pytest.fixture(scope='function')
def minimal_data():
    return copy.deepcopy(MINIMAL)


@pytest.fixture(scope='function')
def minimal_scenario(minimal_data):
    return Scenario.from_dict(minimal_data)


@pytest.fixture(scope='function')
def hotspot_data():
    return read_scenario_file(bundled_scenario('hotspot'))


@pytest.fixture(scope='session')
def hotspot():
    return load_scenario(bundled_scenario('hotspot'))


@pytest.fixture(scope='session')
def walk_scenario():
    return load_scenario(bundled_scenario('walk'))


@pytest.fixture(scope='session')
def zipf_scenario():
    return load_scenario(bundled_scenario('zipf'))
