import pytest
from fastapi.testclient import TestClient

from api.main import app
from config import Config
from ehyb.database import Database
from ehyb.engine import ExecutionConfig
from ehyb.format import DeviceProfile
from ehyb.generators import laplace2d
from ehyb.pipeline import conversion_summary, convert_matrix
from ehyb.bench import run_bench


@pytest.fixture
def client():
    return TestClient(app)


@pytest.fixture
def history():
    db = Database(Config.DATABASE_PATH)
    result = convert_matrix(laplace2d(6), DeviceProfile(num_processors=2, warp_size=4, shm_max=512), 8)
    db.add_conversion(conversion_summary(result, 'grid6'))
    for report in run_bench(result, 'grid6', reps=1, warmup=0, cfg=ExecutionConfig()):
        db.add_bench_report(report)
    return db


def test_health(client):
    assert client.get('/health').json() == {'status': 'ok'}


def test_reports(client, history):
    body = client.get('/api/reports', params={'limit': 1}).json()
    assert body['success']
    assert len(body['reports']) == 1
    assert body['reports'][0]['matrix'] == 'grid6'


def test_conversions(client, history):
    body = client.get('/api/conversions').json()
    assert body['conversions'][0]['dimension'] == 36


def test_statistics(client, history):
    stats = client.get('/api/statistics').json()['statistics']
    assert stats['total_runs'] == 2
    assert set(stats['kernels']) == {'ehyb', 'csr-oracle'}


def test_statistics_on_empty_history(client):
    stats = client.get('/api/statistics').json()['statistics']
    assert stats['total_runs'] == 0 and stats['kernels'] == {}


def test_config(client):
    cfg = client.get('/api/config').json()['config']
    assert cfg['device_processors'] == Config.DEVICE_PROCESSORS
    assert cfg['scheduling'] == Config.SCHEDULING


def test_limit_is_validated(client):
    assert client.get('/api/reports', params={'limit': 0}).status_code == 422


def test_panel_token(client, monkeypatch):
    monkeypatch.setattr(Config, 'PANEL_TOKEN', 'secret')
    assert client.get('/api/config').status_code == 401
    assert client.get('/api/config', headers={'X-Panel-Token': 'wrong'}).status_code == 401
    assert client.get('/api/config', headers={'X-Panel-Token': 'secret'}).status_code == 200
    assert client.get('/health').status_code == 200
