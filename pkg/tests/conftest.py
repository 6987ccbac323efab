import pytest
from httpx import ASGITransport, AsyncClient

from app.main import app
from app.simulation.schemas import SimConfig
from oracles import trial_from_rows


@pytest.fixture
def constant_trial():
    """Ten packets, both copies delivered 900 µs after sending."""
    rows = [(90 + i * 10_000, 990 + i * 10_000) * 2 for i in range(10)]
    return trial_from_rows(rows)


@pytest.fixture
def five_packet_trial():
    """Losses A={2,3}, B={3,5}."""
    rows = [
        (1_000, 1_850, 1_050, 2_250),
        (11_000, None, 11_050, 14_050),
        (21_000, None, 21_050, None),
        (31_000, 32_000, 31_050, 31_950),
        (41_000, 41_700, 41_050, None),
    ]
    return trial_from_rows(rows)


@pytest.fixture
def noiseless_config():
    return SimConfig.model_validate({"preset": "noiseless", "n_packets": 500, "period_us": 10_000})


@pytest.fixture
async def client():
    transport = ASGITransport(app=app)
    async with AsyncClient(transport=transport, base_url="http://test") as ac:
        yield ac
