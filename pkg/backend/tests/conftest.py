import copy
from pathlib import Path
import pytest
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker
from sqlalchemy.pool import StaticPool
from backend.database.connection import Base
from backend.models import results  # noqa: F401  (registers the result tables)
from backend.models.scenario import Environment, load_scenario, scenario_from_dict
from backend.app import create_app

# Use in-memory SQLite for tests
TEST_DATABASE_URL = "sqlite:///:memory:"

SCENARIO_DIR = Path(__file__).resolve().parents[2] / "scenarios"

CLASS1 = {
    "label": "class1",
    "lighting": {"p_min": 50, "p_max": 1000},
    "heating": {"p_min": 1000, "p_max": 4000, "f_coeff": 0.0017, "g_coeff": 0.075},
    "washing": {"power": 600, "duration": 8, "earliest_start": 1, "deadline": 100},
    "t_min": 15,
    "t_pref": 22,
    "t_init": 22,
    "t_max": 25,
}

CLASS2 = {
    "label": "class2",
    "lighting": {"p_min": 50, "p_max": 500},
    "heating": {"p_min": 1000, "p_max": 2000, "f_coeff": 0.0008, "g_coeff": 0.0365},
    "washing": {"power": 400, "duration": 6, "earliest_start": 1, "deadline": 100},
    "t_min": 15,
    "t_pref": 22,
    "t_init": 22,
    "t_max": 25,
}


def _document(blocks, horizon, capacity, exterior=10.0, name="test"):
    return {
        "name": name,
        "horizon": horizon,
        "exterior_temp": exterior,
        "capacity": capacity,
        "homes": blocks,
    }


@pytest.fixture
def class1_block():
    """A fresh copy of the reference class-1 home block."""
    return copy.deepcopy(CLASS1)


@pytest.fixture
def class2_block():
    """A fresh copy of the reference class-2 home block."""
    return copy.deepcopy(CLASS2)


@pytest.fixture
def make_scenario():
    """Build a scenario from home blocks; washing windows are clipped to the horizon."""
    def build(blocks, horizon=100, capacity=0.0, exterior=10.0, name="test", wash_duration=None):
        blocks = copy.deepcopy(blocks)
        for block in blocks:
            if "washing" in block:
                washing = block["washing"]
                if wash_duration is not None:
                    washing["duration"] = wash_duration
                washing["deadline"] = min(washing["deadline"], horizon)
                washing["duration"] = min(washing["duration"], horizon)
        return scenario_from_dict(_document(blocks, horizon, capacity, exterior, name))
    return build


@pytest.fixture
def class1_home(make_scenario, class1_block):
    """Single class-1 home on the reference 100-slot horizon."""
    return make_scenario([class1_block]).homes[0]


@pytest.fixture
def class2_home(make_scenario, class2_block):
    """Single class-2 home on the reference 100-slot horizon."""
    return make_scenario([class2_block]).homes[0]


@pytest.fixture
def env100():
    """Reference environment: 100 slots at 10 °C."""
    return Environment(tuple([10.0] * 100))


@pytest.fixture
def small_scenario(make_scenario, class1_block):
    """Two class-1 homes on a 6-slot horizon with a 2-slot wash."""
    def build(capacity, homes=2, horizon=6):
        block = dict(class1_block, count=homes)
        return make_scenario([block], horizon=horizon, capacity=capacity, wash_duration=2)
    return build


@pytest.fixture
def tiny_scenario():
    """Two heat-only homes sharing 100 W over 3 slots."""
    return load_scenario(SCENARIO_DIR / "tiny.json")


@pytest.fixture
def heterogeneous_scenario():
    return load_scenario(SCENARIO_DIR / "heterogeneous.json")


@pytest.fixture(scope="function")
def test_db(monkeypatch):
    """Create a test database for each test and route get_db() to it."""
    engine = create_engine(
        TEST_DATABASE_URL,
        connect_args={"check_same_thread": False},
        poolclass=StaticPool,
    )

    # Create all tables
    Base.metadata.create_all(bind=engine)

    TestSessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

    import backend.database.connection
    monkeypatch.setattr(backend.database.connection, "SessionLocal", TestSessionLocal)

    session = TestSessionLocal()
    yield session

    # Clean up
    session.close()
    Base.metadata.drop_all(bind=engine)


@pytest.fixture(scope="function")
def test_app(test_db):
    """Create test Flask app."""
    app = create_app()
    app.config['TESTING'] = True
    return app


@pytest.fixture(scope="function")
def test_client(test_app):
    """Create test client."""
    return test_app.test_client()
