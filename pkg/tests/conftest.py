import pytest

from lockesim.config import SimConfig
from lockesim.core.effects import Effects
from lockesim.core.protocol import Message, Priority, TableMode


@pytest.fixture
def config():
    """Two L1s, two tokens, errata tables, FIFO delivery"""
    return SimConfig(n_l1=2, tokens=2, policy="fifo", mode=TableMode.ERRATA).validate()


@pytest.fixture
def effects():
    return Effects()


@pytest.fixture
def make_request():
    def _make(kind, addr, requester, dest, birth=0):
        return Message(kind, addr, requester, dest, origin=requester, requester=requester,
                       priority=Priority(birth, requester.index))
    return _make
