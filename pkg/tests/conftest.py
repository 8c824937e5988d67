"""Shared fixtures: the bundled producer/consumer network and generated
models, built once per session."""

from pathlib import Path

import pytest

from ltsmc.bench import gen_gas_station, gen_token_ring
from ltsmc.network import Network, load_network

REPO_ROOT = Path(__file__).resolve().parent.parent
FIG_NET = REPO_ROOT / "models" / "producer_consumer" / "net.exp"

PRODUCER_AUT = 'des (0, 2, 2)\n(0, "gen_work", 1)\n(1, "send", 0)\n'
CONSUMER_AUT = 'des (0, 3, 2)\n(0, "rec", 1)\n(1, "work", 1)\n(1, "i", 0)\n'
PC_EXP = """par using
    send * rec *  _  -> trans,
    send *  _  * rec -> trans
in
    "producer.aut"
    || "consumer.aut"
    || "consumer.aut"
end par
"""


@pytest.fixture(scope="session")
def fig_net() -> Network:
    return load_network(FIG_NET)


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("models")


def ring_network(n: int, model_dir: Path) -> Network:
    out = model_dir / f"ring{n}"
    if not (out / "net.exp").exists():
        gen_token_ring(n, out)
    return load_network(out / "net.exp")


def gas_network(n: int, model_dir: Path) -> Network:
    out = model_dir / f"gas{n}"
    if not (out / "net.exp").exists():
        gen_gas_station(n, out)
    return load_network(out / "net.exp")
