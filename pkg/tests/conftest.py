import numpy as np
import pytest

from diffseq import make_symbol
from models import GeneratorConfig, SpaceConfig, SymbolKind


@pytest.fixture
def make_generator():
    """Factory: GeneratorConfig for order k over a symbol window of N_max"""

    def build(k=1, kind=SymbolKind.LOG, N_max=4096, p=2.0, basis=None):
        space = SpaceConfig(k=k, p=p) if basis is None else SpaceConfig(k=k, p=p, basis=basis)
        return GeneratorConfig(space=space, symbol=make_symbol(kind, N_max))

    return build


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
