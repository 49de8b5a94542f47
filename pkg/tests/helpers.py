"""Shared builders for the test modules."""

from functools import lru_cache

from tabletri.generator import GraphSpec, generate
from tabletri.kvengine import Engine, SummingCombiner, decode_int, encode_int


def v(n: int) -> bytes:
    return encode_int(n)


def summing_table(engine: Engine, name: str = "t", splits=None):
    return engine.create_table(name, splits, [SummingCombiner()])


def as_ints(table) -> list:
    return [((r, c), decode_int(val)) for (r, c), val in table.scan()]


@lru_cache(maxsize=None)
def rmat(scale: int, seed: int = 1, edge_factor: int = 16):
    return generate(GraphSpec(scale=scale, edge_factor=edge_factor, seed=seed))
