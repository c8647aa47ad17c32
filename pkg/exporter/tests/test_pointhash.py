import numpy as np

from depseg import backends
from exporter import pointhash


def test_hash_agrees_with_pipeline_on_permuted_lists():
    rng = np.random.default_rng(42)
    for _ in range(50):
        n = int(rng.integers(1, 12))
        pts = [(int(x), int(y)) for x, y in rng.integers(0, 1000, (n, 2))]
        perm = [pts[i] for i in rng.permutation(n)]
        h = pointhash.point_hash(perm)
        assert h == backends.point_hash(pts)
        assert h == pointhash.point_hash(pts)


def test_hash_shape():
    h = pointhash.point_hash([(3, 4)])
    assert len(h) == 16
    assert set(h) <= set("0123456789abcdef")


def test_order_independent_value_sensitive():
    a = pointhash.point_hash([(1, 2), (3, 4)])
    assert pointhash.point_hash([(3, 4), (1, 2)]) == a
    assert pointhash.point_hash([(1, 2), (3, 5)]) != a
