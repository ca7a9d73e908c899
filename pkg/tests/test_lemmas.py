import pytest

from suites import LEMMAS


@pytest.mark.parametrize("name", sorted(LEMMAS))
@pytest.mark.parametrize("seed", [1, 2])
def test_lemma_property(name, seed):
    n, problems = LEMMAS[name](200, seed)
    assert n >= 200
    assert problems == []
