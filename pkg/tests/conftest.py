import pytest
from gmpy2 import mpq

from tangency_lab import linking as lk
from tangency_lab.params import reference_instance

EPS = mpq(1, 1000)
K_MAX = 8


@pytest.fixture(scope="session")
def ref():
    return reference_instance()


@pytest.fixture(scope="session")
def ref_float(ref):
    return ref.as_float()


@pytest.fixture(scope="session")
def linked_states(ref):
    return lk.build_linked_sequence(ref, EPS, K_MAX + 1)


@pytest.fixture(scope="session")
def square_alignments(ref, linked_states):
    """Alignments for k = 1..K_MAX with u-codes of k^2 zeros."""
    u_codes = ["0" * k * k for k in range(1, K_MAX + 1)]
    return lk.build_alignments(ref, ref.L, u_codes, states=linked_states)
