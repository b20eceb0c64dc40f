"""Shared generators for randomized instances.

Chains are sampled with Dirichlet(1) columns and rejected until they pass
validation with a second-eigenvalue bound, so auto-truncation depths stay
small and mixing is fast enough for the certificate suites.
"""

import numpy as np
import pytest

from uoisched import BanditSpec, ChainError, ChainSpec, validate_chain

FIG1 = [[0.99, 0.3], [0.01, 0.7]]


def random_chain(rng: np.random.Generator, n: int, max_eig2: float = 0.8) -> ChainSpec:
    while True:
        t = rng.dirichlet(np.ones(n), size=n).T  # columns are next-state laws
        try:
            chain = validate_chain(t)
        except ChainError:
            continue
        eigs = np.sort(np.abs(np.linalg.eigvals(t)))[::-1]
        if eigs[1] <= max_eig2:
            return chain


def random_bandit(rng: np.random.Generator, n: int, label: str, rho=None, max_eig2: float = 0.8) -> BanditSpec:
    if rho is None:
        rho = float(rng.choice([0.7, 0.8, 1.0]))
    return BanditSpec(chain=random_chain(rng, n, max_eig2), success_prob=rho, label=label)


@pytest.fixture
def fig1_chain() -> ChainSpec:
    return validate_chain(FIG1)
