from pathlib import Path
from typing import Optional

import numpy as np
import pytest
import scipy.linalg

from gaussian_observables.observable import GaussianObservable
from gaussian_observables.symplectic import block_form

TESTS_DIR = Path(__file__).parent
REPO_DIR = TESTS_DIR.parent


def random_symplectic(rng: np.random.Generator, s: int, scale: float = 0.3) -> np.ndarray:
    generator = rng.normal(scale=scale, size=(2 * s, 2 * s))
    return scipy.linalg.expm(block_form(s) @ (generator + generator.T) / 2)


def minimal_noise(delta_K: np.ndarray) -> np.ndarray:
    """Smallest alpha making alpha + (i/2) Delta_K positive: |i Delta_K| / 2."""
    eigenvalues, V = np.linalg.eigh(delta_K.T @ delta_K)
    root = (V * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ V.T
    return 0.25 * (root + root.T)


def random_valid_observable(rng: np.random.Generator, s: Optional[int] = None) -> GaussianObservable:
    """
    Valid observable built from canonical pairs and lone positions, mixed by a random
    symplectic map on the mode side and an orthogonal map on the outcome side, with
    random PSD noise of random rank on top of the minimal noise.
    """
    s = int(rng.integers(1, 5)) if s is None else s
    pairs = int(rng.integers(0, s + 1))
    singles = int(rng.integers(0 if pairs else 1, s - pairs + 1))
    m = 2 * pairs + singles

    K0 = np.zeros((2 * s, m))
    for j in range(pairs):
        K0[2 * j, 2 * j] = 1.0
        K0[2 * j + 1, 2 * j + 1] = 1.0
    for j in range(singles):
        K0[2 * (pairs + j), 2 * pairs + j] = 1.0
    rotation, _ = np.linalg.qr(rng.normal(size=(m, m)))
    K = random_symplectic(rng, s) @ K0 @ rotation

    delta_K = K.T @ block_form(s) @ K
    noise_rank = int(rng.integers(0, m + 1))
    B = rng.normal(size=(m, noise_rank))
    alpha = minimal_noise(delta_K) + 0.3 * B @ B.T
    return GaussianObservable(s=s, K=K, alpha=0.5 * (alpha + alpha.T), label="random")


def random_instances(count: int = 200, seed: int = 2024):
    rng = np.random.default_rng(seed)
    return [random_valid_observable(rng) for _ in range(count)]


@pytest.fixture(scope="session")
def instances():
    return random_instances()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def prototypes_dir():
    return REPO_DIR / "prototypes"


@pytest.fixture(scope="session")
def config_file():
    return TESTS_DIR / "config-test.toml"
