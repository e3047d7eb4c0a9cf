import numpy as np
import pytest

from smoothreg.moments import vech


def random_moments(rng, m=4, cond_floor=0.5):
    """A valid moment vector: SPD second-moment block plus an arbitrary cross-moment block."""
    a = rng.standard_normal((m, m))
    sigma = a @ a.T + cond_floor * np.eye(m)
    gamma = rng.standard_normal(m)
    return np.concatenate([vech(sigma), gamma])


def central_jacobian(f, x, step=None):
    x = np.asarray(x, dtype=float)
    step = 1e-6 * (1.0 + np.linalg.norm(x)) if step is None else step
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        cols.append((f(x + e) - f(x - e)) / (2 * step))
    return np.column_stack(cols)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
