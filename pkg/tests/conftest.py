import numpy as np
import pytest

from latentcause.dynamics import LatentLinearSystem


@pytest.fixture
def intro_blocks():
    A = np.array([[0.0, 0.0, 0.5], [0.5, 0.1, 0.9], [0.9, 0.0, 0.5]])
    return A


def noiseless(system: LatentLinearSystem) -> LatentLinearSystem:
    return LatentLinearSystem(system.a11, system.a12, system.a21, system.a22,
                              noise_var=np.zeros(system.n), z0=system.z0)
