import numpy as np
import pytest

from mlenkbf import validate_model


@pytest.fixture(scope="session")
def ou1():
    """Scalar benchmark model: A=-1, C=1, unit noise, X_0 ~ N(0, 1)."""
    one = np.ones((1, 1))
    return validate_model(-one, one, one, one, np.zeros(1), one)


@pytest.fixture(scope="session")
def free2():
    """2-d model with A=0 and C=0: pure Brownian particles, gain identically 0."""
    Z = np.zeros((2, 2))
    I = np.eye(2)
    return validate_model(Z, Z, I, I, np.zeros(2), I)
