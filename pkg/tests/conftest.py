import numpy as np
import pytest

import cylspec as cs


@pytest.fixture(scope="session")
def square_t():
    return cs.square_torus()


@pytest.fixture(scope="session")
def torus_spec_25(square_t):
    return cs.eigendecompose(cs.build_torus_model(square_t, 2.5))


@pytest.fixture(scope="session")
def torus_spec_15(square_t):
    return cs.eigendecompose(cs.build_torus_model(square_t, 1.5))


@pytest.fixture(scope="session")
def sl16(square_t):
    cc = cs.quad_torus_complex(square_t, 16)
    return cc, cs.build_sl_model(cc)


@pytest.fixture(scope="session")
def sl16_spec(sl16):
    return cs.eigendecompose(sl16[1])


@pytest.fixture(scope="session")
def torus_end(torus_spec_25):
    return cs.EndSystem((torus_spec_25,))


def fourier_oracle(torus, count):
    """First `count` Laplace eigenvalues with multiplicity, by dual-lattice enumeration."""
    out = []
    for lam, mult in cs.torus_fourier_spectrum(torus, 50.0):
        out.extend([lam] * mult)
        if len(out) >= count:
            break
    return np.array(out[:count])
