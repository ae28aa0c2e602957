import numpy as np
import pytest

from ctxrl.spaces import ConfigError, ContextSpace, ContextVector


def test_bounds_validation():
    with pytest.raises(ConfigError):
        ContextSpace((("g", 2.0, 1.0),))
    with pytest.raises(ConfigError):
        ContextSpace((("g", 0.0, 1.0), ("g", 0.0, 2.0)))


def test_vector_out_of_bounds_rejected():
    space = ContextSpace((("mass", 0.1, 1.0),))
    with pytest.raises(ConfigError):
        ContextVector(np.array([1.5]), 0, space)


def test_normalize_roundtrip_and_range():
    space = ContextSpace((("g", 1.0, 20.0), ("m", 0.1, 2.0)))
    v = ContextVector(np.array([10.0, 0.5]), 3, space)
    unit = v.normalized()
    assert np.all(unit >= -1.0) and np.all(unit <= 1.0)
    assert np.allclose(space.denormalize(unit), v.values)
    assert np.allclose(space.normalize(space.lower), [-1.0, -1.0])
    assert np.allclose(space.normalize(space.upper), [1.0, 1.0])


def test_as_dict_preserves_names():
    space = ContextSpace((("gravity", 1.0, 20.0),))
    v = ContextVector(np.array([9.81]), 0, space)
    assert v.as_dict() == {"gravity": 9.81}
