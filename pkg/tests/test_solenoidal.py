import numpy as np
import pytest

from pds.core.exceptions import InvalidParameterError
from pds.models.masks import SolenoidalKind, SolenoidalOp
from pds.models.tensor import inner
from pds.services.solenoidal import apply_solenoidal, transposed_dft2


@pytest.mark.parametrize("op", SolenoidalOp.standard_set(omega=1.0), ids=lambda op: op.label)
def test_operator_is_skew(op, rng):
    for _ in range(20):
        x, y = rng.normal((3, 8, 8)), rng.normal((3, 8, 8))
        assert abs(inner(x, apply_solenoidal(op, x))) <= 1e-10 * inner(x, x)
        gap = inner(x, apply_solenoidal(op, y)) + inner(apply_solenoidal(op, x), y)
        assert abs(gap) <= 1e-10 * np.sqrt(inner(x, x) * inner(y, y))


def test_standard_set_contents():
    ops = SolenoidalOp.standard_set(omega=2.0)
    assert len(ops) == 7
    assert [op.label for op in ops] == [
        'shift(1,1)', 'shift(10,10)', 'shift(100,100)',
        'fourier_shift(1,1)', 'fourier_shift(10,10)', 'fourier_shift(100,100)',
        'fourier_antisym',
    ]
    assert all(op.omega == 2.0 for op in ops)


def test_shift_is_roll_difference():
    x = np.zeros((1, 5, 5))
    x[0, 2, 2] = 1.0
    out = apply_solenoidal(SolenoidalOp(SolenoidalKind.SHIFT, (1, 2)), x)
    assert out[0, 3, 4] == 1.0
    assert out[0, 1, 0] == -1.0
    assert np.count_nonzero(out) == 2


@pytest.mark.parametrize("kind", [SolenoidalKind.FOURIER_SHIFT, SolenoidalKind.FOURIER_ANTISYM])
def test_fourier_kinds_vanish_on_real_tensors(kind, rng):
    x = rng.normal((2, 8, 8))
    out = apply_solenoidal(SolenoidalOp(kind, (1, 1)), x)
    assert np.max(np.abs(out)) <= 1e-9 * np.max(np.abs(x))


def test_transposed_dft_on_non_square_falls_back(rng):
    x = rng.normal((1, 4, 6))
    np.testing.assert_allclose(transposed_dft2(x), np.fft.fft2(x), atol=1e-10)


def test_missing_operator_is_zero(rng):
    x = rng.normal((1, 4, 4))
    np.testing.assert_array_equal(apply_solenoidal(None, x), np.zeros_like(x))


@pytest.mark.parametrize("op", SolenoidalOp.standard_set(), ids=lambda op: op.label)
def test_parse_label(op):
    assert SolenoidalOp.parse(op.label) == op


def test_parse_sets_omega():
    op = SolenoidalOp.parse(' shift( 3, 4 ) ', omega=0.5)
    assert op.offset == (3, 4)
    assert op.omega == 0.5


@pytest.mark.parametrize("text", ['shift(1)', 'shift(a,b)', 'rotate(1,1)', 'rotate'])
def test_parse_rejects_bad_labels(text):
    with pytest.raises(ValueError):
        SolenoidalOp.parse(text)


def test_negative_omega_rejected():
    with pytest.raises(InvalidParameterError):
        SolenoidalOp(SolenoidalKind.SHIFT, (1, 1), -1.0)
