import logging

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st
from scipy.stats import spearmanr

from pds.config import settings
from pds.core.exceptions import EmptyDatasetError, InvalidParameterError, ShapeMismatchError
from pds.core.fourier import spectral_reflection
from pds.core.rng import RngStream
from pds.models.masks import GradientOrder, PixelMask, Preconditioner, SpectralMask
from pds.models.tensor import inner
from pds.services.loaders import synthetic_power_law_dataset
from pds.services.oracles import power_law_spectrum
from pds.services.preconditioners import (
    apply_adjoint,
    apply_frequency,
    apply_gradient_transform,
    apply_inverse_M,
    apply_M,
    apply_pixel,
    build_frequency_mask,
    build_masks,
    build_matched_frequency_mask,
    build_matched_pixel_mask,
    build_pixel_mask,
    build_radial_mask,
    condition_number,
    contraction_rates,
    mask_summary,
    symmetrize,
)
from pds.services.verification import random_preconditioner


@pytest.fixture
def dataset(rng):
    return synthetic_power_law_dataset(20, (2, 8, 8), rng.child(3))


@pytest.mark.parametrize("alpha", [1.0, 2.0, 50.0])
def test_built_masks_are_normalized(dataset, alpha):
    freq, pixel = build_masks(dataset, alpha)
    for mask in (freq, pixel):
        assert mask.shape == (2, 8, 8)
        assert mask.alpha == alpha
        assert mask.values.max() == pytest.approx(1.0)
        assert mask.values.min() >= (alpha - 1.0) / alpha - 1e-12
    np.testing.assert_allclose(freq.values, spectral_reflection(freq.values), atol=1e-15)


def test_single_mask_builders_agree_with_pair(dataset):
    freq, pixel = build_masks(dataset, 3.0)
    np.testing.assert_array_equal(build_frequency_mask(dataset, 3.0).values, freq.values)
    np.testing.assert_array_equal(build_pixel_mask(dataset, 3.0).values, pixel.values)


def test_mask_values_are_read_only(dataset):
    freq, _ = build_masks(dataset, 2.0)
    with pytest.raises(ValueError):
        freq.values[0, 0, 0] = 2.0


def test_alpha_below_one_rejected(dataset):
    with pytest.raises(InvalidParameterError):
        build_masks(dataset, 0.5)


def test_empty_dataset_rejected():
    with pytest.raises(EmptyDatasetError):
        build_masks([], 2.0)


def test_mixed_shapes_rejected():
    with pytest.raises(ShapeMismatchError):
        build_masks([np.ones((1, 4, 4)), np.ones((1, 4, 5))], 2.0)


def test_all_zero_dataset_gives_identity(caplog):
    with caplog.at_level(logging.WARNING):
        freq, pixel = build_masks([np.zeros((1, 4, 4))] * 3, 2.0)
    assert freq.is_identity and pixel.is_identity
    assert freq.warnings and pixel.warnings
    assert 'identity' in caplog.text


def test_zero_statistics_are_floored():
    x = np.ones((1, 4, 4))
    x[0, 0, 0] = 0.0
    _, pixel = build_masks([x, x], 1.0)
    assert pixel.floored_count == 1
    assert pixel.values[0, 0, 0] == settings.PDS_MASK_FLOOR
    assert pixel.warnings


def test_constant_dataset_masks():
    freq, pixel = build_masks([np.ones((1, 4, 4))] * 3, 2.0)
    assert freq.values[0, 0, 0] == pytest.approx(1.0)
    expected = np.full((1, 4, 4), 0.5)
    expected[0, 0, 0] = 1.0
    np.testing.assert_allclose(freq.values, expected, atol=1e-12)
    assert freq.floored_count == 0
    np.testing.assert_allclose(pixel.values, 1.0)


def test_huge_alpha_gives_identity_masks(dataset):
    freq, pixel = build_masks(dataset, 1e9)
    assert np.abs(freq.values - 1.0).max() <= 1e-8
    assert np.abs(pixel.values - 1.0).max() <= 1e-8


def test_white_noise_frequency_mask_is_flat():
    noise = RngStream(17).normal((200, 3, 32, 32))
    freq = build_frequency_mask(noise, 2.0)
    assert freq.values.max() / freq.values.min() <= 1.1


def test_larger_alpha_moves_masks_toward_one(dataset):
    built = [build_masks(dataset, alpha) for alpha in (1.0, 2.0, 5.0, 50.0)]
    for index in range(2):
        gaps = [np.abs(pair[index].values - 1.0) for pair in built]
        for before, after in zip(gaps, gaps[1:]):
            assert np.all(after <= before + 1e-12)


def test_strongest_frequencies_are_shrunk_most(dataset):
    freq = build_frequency_mask(dataset, 2.0)
    power = symmetrize(np.mean([np.abs(np.fft.fft2(x)) ** 2 for x in dataset], axis=0))
    rho = spearmanr(power.ravel(), 1.0 / freq.values.ravel()).correlation
    assert rho == pytest.approx(-1.0, abs=1e-9)
    assert freq.values[:, 0, 0].max() == pytest.approx(1.0)


def test_radial_mask_layout():
    mask = build_radial_mask(8, 8, radius=1.0, lam=0.25, channels=2)
    assert mask.shape == (2, 8, 8)
    assert mask.alpha == 1.0
    assert mask.values[0, 0, 0] == 1.0
    assert mask.values[1, 4, 4] == 0.25
    np.testing.assert_array_equal(mask.values, spectral_reflection(mask.values))


def test_radial_mask_rejects_bad_parameters():
    with pytest.raises(InvalidParameterError):
        build_radial_mask(8, 8, radius=0.0, lam=1.0)


def test_identity_fast_path_returns_input(shape, rng, identity_preconditioner):
    x = rng.normal(shape)
    assert apply_M(None, x) is x
    assert apply_M(Preconditioner(), x) is x
    assert apply_M(identity_preconditioner, x) is x
    assert apply_adjoint(identity_preconditioner, x) is x
    assert apply_gradient_transform(identity_preconditioner, x) is x


@given(st.integers(min_value=0, max_value=2 ** 32))
@hsettings(max_examples=30, deadline=None)
def test_adjoint_identity(seed):
    rng = RngStream(seed)
    p = random_preconditioner((2, 6, 5), rng)
    x, y = rng.normal((2, 6, 5)), rng.normal((2, 6, 5))
    lhs = inner(apply_M(p, x), y)
    rhs = inner(x, apply_adjoint(p, y))
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


def test_inverse_round_trip(preconditioner, shape, rng):
    x = rng.normal(shape)
    np.testing.assert_allclose(apply_inverse_M(preconditioner, apply_M(preconditioner, x)), x, atol=1e-10)


def test_m_composes_frequency_after_pixel(preconditioner, shape, rng):
    x = rng.normal(shape)
    expected = apply_frequency(preconditioner.frequency, apply_pixel(preconditioner.pixel, x))
    np.testing.assert_allclose(apply_M(preconditioner, x), expected, atol=1e-12)


def test_gradient_orders(preconditioner, shape, rng):
    g = rng.normal(shape)
    f, p = preconditioner.frequency, preconditioner.pixel

    mmt = apply_gradient_transform(preconditioner, g)
    np.testing.assert_allclose(mmt, apply_M(preconditioner, apply_adjoint(preconditioner, g)), atol=1e-12)

    other = Preconditioner(f, p, GradientOrder.MP_MF2_MP)
    expected = apply_pixel(p, apply_frequency(f, apply_frequency(f, apply_pixel(p, g))))
    np.testing.assert_allclose(apply_gradient_transform(other, g), expected, atol=1e-12)
    assert not np.allclose(mmt, expected)


def test_gradient_order_flags():
    assert GradientOrder.from_flag('mmt') == GradientOrder.MT_THEN_M
    assert GradientOrder.from_flag('mtm') == GradientOrder.MP_MF2_MP
    assert GradientOrder.from_flag('Mp_Mf2_Mp') == GradientOrder.MP_MF2_MP


def test_shape_mismatch(preconditioner):
    with pytest.raises(ShapeMismatchError):
        apply_M(preconditioner, np.zeros((3, 8, 7)))


def test_masks_must_share_shape():
    with pytest.raises(ShapeMismatchError):
        Preconditioner(SpectralMask(np.ones((1, 4, 4))), PixelMask(np.full((1, 4, 5), 0.5)))


def test_mask_values_validated():
    with pytest.raises(InvalidParameterError):
        PixelMask(np.zeros((1, 2, 2)))
    with pytest.raises(InvalidParameterError):
        SpectralMask(np.ones((2, 2)))


def test_matched_masks_equalize_rates():
    spectrum = power_law_spectrum((1, 8, 8), 1000.0)
    freq = build_matched_frequency_mask(spectrum)
    assert freq.values.max() == pytest.approx(1.0)

    vanilla = contraction_rates(None, 1.0 / spectrum)
    matched = contraction_rates(Preconditioner(frequency=freq), 1.0 / spectrum)
    assert condition_number(vanilla) == pytest.approx(1000.0, rel=1e-9)
    assert condition_number(matched) == pytest.approx(1.0, rel=1e-9)

    pixel = build_matched_pixel_mask(np.array([[[1.0, 4.0]]]))
    np.testing.assert_allclose(pixel.values, [[[1.0, 0.5]]])


def test_contraction_rates_reject_pixel_masks(preconditioner, shape):
    with pytest.raises(InvalidParameterError):
        contraction_rates(preconditioner, np.ones(shape))


def test_mask_summary(dataset):
    freq, _ = build_masks(dataset, 2.0)
    summary = mask_summary(freq)
    assert summary['kind'] == 'frequency'
    assert summary['alpha'] == 2.0
    assert summary['max'] == pytest.approx(1.0)
    assert 0 < summary['entropy'] <= np.log(freq.values.size) + 1e-12
