"""Unit tests for scene/matrix/measurement generation and stacking."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vamp_cfar import (
    DimensionError,
    gen_partial_fourier,
    gen_scene,
    measure,
    stack_complex,
    unstack_real,
)


class TestStacking:
    def test_stack_single_complex(self):
        np.testing.assert_array_equal(stack_complex(np.array([1 + 2j])), [1.0, 2.0])

    def test_stack_real_vector_second_half_zero(self):
        v = np.array([3.0, -1.0, 0.5])
        stacked = stack_complex(v)
        np.testing.assert_array_equal(stacked[3:], np.zeros(3))
        np.testing.assert_array_equal(stacked[:3], v)

    @given(hnp.arrays(np.complex128, st.integers(1, 40),
                      elements=st.complex_numbers(max_magnitude=1e6, allow_nan=False,
                                                  allow_infinity=False)))
    def test_round_trip(self, v):
        np.testing.assert_array_equal(unstack_real(stack_complex(v)), v)

    def test_unstack_odd_length_errors(self):
        with pytest.raises(DimensionError):
            unstack_real(np.ones(5))


class TestGenPartialFourier:
    def test_full_sampling_is_permuted_dft(self):
        a = gen_partial_fourier(4, 4, seed=3)
        gram = a.entries @ a.entries.conj().T
        np.testing.assert_allclose(gram, np.eye(4), atol=1e-12)
        # every unitary DFT row appears exactly once
        assert sorted(a.selected_rows.tolist()) == [0, 1, 2, 3]

    def test_entries_match_dft_formula(self):
        a = gen_partial_fourier(8, 3, seed=11)
        cols = np.arange(8)
        for i, k in enumerate(a.selected_rows):
            expected = np.exp(-2j * np.pi * k * cols / 8) / np.sqrt(8)
            np.testing.assert_array_equal(a.entries[i], expected)

    def test_paper_scale_dimensions_orthonormal(self):
        a = gen_partial_fourier(1000, 600, seed=0)
        assert a.entries.shape == (600, 1000)
        gram = a.entries @ a.entries.conj().T
        assert np.max(np.abs(gram - np.eye(600))) < 1e-10

    def test_seeded_determinism_bitwise(self):
        a1 = gen_partial_fourier(8, 3, seed=7)
        a2 = gen_partial_fourier(8, 3, seed=7)
        np.testing.assert_array_equal(a1.entries, a2.entries)
        np.testing.assert_array_equal(a1.stacked, a2.stacked)
        np.testing.assert_array_equal(a1.selected_rows, a2.selected_rows)

    def test_selected_rows_distinct_in_range(self):
        a = gen_partial_fourier(50, 20, seed=5)
        rows = a.selected_rows.tolist()
        assert len(set(rows)) == 20
        assert all(0 <= r < 50 for r in rows)

    def test_stacked_block_layout_exact(self):
        a = gen_partial_fourier(10, 4, seed=1)
        re, im = np.real(a.entries), np.imag(a.entries)
        np.testing.assert_array_equal(a.stacked[:4, :10], re)
        np.testing.assert_array_equal(a.stacked[:4, 10:], -im)
        np.testing.assert_array_equal(a.stacked[4:, :10], im)
        np.testing.assert_array_equal(a.stacked[4:, 10:], re)

    def test_stacked_matvec_commutes_with_stacking(self):
        a = gen_partial_fourier(64, 24, seed=9)
        rng = np.random.default_rng(123)
        for _ in range(100):
            v = rng.standard_normal(64) + 1j * rng.standard_normal(64)
            lhs = a.stacked @ stack_complex(v)
            rhs = stack_complex(a.entries @ v)
            assert np.max(np.abs(lhs - rhs)) < 1e-10

    @pytest.mark.parametrize("n,m", [(4, 5), (4, 0), (0, 0)])
    def test_invalid_dimensions(self, n, m):
        with pytest.raises(DimensionError):
            gen_partial_fourier(n, m, seed=0)


class TestGenScene:
    def test_zero_targets(self):
        scene = gen_scene(1000, 0, snr_db=20.0, noise_var=1.0, seed=0)
        assert scene.support == frozenset()
        np.testing.assert_array_equal(scene.amplitudes, np.zeros(1000))

    def test_full_support(self):
        scene = gen_scene(8, 8, snr_db=10.0, noise_var=1.0, seed=2)
        assert scene.support == frozenset(range(1, 9))
        assert np.all(scene.amplitudes != 0)

    def test_snr_definition(self):
        scene = gen_scene(1000, 10, snr_db=20.0, noise_var=1.0, seed=4)
        mags2 = np.abs(scene.amplitudes[[i - 1 for i in sorted(scene.support)]]) ** 2
        np.testing.assert_allclose(mags2, 100.0, rtol=1e-12)

    def test_support_matches_nonzeros(self):
        scene = gen_scene(64, 7, snr_db=15.0, noise_var=0.5, seed=6)
        nonzero_bins = {int(i) + 1 for i in np.flatnonzero(scene.amplitudes != 0)}
        assert nonzero_bins == set(scene.support)
        assert len(scene.support) == 7

    def test_phases_vary(self):
        scene = gen_scene(100, 20, snr_db=10.0, noise_var=1.0, seed=8)
        phases = np.angle(scene.amplitudes[scene.amplitudes != 0])
        assert np.std(phases) > 0.1

    def test_seeded_determinism(self):
        s1 = gen_scene(50, 5, 12.0, 2.0, seed=42)
        s2 = gen_scene(50, 5, 12.0, 2.0, seed=42)
        np.testing.assert_array_equal(s1.amplitudes, s2.amplitudes)
        assert s1.support == s2.support

    def test_too_many_targets_errors(self):
        with pytest.raises(DimensionError):
            gen_scene(4, 5, 10.0, 1.0, seed=0)

    def test_zero_noise_var_with_targets_errors(self):
        with pytest.raises(ValueError):
            gen_scene(10, 2, 10.0, 0.0, seed=0)

    def test_zero_noise_var_without_targets_ok(self):
        scene = gen_scene(10, 0, 10.0, 0.0, seed=0)
        assert scene.support == frozenset()


class TestMeasure:
    def test_noiseless_zero_scene_exact_zero(self):
        a = gen_partial_fourier(16, 8, seed=0)
        scene = gen_scene(16, 0, 10.0, 0.0, seed=1)
        meas = measure(a, scene, noise_var=0.0, seed=2)
        np.testing.assert_array_equal(meas.complex_values, np.zeros(8))
        np.testing.assert_array_equal(meas.stacked, np.zeros(16))

    def test_noiseless_forward_model(self):
        a = gen_partial_fourier(32, 12, seed=3)
        scene = gen_scene(32, 4, 15.0, 1.0, seed=4)
        meas = measure(a, scene, noise_var=0.0, seed=5)
        np.testing.assert_allclose(meas.complex_values,
                                   a.entries @ scene.amplitudes, atol=1e-12)

    def test_stacked_is_re_then_im(self):
        a = gen_partial_fourier(16, 6, seed=6)
        scene = gen_scene(16, 2, 10.0, 1.0, seed=7)
        meas = measure(a, scene, noise_var=1.0, seed=8)
        np.testing.assert_array_equal(meas.stacked[:6], np.real(meas.complex_values))
        np.testing.assert_array_equal(meas.stacked[6:], np.imag(meas.complex_values))

    def test_noise_energy_law_of_large_numbers(self):
        # pooled over seeds: mean |y_i|^2 of pure noise must sit near
        # the total per-sample variance
        a = gen_partial_fourier(1000, 1000, seed=0)
        scene = gen_scene(1000, 0, 10.0, 1.0, seed=0)
        samples = []
        for s in range(10):
            meas = measure(a, scene, noise_var=1.0, seed=100 + s)
            samples.append(np.abs(meas.complex_values) ** 2)
        mean_power = float(np.mean(np.concatenate(samples)))
        assert 0.95 <= mean_power <= 1.05

    def test_noise_component_calibration(self):
        # 1e5 complex samples: each real component variance within 3%
        # of noise_var / 2
        a = gen_partial_fourier(1000, 1000, seed=1)
        scene = gen_scene(1000, 0, 10.0, 1.0, seed=0)
        res, ims = [], []
        for s in range(100):
            meas = measure(a, scene, noise_var=1.0, seed=1000 + s)
            res.append(np.real(meas.complex_values))
            ims.append(np.imag(meas.complex_values))
        var_re = float(np.var(np.concatenate(res)))
        var_im = float(np.var(np.concatenate(ims)))
        assert abs(var_re - 0.5) <= 0.015
        assert abs(var_im - 0.5) <= 0.015

    def test_dimension_mismatch_errors(self):
        a = gen_partial_fourier(16, 8, seed=0)
        scene = gen_scene(20, 2, 10.0, 1.0, seed=1)
        with pytest.raises(DimensionError):
            measure(a, scene, noise_var=1.0, seed=2)

    def test_seeded_determinism(self):
        a = gen_partial_fourier(16, 8, seed=0)
        scene = gen_scene(16, 3, 12.0, 1.0, seed=1)
        m1 = measure(a, scene, noise_var=1.0, seed=5)
        m2 = measure(a, scene, noise_var=1.0, seed=5)
        np.testing.assert_array_equal(m1.complex_values, m2.complex_values)
        np.testing.assert_array_equal(m1.stacked, m2.stacked)

    def test_negative_noise_var_errors(self):
        a = gen_partial_fourier(16, 8, seed=0)
        scene = gen_scene(16, 0, 10.0, 1.0, seed=1)
        with pytest.raises(ValueError):
            measure(a, scene, noise_var=-0.5, seed=2)
