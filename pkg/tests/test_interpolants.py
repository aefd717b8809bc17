import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nncda import interpolants
from nncda.interpolants import (
    FOURIER_C0,
    InterpolantSpec,
    apply,
    check_axioms,
    interp_operator_bound,
    observed_mask,
    with_measured_c0,
)
from nncda.spectral import SpectralField, grad_perp, h_norm, inner, make_grid, random_field, v_norm


class TestSpec:
    def test_fourier_defaults(self):
        s = InterpolantSpec.fourier(8)
        assert s.h == pytest.approx(2 * np.pi / 8)
        assert s.c0 == FOURIER_C0 == pytest.approx(1 / (4 * np.pi**2))
        assert s.split_m == 8

    def test_volume_from_h(self):
        s = InterpolantSpec.volume(2 * np.pi / 4)
        assert s.cells == 4 and s.c0 is None

    def test_volume_rejects_non_dividing_h(self):
        with pytest.raises(ValueError):
            InterpolantSpec.volume(1.0)

    @pytest.mark.parametrize("kwargs", [dict(kind="spline", m=3), dict(kind="fourier_projection"),
                                        dict(kind="volume_average", cells=0),
                                        dict(kind="fourier_projection", m=4, c0=-1.0)])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            InterpolantSpec(**kwargs)


class TestFourierProjection:
    def test_keeps_low_and_drops_high(self, grid32):
        s = InterpolantSpec.fourier(4)
        low = SpectralField.single_mode(grid32, 3, 2)  # |k|^2 = 13 <= 16
        high = SpectralField.single_mode(grid32, 4, 1)  # |k|^2 = 17 > 16
        assert np.array_equal(apply(s, low).coeffs, low.coeffs)
        assert h_norm(apply(s, high)) == 0.0

    def test_disc_mask(self, grid32):
        mask = observed_mask(InterpolantSpec.fourier(4), grid32)
        assert mask.sum() == np.count_nonzero(grid32.ksq_index <= 16)

    def test_velocity_componentwise(self, grid32, rng):
        s = InterpolantSpec.fourier(5)
        u = grad_perp(random_field(grid32, rng))
        Iu = apply(s, u)
        assert np.array_equal(Iu.u1.coeffs, apply(s, u.u1).coeffs)
        assert np.array_equal(Iu.u2.coeffs, apply(s, u.u2).coeffs)

    def test_domain_mismatch(self, grid32, rng):
        with pytest.raises(ValueError):
            apply(InterpolantSpec.fourier(4, L=1.0), random_field(grid32, rng))

    def test_c0_sharp_at_first_dropped_shell(self):
        # the bound is approached by modes just above the cutoff
        g = make_grid(64, 2 * np.pi)
        s = InterpolantSpec.fourier(10)
        f = SpectralField.single_mode(g, 10, 1)
        ratio = h_norm(f - apply(s, f)) ** 2 / (s.c0 * s.h**2 * v_norm(f) ** 2)
        assert ratio == pytest.approx(100 / 101, rel=1e-12)


class TestVolumeAverage:
    def test_piecewise_constant_oracle(self, grid16, rng):
        s = InterpolantSpec.volume(2 * np.pi / 4)
        f = random_field(grid16, rng)
        x = f.to_physical()
        out = apply(s, f).to_physical()
        block = x[:4, :4].mean()
        assert np.allclose(out[:4, :4], block, atol=1e-13)
        assert np.allclose(out[4:8, 12:], x[4:8, 12:].mean(), atol=1e-13)

    def test_cells_must_tile_grid(self, grid16, rng):
        s = InterpolantSpec(interpolants.VOLUME, cells=3)
        with pytest.raises(ValueError):
            apply(s, random_field(grid16, rng))

    def test_measured_c0_below_poincare_wirtinger(self, grid32):
        s = with_measured_c0(InterpolantSpec.volume(2 * np.pi / 8), grid32, trials=30)
        assert 0 < s.c0 <= 1 / np.pi**2


class TestAxioms:
    def test_fourier_all_pass(self, grid32):
        rep = check_axioms(InterpolantSpec.fourier(6), grid32, trials=50)
        assert rep.all_passed
        assert rep["idempotent"].worst_ratio <= 1e-15
        assert rep["stokes_nonnegative"].asserted

    def test_volume_pass_and_unasserted_stokes(self, grid32):
        s = with_measured_c0(InterpolantSpec.volume(2 * np.pi / 8), grid32, trials=30)
        rep = check_axioms(s, grid32, trials=30, tolerance=1e-10, seed=1)
        for ax in ("mean_free", "idempotent", "symmetric", "nonnegative", "bounded"):
            assert rep[ax].passed, ax
        assert not rep["stokes_nonnegative"].asserted

    def test_measured_c0_respected_by_other_seeds(self, grid32):
        s = with_measured_c0(InterpolantSpec.volume(2 * np.pi / 8), grid32, trials=50, margin=1.5)
        assert check_axioms(s, grid32, trials=30, seed=99)["approximation"].passed

    def test_broken_operator_is_caught(self, grid32, monkeypatch):
        # doubling the output breaks idempotence and the alpha bound
        orig = interpolants._apply_scalar
        monkeypatch.setattr(interpolants, "_apply_scalar", lambda s, f: orig(s, f) * 2.0)
        rep = check_axioms(InterpolantSpec.fourier(6), grid32, trials=5)
        assert not rep["idempotent"].passed
        assert not rep["bounded"].passed
        assert not rep.all_passed

    def test_csv(self, tmp_path, grid16):
        rep = check_axioms(InterpolantSpec.fourier(3), grid16, trials=3)
        rep.to_csv(tmp_path / "ax.csv")
        lines = (tmp_path / "ax.csv").read_text().splitlines()
        assert lines[0] == "axiom,trials,worst_ratio,pass"
        assert len(lines) == 8
        assert all(line.endswith("true") for line in lines[1:])

    def test_rejects_zero_trials(self, grid16):
        with pytest.raises(ValueError):
            check_axioms(InterpolantSpec.fourier(3), grid16, trials=0)


class TestOperatorBound:
    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 10), slope=st.floats(0, 4))
    def test_bounded_by_one(self, seed, m, slope):
        g = make_grid(32, 2 * np.pi)
        f = random_field(g, np.random.default_rng(seed), slope=slope)
        assert interp_operator_bound(InterpolantSpec.fourier(m), f, g.lambda1) <= 1.0

    def test_zero_field(self, grid16):
        with pytest.raises(ValueError):
            interp_operator_bound(InterpolantSpec.fourier(3), SpectralField.zeros(grid16), 1.0)

    def test_needs_c0(self, grid16, rng):
        with pytest.raises(ValueError):
            interp_operator_bound(InterpolantSpec.volume(np.pi), random_field(grid16, rng), 1.0)


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 12))
    def test_fourier_projection_is_orthogonal(self, seed, m):
        g = make_grid(32, 2 * np.pi)
        rng = np.random.default_rng(seed)
        s = InterpolantSpec.fourier(m)
        f, h = random_field(g, rng), random_field(g, rng)
        If = apply(s, f)
        assert abs(inner(f - If, apply(s, h))) <= 1e-12 * h_norm(f) * h_norm(h)
        assert h_norm(If) ** 2 + h_norm(f - If) ** 2 == pytest.approx(h_norm(f) ** 2, rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), cells=st.sampled_from([1, 2, 4, 8, 16]))
    def test_volume_average_is_a_projection(self, seed, cells):
        g = make_grid(32, 2 * np.pi)
        s = InterpolantSpec(interpolants.VOLUME, cells=cells)
        f = random_field(g, np.random.default_rng(seed))
        If = apply(s, f)
        assert h_norm(apply(s, If) - If) <= 1e-12 * h_norm(f)
        assert h_norm(If) <= h_norm(f) * (1 + 1e-12)
