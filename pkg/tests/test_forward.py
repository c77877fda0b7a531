import numpy as np
import pytest

from cvlangevin.forward import (
    FourierMagnitude,
    Identity,
    Ptychography,
    all_pass_pupil,
    adjoint,
    apply,
    build_led_grid,
    fft2_unitary,
    ifft2_unitary,
    intensity,
    make_pupil,
    ptychography_model,
)


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def naive_dft2(x):
    """Direct O(N^4) unitary DFT for small oracle checks."""
    h, w = x.shape
    out = np.zeros((h, w), dtype=complex)
    for ky in range(h):
        for kx in range(w):
            acc = 0.0 + 0.0j
            for iy in range(h):
                for ix in range(w):
                    acc += x[iy, ix] * np.exp(-2j * np.pi * (ky * iy / h + kx * ix / w))
            out[ky, kx] = acc / np.sqrt(h * w)
    return out


class TestFft:
    def test_delta_transforms_to_constant(self):
        n = 8
        delta = np.zeros((n, n), complex)
        delta[0, 0] = 1.0
        np.testing.assert_allclose(fft2_unitary(delta), np.full((n, n), 1 / n), atol=1e-14)

    def test_parseval(self):
        rng = np.random.default_rng(0)
        x = random_complex(rng, (16, 12))
        assert abs(np.linalg.norm(fft2_unitary(x)) - np.linalg.norm(x)) < 1e-12

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        x = random_complex(rng, (9, 7))
        np.testing.assert_allclose(ifft2_unitary(fft2_unitary(x)), x, atol=1e-12)

    def test_matches_naive_dft(self):
        rng = np.random.default_rng(2)
        x = random_complex(rng, (8, 8))
        np.testing.assert_allclose(fft2_unitary(x), naive_dft2(x), atol=1e-10)


class TestPupil:
    def test_mask_matches_distance_rule(self):
        pup = make_pupil((16, 16), 2, -3, 4.0)
        ky = np.fft.fftfreq(16, 1 / 16).reshape(-1, 1)
        kx = np.fft.fftfreq(16, 1 / 16).reshape(1, -1)
        dky = (ky - (-3) + 8) % 16 - 8
        dkx = (kx - 2 + 8) % 16 - 8
        expected = (dkx**2 + dky**2 <= 16.0).astype(float)
        np.testing.assert_array_equal(pup.mask, expected)

    def test_empty_pupil_rejected(self):
        from cvlangevin.forward import PupilMask

        with pytest.raises(ValueError):
            make_pupil((8, 8), 0, 0, -1.0)
        with pytest.raises(ValueError):
            PupilMask(center_kx=0, center_ky=0, radius=1.0, mask=np.zeros((8, 8)))

    def test_pupils_must_share_grid(self):
        with pytest.raises(ValueError):
            Ptychography(pupils=(all_pass_pupil((8, 8)), all_pass_pupil((16, 16))))


class TestApply:
    def test_identity(self):
        rng = np.random.default_rng(3)
        o = random_complex(rng, (8, 8))
        fields = apply(Identity(), o)
        assert len(fields) == 1
        np.testing.assert_array_equal(fields[0], o)

    def test_all_pass_pupil_is_identity(self):
        rng = np.random.default_rng(4)
        o = random_complex(rng, (16, 16))
        model = Ptychography(pupils=(all_pass_pupil((16, 16)),), rho=1.0)
        np.testing.assert_allclose(apply(model, o)[0], o, atol=1e-12)

    def test_disjoint_pupil_kills_field(self):
        # object with spectrum concentrated at DC; pupil far away
        o = np.ones((32, 32), complex)
        pup = make_pupil((32, 32), 12, 12, 2.0)
        model = Ptychography(pupils=(pup,))
        assert np.abs(apply(model, o)[0]).max() < 1e-14

    def test_field_energy_parseval(self):
        rng = np.random.default_rng(5)
        o = random_complex(rng, (16, 16))
        rho = 0.7
        pup = make_pupil((16, 16), 3, -2, 4.0)
        model = Ptychography(pupils=(pup,), rho=rho)
        u = apply(model, o)[0]
        expected = rho * np.linalg.norm(pup.mask * fft2_unitary(o)) ** 2
        assert abs(np.linalg.norm(u) ** 2 - expected) / expected < 1e-12

    def test_fourier_magnitude_pads(self):
        o = np.ones((4, 4), complex)
        u = apply(FourierMagnitude(pad_factor=2), o)[0]
        assert u.shape == (8, 8)

    def test_dim_mismatch_rejected(self):
        model = Ptychography(pupils=(all_pass_pupil((8, 8)),))
        with pytest.raises(ValueError):
            apply(model, np.ones((4, 4), complex))


class TestAdjoint:
    @pytest.mark.parametrize(
        "model",
        [
            Identity(),
            FourierMagnitude(pad_factor=2),
            Ptychography(
                pupils=tuple(
                    make_pupil((12, 12), cx, cy, 3.0) for cx, cy in [(0, 0), (3, 1), (-2, 4)]
                ),
                rho=0.6,
            ),
        ],
        ids=["identity", "fourier", "ptychography"],
    )
    def test_inner_product_identity(self, model):
        rng = np.random.default_rng(6)
        for _ in range(20):
            o = random_complex(rng, (12, 12))
            fields = apply(model, o)
            v = [random_complex(rng, f.shape) for f in fields]
            lhs = sum(np.vdot(vi, ui) for vi, ui in zip(v, fields))
            rhs = np.vdot(adjoint(model, v), o)
            assert abs(lhs - rhs) / abs(lhs) < 1e-10

    def test_identity_returns_field(self):
        o = np.ones((4, 4), complex) * (2 + 1j)
        np.testing.assert_array_equal(adjoint(Identity(), [o]), o)

    def test_all_pass_pupil_round_trip(self):
        rng = np.random.default_rng(7)
        o = random_complex(rng, (8, 8))
        model = Ptychography(pupils=(all_pass_pupil((8, 8)),), rho=1.0)
        np.testing.assert_allclose(adjoint(model, [o]), o, atol=1e-12)

    def test_wrong_field_count_rejected(self):
        model = Ptychography(pupils=(all_pass_pupil((8, 8)),) * 2)
        with pytest.raises(ValueError):
            adjoint(model, [np.zeros((8, 8), complex)])


class TestIntensity:
    def test_identity_phase_invisible(self):
        rng = np.random.default_rng(8)
        amp = rng.uniform(0, 1, (8, 8))
        phase = rng.uniform(-np.pi, np.pi, (8, 8))
        out = intensity(Identity(), amp * np.exp(1j * phase))[0]
        np.testing.assert_allclose(out, amp**2, atol=1e-14)

    def test_symmetric_real_object_symmetric_spectrum(self):
        rng = np.random.default_rng(9)
        half = rng.uniform(0, 1, (8, 8))
        # even-symmetrize about the origin (cyclic): x[k] = x[-k]
        sym = 0.5 * (half + np.roll(np.flip(half, (0, 1)), (1, 1), axis=(0, 1)))
        out = intensity(FourierMagnitude(pad_factor=1), sym.astype(complex))[0]
        flipped = np.roll(np.flip(out, (0, 1)), (1, 1), axis=(0, 1))
        np.testing.assert_allclose(out, flipped, atol=1e-12)

    def test_total_intensity_parseval(self):
        rng = np.random.default_rng(10)
        o = random_complex(rng, (16, 16))
        rho = 1.3
        pups = tuple(make_pupil((16, 16), c, 0, 3.0) for c in (0, 4))
        model = Ptychography(pupils=pups, rho=rho)
        for pup, intens in zip(pups, intensity(model, o)):
            expected = rho * np.linalg.norm(pup.mask * fft2_unitary(o)) ** 2
            assert abs(intens.sum() - expected) / expected < 1e-12

    def test_global_phase_invariance(self):
        rng = np.random.default_rng(11)
        o = random_complex(rng, (8, 8))
        model = FourierMagnitude(pad_factor=2)
        base = intensity(model, o)[0]
        for theta in (0.3, 1.7, -2.2):
            rotated = intensity(model, o * np.exp(1j * theta))[0]
            np.testing.assert_allclose(rotated, base, rtol=1e-12, atol=1e-14)


class TestLedGrid:
    def test_single_point(self):
        assert build_led_grid(1, 3.5) == [(0.0, 0.0)]

    def test_first_five_points_ordered(self):
        assert build_led_grid(5, 1) == [(0, 0), (1, 0), (0, 1), (-1, 0), (0, -1)]

    def test_89_points_radius_bound(self):
        pts = build_led_grid(89, 1)
        assert len(pts) == 89
        bound = np.sqrt(89 / np.pi) + 1
        assert all(np.hypot(x, y) <= bound for x, y in pts)

    @pytest.mark.parametrize("m", [7, 20, 45])
    def test_matches_brute_force_nearest(self, m):
        pts = build_led_grid(m, 1)
        # brute-force: all lattice points in a generous box, k nearest radii
        grid = [(i, j) for i in range(-12, 13) for j in range(-12, 13)]
        radii = sorted(i * i + j * j for i, j in grid)[:m]
        got = sorted(x * x + y * y for x, y in pts)
        assert got == radii

    def test_spacing_scales(self):
        assert build_led_grid(2, 2.0)[1] == (2.0, 0.0)


class TestPtychographyModel:
    def test_builder_counts(self):
        model = ptychography_model((16, 16), 5, 2.0, 3.0, rho=0.5)
        assert len(model.pupils) == 5
        assert model.rho == 0.5
