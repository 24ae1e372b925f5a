import math

import numpy as np
import pytest

from scaledgp.imaging import (
    BlurOperator,
    CompositeObjective,
    DenseBlurOperator,
    DomainError,
    HSRegularizer,
    PoissonModel,
    SplitGradientScaling,
    build_scaling,
    ellipse_phantom,
    gaussian_psf,
    hs_gradient,
    hs_value,
    kl_gradient,
    kl_value,
    simulate_problem,
    split_gradient,
)
from scaledgp.imaging.io import ImageFormatError, read_image, read_raw, write_image, write_raw
from scaledgp.testing import central_difference_gradient


def _identity_model(data, background=0.0):
    data = np.asarray(data, dtype=float)
    psf = np.zeros((1, 1))
    psf[0, 0] = 1.0
    return PoissonModel(BlurOperator(psf, data.shape), data, background)


class TestOperators:
    def test_adjointness(self, rng):
        op = BlurOperator(rng.uniform(0, 1, (7, 5)), (16, 16))
        for _ in range(10):
            x = rng.standard_normal((16, 16))
            y = rng.standard_normal((16, 16))
            assert abs(np.vdot(op.apply(x), y) - np.vdot(x, op.adjoint(y))) <= 1e-10 * np.abs(x).sum() * np.abs(y).max()

    def test_unit_sum_preserves_constants(self, rng):
        op = BlurOperator(rng.uniform(0, 1, (9, 9)), (20, 12))
        e = np.ones((20, 12))
        assert np.max(np.abs(op.apply(e) - e)) <= 1e-12
        assert np.max(np.abs(op.adjoint(e) - e)) <= 1e-12

    def test_matches_dense(self, rng):
        psf = rng.uniform(0, 1, (5, 3))
        fast = BlurOperator(psf, (16, 16))
        dense = DenseBlurOperator(psf, (16, 16))
        x = rng.standard_normal((16, 16))
        assert np.allclose(fast.apply(x), dense.apply(x), atol=1e-12)
        assert np.allclose(fast.adjoint(x), dense.adjoint(x), atol=1e-12)
        assert np.allclose(fast.to_dense(), dense.matrix, atol=0)

    def test_kernel_larger_than_image(self):
        psf = gaussian_psf(33, 9.0)
        fast = BlurOperator(psf, (16, 16))
        dense = DenseBlurOperator(psf, (16, 16))
        x = np.arange(256.0).reshape(16, 16)
        assert np.allclose(fast.apply(x), dense.apply(x), atol=1e-10)

    def test_delta_kernel_is_identity(self, rng):
        psf = np.zeros((3, 3))
        psf[1, 1] = 1.0
        x = rng.standard_normal((6, 8))
        assert np.allclose(BlurOperator(psf, x.shape).apply(x), x, atol=1e-14)

    def test_shift_kernel(self):
        # mass at offset (+1, 0) from the centre moves the image down one row
        psf = np.zeros((3, 3))
        psf[2, 1] = 1.0
        x = np.zeros((4, 4))
        x[0, 0] = 1.0
        y = BlurOperator(psf, x.shape).apply(x)
        assert y[1, 0] == pytest.approx(1.0)

    def test_rejects_bad_kernels(self):
        with pytest.raises(ValueError):
            BlurOperator(-np.ones((3, 3)), (4, 4))
        with pytest.raises(ValueError):
            BlurOperator(np.zeros((3, 3)), (4, 4))
        with pytest.raises(ValueError):
            DenseBlurOperator(np.ones((3, 3)), (20, 20))

    def test_gaussian_psf(self):
        psf = gaussian_psf(33, 9.0)
        assert psf.shape == (33, 33) and psf.sum() == pytest.approx(1.0)
        assert psf[16, 16] == psf.max()
        r = np.arange(-16, 17)
        assert np.sum(psf.sum(axis=1) * r**2) == pytest.approx(9.0, rel=1e-3)
        with pytest.raises(ValueError):
            gaussian_psf(32)


class TestKL:
    def test_scalar_example(self):
        assert kl_value(_identity_model([[2.0]]), np.array([[1.0]])) == pytest.approx(2 * math.log(2) - 1, rel=1e-14)

    def test_zero_data_convention(self):
        # 0 log 0 = 0, so the term reduces to the model value
        assert kl_value(_identity_model([[0.0, 0.0]]), np.array([[3.0, 0.5]])) == pytest.approx(3.5)

    def test_zero_at_exact_fit(self, rng):
        truth = rng.uniform(1, 5, (8, 8))
        model, _ = simulate_problem(truth, gaussian_psf(5, 1.0), background=2.0, noiseless=True)
        assert abs(kl_value(model, truth)) <= 1e-10
        assert np.max(np.abs(kl_gradient(model, truth))) <= 1e-12

    def test_domain(self):
        m = _identity_model([[1.0, 2.0]])
        with pytest.raises(DomainError):
            kl_value(m, np.array([[-1.0, 1.0]]))
        with pytest.raises(DomainError):
            kl_value(m, np.array([[0.0, 1.0]]))

    def test_gradient_finite_differences(self, rng):
        psf = gaussian_psf(7, 2.0)
        for _ in range(20):
            x = rng.uniform(1, 10, (16, 16))
            data = rng.poisson(BlurOperator(psf, x.shape).apply(x) + 1.0).astype(float)
            model = PoissonModel(BlurOperator(psf, x.shape), data, 1.0)
            fd = central_difference_gradient(lambda z: kl_value(model, z), x)
            g = kl_gradient(model, x)
            assert np.linalg.norm(fd - g) <= 1e-5 * np.linalg.norm(g)

    def test_convexity_along_segments(self, rng):
        model, truth = simulate_problem(ellipse_phantom(16, 50.0), gaussian_psf(5, 1.0), seed=3)
        for _ in range(20):
            a = rng.uniform(0, 60, (16, 16))
            b = rng.uniform(0, 60, (16, 16))
            t = rng.uniform()
            mid = kl_value(model, t * a + (1 - t) * b)
            assert mid <= t * kl_value(model, a) + (1 - t) * kl_value(model, b) + 1e-9


class TestHS:
    def test_constant_image(self):
        assert hs_value(HSRegularizer(0.5), np.full((6, 7), 3.0)) == pytest.approx(42 * 0.5)
        assert np.all(hs_gradient(HSRegularizer(0.5), np.full((6, 7), 3.0)) == 0)

    def test_single_step(self):
        # one horizontal jump of height 1 in a 1x2 periodic image: two differences of size 1
        x = np.array([[0.0, 1.0]])
        assert hs_value(HSRegularizer(1.0), x) == pytest.approx(2 * math.sqrt(2))

    def test_gradient_finite_differences(self, rng):
        reg = HSRegularizer(1.0)
        for _ in range(20):
            x = rng.uniform(0, 10, (16, 16))
            fd = central_difference_gradient(lambda z: hs_value(reg, z), x)
            g = hs_gradient(reg, x)
            assert np.linalg.norm(fd - g) <= 1e-5 * np.linalg.norm(g)

    def test_split_identity(self, rng):
        reg = HSRegularizer(0.3)
        for _ in range(20):
            x = rng.uniform(0, 100, (16, 16))
            x[rng.random((16, 16)) < 0.2] = 0.0
            v, u = split_gradient(reg, x)
            assert np.all(v >= 0) and np.all(u >= 0)
            assert np.max(np.abs((v - u) - hs_gradient(reg, x))) <= 1e-12
            assert np.all(v[x == 0] == 0)

    def test_rho_must_be_positive(self):
        with pytest.raises(ValueError):
            HSRegularizer(0.0)


class TestScaling:
    def test_build_scaling_values(self):
        x = np.array([[2.0, 0.0, 1e9]])
        v = np.array([[1.0, 0.0, 0.0]])
        m = build_scaling(x, 1.0, v, 10.0)
        assert np.allclose(m.diag, [[1.0, 0.1, 10.0]])

    def test_provider_matches_build_scaling(self, rng):
        reg = HSRegularizer(1.0)
        x = rng.uniform(0, 5, (8, 8))
        v, _ = split_gradient(reg, x)
        raw = SplitGradientScaling(reg, 0.2)(x, None)
        assert np.allclose(build_scaling(x, 0.2, v, 1e3).diag, np.clip(raw, 1e-3, 1e3))
        assert np.array_equal(SplitGradientScaling(reg, 0.0)(x, None), x)

    def test_domain(self):
        with pytest.raises(DomainError):
            build_scaling(np.array([-1.0]), 1.0, np.zeros(1), 2.0)


class TestComposite:
    def test_value_and_gradient_consistent(self, rng):
        model, _ = simulate_problem(ellipse_phantom(16, 80.0), gaussian_psf(5, 1.0), seed=1)
        obj = CompositeObjective(model, HSRegularizer(1.0), 0.05)
        x = rng.uniform(1, 50, (16, 16))
        f, g = obj.value_and_gradient(x)
        assert f == pytest.approx(kl_value(model, x) + 0.05 * hs_value(HSRegularizer(1.0), x), rel=1e-13)
        assert obj.value(x) == pytest.approx(f, rel=1e-14)
        assert np.allclose(g, kl_gradient(model, x) + 0.05 * hs_gradient(HSRegularizer(1.0), x), rtol=1e-12, atol=1e-12)
        with pytest.raises(ValueError):
            CompositeObjective(model, HSRegularizer(1.0), -1.0)


class TestSimulation:
    def test_poisson_statistics(self):
        mean = np.full((64, 64), 40.0)
        psf = np.ones((1, 1))
        model, _ = simulate_problem(mean - 5.0, psf, background=5.0, seed=11)
        g = model.data
        assert np.all(g == np.round(g))
        # sample mean and variance of 4096 Poisson(40) draws
        assert abs(g.mean() - 40.0) < 4 * math.sqrt(40.0 / g.size)
        assert abs(g.var() / 40.0 - 1) < 0.1

    def test_seeded(self):
        truth = ellipse_phantom(16)
        a, _ = simulate_problem(truth, seed=5)
        b, _ = simulate_problem(truth, seed=5)
        c, _ = simulate_problem(truth, seed=6)
        assert np.array_equal(a.data, b.data) and not np.array_equal(a.data, c.data)

    def test_scale_factor(self):
        truth = ellipse_phantom(16, 100.0)
        model, scaled = simulate_problem(truth, scale=3.0, background=10.0, noiseless=True)
        assert model.background == 30.0
        assert np.allclose(scaled, 3.0 * truth)
        assert np.allclose(model.data, model.forward(scaled))

    def test_phantom(self):
        p = ellipse_phantom(64, 500.0)
        assert p.shape == (64, 64) and p.min() == 0.0 and p.max() == pytest.approx(500.0)


class TestIO:
    def test_raw_round_trip(self, tmp_path, rng):
        img = rng.standard_normal((5, 9))
        write_image(tmp_path / "a.sgi", img)
        assert np.array_equal(read_image(tmp_path / "a.sgi"), img)

    def test_raw_header(self, tmp_path):
        write_raw(tmp_path / "a.sgi", np.zeros((2, 3)))
        blob = (tmp_path / "a.sgi").read_bytes()
        assert blob[:8] == b"SGPIMG\x00\x01" and len(blob) == 16 + 48

    def test_raw_corrupt(self, tmp_path):
        (tmp_path / "bad.sgi").write_bytes(b"NOTANIMAGE" * 3)
        with pytest.raises(ImageFormatError):
            read_raw(tmp_path / "bad.sgi")
        write_raw(tmp_path / "t.sgi", np.zeros((2, 2)))
        (tmp_path / "t.sgi").write_bytes((tmp_path / "t.sgi").read_bytes()[:-1])
        with pytest.raises(ImageFormatError):
            read_raw(tmp_path / "t.sgi")

    def test_pgm_round_trip(self, tmp_path):
        img = np.arange(12.0).reshape(3, 4)
        write_image(tmp_path / "a.pgm", img)
        back = read_image(tmp_path / "a.pgm")
        assert back.shape == (3, 4)
        assert np.allclose(back / 65535.0 * 11.0, img, atol=1e-3)
