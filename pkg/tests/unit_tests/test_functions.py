import math

import numpy as np
import pytest

from honeycomb.functions import SmoothTestFunction, SourceSpec, smooth_step


def test_smooth_step_values() -> None:
    assert smooth_step(-1.0) == 0.0
    assert smooth_step(0.0) == 0.0
    assert smooth_step(0.5) == pytest.approx(0.5)
    assert smooth_step(1.0) == 1.0
    assert smooth_step(3.0) == 1.0


def test_cutoff_plateau_and_support() -> None:
    phi = SmoothTestFunction.named("cos")
    assert phi(0.0, 0.0, 0.0) == pytest.approx(1.0)
    assert phi(0.3, 0.0, 0.0) == pytest.approx(math.cos(0.3 * math.pi))
    assert phi(0.46, 0.1, 0.1) == 0.0
    assert phi(0.5, 0.0, 0.0) == 0.0
    const = SmoothTestFunction.constant()
    assert const.with_cutoff(False)(0.5, 0.5, 0.5) == 1.0


@pytest.mark.parametrize("label", ["const", "x0", "x1", "x2", "cos", "mixed"])
@pytest.mark.parametrize("cutoff", [True, False])
def test_gradient_matches_central_differences(label: str, cutoff: bool) -> None:
    phi = SmoothTestFunction.named(label, cutoff=cutoff)
    pts = np.random.default_rng(5).uniform(-0.44, 0.44, size=(20, 3))
    h = 1e-6
    x, y, z = pts.T
    grad = phi.gradient(x, y, z)
    for axis in range(3):
        step = np.zeros(3)
        step[axis] = h
        plus = phi(*(pts + step).T)
        minus = phi(*(pts - step).T)
        assert np.allclose(grad[axis], (plus - minus) / (2 * h), atol=1e-6)


def test_sup_gradient() -> None:
    assert SmoothTestFunction.coordinate(0, cutoff=False).sup_gradient == pytest.approx(1.0)
    cos = SmoothTestFunction.cosine_product(cutoff=False)
    # |grad| of prod cos(pi x_i) peaks on the cube's faces, e.g. at (1/2, 0, 0)
    assert cos.sup_gradient == pytest.approx(math.pi, rel=1e-3)


def test_named_labels() -> None:
    assert SmoothTestFunction.named("const:2.5")(0.0, 0.0, 0.0) == pytest.approx(2.5)
    assert [str(f) for f in SmoothTestFunction.battery()] == ["const", "x0", "x1", "x2", "cos", "mixed"]
    with pytest.raises(ValueError, match="unknown test function"):
        SmoothTestFunction.named("sinh")


def test_cutoff_radii_are_validated() -> None:
    with pytest.raises(ValueError, match="cutoff radii"):
        SmoothTestFunction(terms=(), rho=(0.4, 0.3))


def test_source_spec() -> None:
    f = SourceSpec.cosine(2.0)
    assert f.is_separable_cosine
    assert f(0.0, 0.0, 0.0) == pytest.approx(2.0)
    assert f.scaled(3.0).value == 6.0
    assert str(f) == "cosine:2.0"
    assert SourceSpec.constant(1.5)(np.zeros(4), 0.0, 0.0).tolist() == [1.5] * 4
    smooth = SourceSpec.smooth(SmoothTestFunction.named("x0", cutoff=False)).scaled(2.0)
    assert smooth(0.25, 0.0, 0.0) == pytest.approx(0.5)
    with pytest.raises(ValueError, match="needs a test function"):
        SourceSpec("smooth")
