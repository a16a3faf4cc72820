"""Space-time models, causal curves, and the weighted proper-time maximizer."""

import numpy as np
import pytest

from twosheet.geometry import (
    CausalCurve,
    DomainError,
    InvalidCurveError,
    MixedState,
    NotRelatedError,
    SpacetimeModel,
    cumulative_weighted_length,
    is_causally_related,
    max_weighted_length,
    single_source_field,
    straight_curve,
    validate_curve,
    weighted_length,
)


def flat2(mass=1.0, box=5.0):
    return SpacetimeModel.minkowski(2, mass=mass,
                                    box=[[-box, box], [-box, box]])


def flat4(mass=1.0, box=3.0):
    return SpacetimeModel.minkowski(4, mass=mass, box=[[-box, box]] * 4)


# ---------------------------------------------------------------------------
# models


def test_minkowski_defaults():
    m = flat2()
    assert m.dimension == 2
    assert m.metric_kind == "minkowski"
    assert m.mass_kind == "constant"
    assert m.resolutions["time_steps"] == 401
    assert m.resolutions["certification"] == 101


def test_certification_default_depends_on_dimension():
    assert flat4().resolutions["certification"] == 17


def test_domain_checks():
    m = flat2(box=1.0)
    assert m.in_domain([0.5, -0.5])
    assert not m.in_domain([1.5, 0.0])
    with pytest.raises(DomainError):
        m.require_in_domain([0.0, 2.0])


def test_bad_box_rejected():
    with pytest.raises(ValueError):
        SpacetimeModel.minkowski(2, mass=1.0, box=[[1.0, -1.0], [0.0, 1.0]])


def test_mixed_state_range():
    MixedState([0.0, 0.0], 0.0)
    MixedState([0.0, 0.0], 1.0)
    with pytest.raises(ValueError):
        MixedState([0.0, 0.0], 1.5)


def test_conformal_factor_must_be_positive():
    m = SpacetimeModel.conformal("t - 10", mass=1.0,
                                 box=[[-1, 1], [-1, 1]])
    with pytest.raises(ValueError):
        m.validate()


def test_scalar_weight_magnitude():
    m = SpacetimeModel.minkowski(2, mass=1.0)
    m.mass_kind = "scalar"
    from twosheet.expressions import parse_expression
    m.mass_field = parse_expression("1 + t")
    pts = np.array([[0.0, 0.0], [2.0, 1.0], [-3.0, 0.0]])
    np.testing.assert_allclose(m.weight(pts), [1.0, 3.0, 2.0])


def test_diagonal_weight_rejected_but_mass_vanishes():
    m = SpacetimeModel.minkowski(2, mass=1.0)
    m.mass_kind = "diagonal"
    pts = np.array([[0.0, 0.0]])
    assert m.mass_at(pts)[0] == 0.0
    with pytest.raises(ValueError):
        m.weight(pts)


# ---------------------------------------------------------------------------
# curves and lengths


def test_straight_curve_endpoints():
    c = straight_curve([0.0, 0.0], [2.0, 1.0], n=33)
    np.testing.assert_allclose(c.points[0], [0.0, 0.0])
    np.testing.assert_allclose(c.points[-1], [2.0, 1.0])
    assert c.ts.shape == (33,)


def test_weighted_length_flat_straight_is_proper_time():
    m = flat2(mass=2.0)
    c = straight_curve([0.0, 0.0], [2.0, 1.0])
    # proper time sqrt(4 - 1), weight |m| = 2
    assert weighted_length(c, m) == pytest.approx(2.0 * np.sqrt(3.0), rel=1e-12)


def test_weighted_length_complex_mass_uses_magnitude():
    m = flat2(mass=3.0 + 4.0j)
    c = straight_curve([0.0, 0.0], [1.0, 0.0])
    assert weighted_length(c, m) == pytest.approx(5.0, rel=1e-12)


def test_conformal_length_scales_inversely_with_frame_factor():
    # the factor scales the frame, e_a = Omega d_a, so g = Omega^-2 eta and
    # proper times divide by Omega
    m = SpacetimeModel.conformal("2", mass=1.0, box=[[-5, 5], [-5, 5]])
    c = straight_curve([0.0, 0.0], [1.0, 0.0])
    assert weighted_length(c, m) == pytest.approx(0.5, rel=1e-12)


def test_spacelike_curve_rejected():
    m = flat2()
    c = straight_curve([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(InvalidCurveError):
        weighted_length(c, m)
    report = validate_curve(c, m)
    assert not report.causal_flags.all()


def test_backward_curve_rejected():
    m = flat2()
    c = straight_curve([0.0, 0.0], [-1.0, 0.0])
    with pytest.raises(InvalidCurveError):
        weighted_length(c, m)


def test_too_few_samples_rejected():
    m = flat2()
    c = straight_curve([0.0, 0.0], [1.0, 0.0], n=5)
    with pytest.raises(InvalidCurveError):
        weighted_length(c, m)


def test_cumulative_length_monotone_and_consistent():
    m = flat2()
    c = straight_curve([0.0, 0.0], [2.0, 0.5])
    cum = cumulative_weighted_length(c, m)
    assert cum[0] == 0.0
    assert np.all(np.diff(cum) >= 0)
    assert cum[-1] == pytest.approx(weighted_length(c, m), rel=1e-9)


def test_reparameterization_invariance():
    m = flat2()
    ts = np.linspace(0.0, 1.0, 201)
    warped = ts + 0.2 * np.sin(np.pi * ts) * ts * (1 - ts)
    pts = np.stack([2.0 * warped, 0.7 * warped], axis=-1)
    plain = straight_curve([0.0, 0.0], [2.0, 0.7], n=201)
    bent = CausalCurve.from_samples(ts, pts)
    assert weighted_length(bent, m) == pytest.approx(weighted_length(plain, m),
                                                     abs=1e-8)


# ---------------------------------------------------------------------------
# causal relation and maximization


@pytest.mark.parametrize("q,related", [
    ([2.0, 0.0], True),
    ([1.0, 1.0], True),     # null
    ([1.0, 1.5], False),    # spacelike
    ([-1.0, 0.0], False),   # past
])
def test_flat_relation(q, related):
    m = flat2()
    assert is_causally_related([0.0, 0.0], q, m) is related


def test_conformal_relation_matches_flat_cone():
    # a conformal factor rescales the metric without moving the light cones
    m = SpacetimeModel.conformal("1 + 0.3*sin(t)*cos(x)", mass=1.0,
                                 box=[[-3, 3], [-3, 3]])
    rng = np.random.default_rng(42)
    for _ in range(50):
        p = rng.uniform(-2, 2, 2)
        q = rng.uniform(-2, 2, 2)
        flat = (q[0] - p[0]) >= abs(q[1] - p[1])
        assert is_causally_related(p, q, m) == flat


def test_max_weighted_length_flat_closed_form():
    m = flat2(mass=1.5)
    val = max_weighted_length([0.0, 0.0], [2.0, 1.0], m)
    assert val == pytest.approx(1.5 * np.sqrt(3.0), rel=1e-12)


def test_max_weighted_length_not_related():
    m = flat2()
    with pytest.raises(NotRelatedError):
        max_weighted_length([0.0, 0.0], [0.5, 2.0], m)


def test_dp_lower_bounds_closed_form():
    m = flat2()
    for q in ([2.0, 0.0], [3.0, 1.0], [1.5, -0.5]):
        closed = max_weighted_length([0.0, 0.0], q, m, method="closed")
        dp = max_weighted_length([0.0, 0.0], q, m, method="dp")
        assert dp <= closed + 1e-9
        assert dp >= closed - 2e-3


def test_closed_method_demands_flat_constant():
    m = SpacetimeModel.conformal("1 + 0.1*t", mass=1.0,
                                 box=[[-3, 3], [-3, 3]])
    with pytest.raises(ValueError):
        max_weighted_length([0.0, 0.0], [1.0, 0.0], m, method="closed")


def test_return_curve_is_admissible_and_matches():
    m = SpacetimeModel.conformal("1 + 0.2*cos(x)", mass=1.0,
                                 box=[[-3, 3], [-3, 3]])
    val, curve = max_weighted_length([-1.0, 0.0], [1.5, 0.3], m, return_curve=True)
    assert weighted_length(curve, m) == pytest.approx(val, rel=1e-9)
    report = validate_curve(curve, m)
    assert report.causal_flags.all()
    assert report.future_flags.all()


def test_single_source_field_is_certified_lower_bound():
    # raw node values bound the supremum from below (they quantize slopes and
    # lose the diagonal segments); the pointwise solver then refines
    m = SpacetimeModel.conformal("1 + 0.15*sin(x)", mass=1.0,
                                 box=[[-2, 2], [-2, 2]],
                                 resolutions={"time_steps": 101, "space_steps": 101})
    p = [-1.0, 0.0]
    field = single_source_field(m, p, 1.8)
    for q in ([0.5, 0.3], [1.5, -0.4], [-0.5, 0.2]):
        best = max_weighted_length(p, q, m)
        node = field.value_at(q[0], q[1] - p[1])
        assert 0.0 < node <= best + 1e-9
    # spacelike-separated column stays unreachable
    assert field.value_at(-0.9, 1.5) == -np.inf


def test_single_source_field_path_extraction():
    m = flat2()
    field = single_source_field(m, [0.0, 0.0], 2.0, time_steps=81)
    i, j = field.node_index(2.0, 0.5)
    path = field.extract_path(i, j)
    np.testing.assert_allclose(path[0], [0.0, 0.0], atol=1e-12)
    assert abs(path[-1][0] - 2.0) < 1e-9
    assert np.all(np.diff(path[:, 0]) > 0)


def test_4d_closed_form():
    m = flat4(mass=1.0)
    val = max_weighted_length([0.0, 0.0, 0.0, 0.0], [2.0, 1.0, 0.5, 0.5], m)
    assert val == pytest.approx(np.sqrt(4.0 - 1.5), rel=1e-12)
