"""Random certified cone elements and the Monte-Carlo consistency check."""

from types import SimpleNamespace

import numpy as np
import pytest

from twosheet.causality import decide
from twosheet.clifford import make_representation
from twosheet.cone import certification_grid, is_causal_element, pointwise_min_eigenvalues
from twosheet.geometry import MixedState, SpacetimeModel
from twosheet.oracle import mc_check, sample_causal_elements, thread_count

REP2 = make_representation(2)


@pytest.fixture(scope="module")
def model():
    return SpacetimeModel.minkowski(2, mass=1.0, box=[[-2, 2], [-2, 2]])


@pytest.fixture(scope="module")
def elements(model):
    return sample_causal_elements(model, 12, 99)


# ---------------------------------------------------------------------------
# sampling


def test_sampling_is_deterministic(model, elements):
    again = sample_causal_elements(model, 12, 99)
    assert len(again) == len(elements)
    for x, y in zip(elements, again):
        assert x.min_eigenvalue == y.min_eigenvalue
        for key in ("centers", "widths", "waves", "phases", "amp_a", "amp_b"):
            np.testing.assert_array_equal(x.construction[key], y.construction[key])
        assert x.construction["shrink"] == y.construction["shrink"]


def test_sampling_ignores_worker_count(model, elements, monkeypatch):
    monkeypatch.setenv("TWOSHEET_THREADS", "4")
    threaded = sample_causal_elements(model, 12, 99)
    for x, y in zip(elements, threaded):
        assert x.construction["shrink"] == y.construction["shrink"]
        np.testing.assert_array_equal(x.construction["amp_a"], y.construction["amp_a"])


def test_every_element_is_certified_on_its_grid(model, elements):
    for el in elements:
        assert el.min_eigenvalue >= -1e-9
        res = is_causal_element(el.pair, model, REP2, grid=el.certified_grid)
        assert res.passed


def test_certificates_survive_grid_refinement(model, elements):
    fine = certification_grid(model, per_axis=201)  # 2x the sampling grid
    for el in elements:
        assert pointwise_min_eigenvalues(el.pair, fine, model, REP2).min() >= -1e-9


def test_shrink_only_reduces_amplitudes(elements):
    for el in elements:
        assert 0.0 < el.construction["shrink"] <= 1.0


def test_zero_amplitude_draw_degenerates_to_time(model):
    els = sample_causal_elements(model, 3, 99, amplitude=0.0)
    pq = np.array([[0.3, -0.5], [1.1, 0.2]])
    for el in els:
        assert el.construction["shrink"] == 1.0
        np.testing.assert_array_equal(el.pair.a.value(pq), pq[:, 0])
        np.testing.assert_array_equal(el.pair.b.value(pq), pq[:, 0])


def test_sampling_rejections(model):
    with pytest.raises(ValueError):
        sample_causal_elements(model, 0, 1)
    diag = SpacetimeModel.minkowski(2, mass=1.0)
    diag.mass_kind = "diagonal"
    with pytest.raises(ValueError):
        sample_causal_elements(diag, 3, 1)


def test_4d_sampling_certifies_on_its_grid():
    m4 = SpacetimeModel.minkowski(4, mass=1.0, box=[[-1.5, 1.5]] * 4)
    grid = certification_grid(m4, per_axis=7)
    els = sample_causal_elements(m4, 2, 7, grid=grid)
    rep4 = make_representation(4)
    for el in els:
        assert pointwise_min_eigenvalues(el.pair, el.certified_grid, m4,
                                         rep4).min() >= -1e-9


# ---------------------------------------------------------------------------
# consistency checks


def test_identical_states_evaluate_to_exact_zero(model, elements):
    s = MixedState(np.array([0.37, -0.41]), 0.618)
    dec = decide(s, s, model)
    verdict = mc_check(s, s, elements, dec, model=model)
    assert verdict.kind == "consistent"
    assert verdict.min_value == 0.0
    assert verdict.checked == len(elements)


def test_related_pair_is_consistent(model, elements):
    s1, s2 = ((0.0, 0.0), 0.0), ((1.8, 0.1), 1.0)
    dec = decide(s1, s2, model)
    assert dec.related
    verdict = mc_check(s1, s2, elements, dec, model=model)
    assert verdict.kind == "consistent" and verdict.consistent
    assert verdict.min_value >= -1e-9


def test_fabricated_related_decision_is_contradicted(model, elements):
    # past-directed pair: every monotone element strictly decreases
    s1, s2 = ((1.0, 0.0), 0.2), ((0.0, 0.0), 0.2)
    fake = SimpleNamespace(related=True, base_related=True)
    verdict = mc_check(s1, s2, elements, fake, model=model)
    assert verdict.kind == "contradiction"
    assert not verdict.consistent
    assert verdict.min_value < -0.5
    assert verdict.min_element is not None


def test_not_related_pair_gets_explicit_witness(model, elements):
    s1, s2 = ((0.0, 0.0), 0.0), ((1.0, 0.0), 1.0)  # too short for a full swap
    dec = decide(s1, s2, model)
    assert dec.base_related and not dec.related
    verdict = mc_check(s1, s2, elements, dec, model=model)
    assert verdict.kind == "witness_separates"
    assert verdict.witness_margin > 1e-6


def test_witness_unavailable_paths(model, elements):
    spacelike = decide(((0.0, 0.0), 0.1), ((0.2, 1.5), 0.9), model)
    v1 = mc_check(((0.0, 0.0), 0.1), ((0.2, 1.5), 0.9), elements, spacelike, model=model)
    assert v1.kind == "witness_unavailable"

    s1, s2 = ((0.0, 0.0), 0.0), ((1.0, 0.0), 1.0)
    v2 = mc_check(s1, s2, elements, decide(s1, s2, model))  # no model given
    assert v2.kind == "witness_unavailable"
    assert "model" in v2.note

    null = decide(((0.0, 0.0), 0.1), ((1.0, 1.0), 0.9), model)
    v3 = mc_check(((0.0, 0.0), 0.1), ((1.0, 1.0), 0.9), elements, null, model=model)
    assert v3.kind == "witness_unavailable"  # no timelike curve to build along


# ---------------------------------------------------------------------------
# worker cap


def test_thread_count_respects_env(monkeypatch):
    monkeypatch.setenv("TWOSHEET_THREADS", "3")
    assert thread_count(10) == 3
    assert thread_count(2) == 2
    monkeypatch.setenv("TWOSHEET_THREADS", "abc")
    with pytest.raises(ValueError):
        thread_count(4)
    monkeypatch.delenv("TWOSHEET_THREADS")
    assert thread_count(1) == 1
    assert thread_count(10**6) >= 1
