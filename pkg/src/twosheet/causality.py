"""Causal-relation decisions between mixed states on a two-sheeted space-time.

A mixed state sits at a space-time point with an internal coordinate xi in [0, 1].
Moving between internal coordinates costs weighted proper time: the states are
related iff the base points are causally related and the maximal weighted length
of a connecting curve reaches |arcsin(sqrt(phi)) - arcsin(sqrt(xi))|.  Decisions
report both legs, the achieved/required budget, and the comparison method.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .expressions import Expression, parse_expression
from .geometry import (
    CONE_TOL,
    DomainError,
    MixedState,
    SpacetimeModel,
    is_causally_related,
    max_weighted_length,
    single_source_field,
    _segment_values,
)

__all__ = [
    "CausalDecision",
    "ConeSurface",
    "COMPARISON_TOL",
    "CLOSED_DECISION_TOL",
    "DP_DECISION_TOL",
    "internal_gap",
    "required_proper_time",
    "decide",
    "future_cone",
    "fluctuate",
    "diagonal_mass_decide",
]

COMPARISON_TOL = 1e-9       # inclusive threshold comparison: float-noise slack only
CLOSED_DECISION_TOL = 1e-9  # marginal band around the threshold, closed-form values
DP_DECISION_TOL = 2e-3      # marginal band for lattice lower bounds


@dataclass
class CausalDecision:
    """Outcome of a relation query between two mixed states.

    required/achieved are proper times for constant mass and weighted lengths for
    scalar weights; related is the inclusive comparison AND the base relation.
    Lattice achieved values are certified lower bounds, so the comparison itself
    only absorbs float noise; marginal flags decisions whose margin is inside the
    method's uncertainty band and therefore could sit on either side in truth.
    """

    related: bool
    base_related: bool
    required: float
    achieved: float
    slack: float
    method: str
    marginal: bool = False
    band: float = CLOSED_DECISION_TOL


def _as_state(state) -> MixedState:
    if isinstance(state, MixedState):
        return state
    point, xi = state
    return MixedState(point=point, xi=xi)


def internal_gap(xi: float, phi: float) -> float:
    """|arcsin(sqrt(phi)) - arcsin(sqrt(xi))| — the internal budget to spend."""
    for v in (xi, phi):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"internal coordinate {v!r} outside [0, 1]")
    return float(abs(np.arcsin(np.sqrt(phi)) - np.arcsin(np.sqrt(xi))))


def required_proper_time(xi: float, phi: float, model: SpacetimeModel) -> float:
    """Minimal budget between internal coordinates xi and phi under the model.

    Constant mass m: gap / |m| (proper time); m = 0 with xi != phi means the sheets
    never communicate — infinite threshold.  Scalar weight: the gap itself, to be
    compared with the weighted length.  Diagonal internal operator: 0 when xi == phi,
    infinite otherwise.
    """
    gap = internal_gap(xi, phi)
    if model.mass_kind == "diagonal":
        return 0.0 if xi == phi else np.inf
    if model.mass_kind == "scalar":
        return gap
    am = abs(model.mass)
    if am == 0.0:
        return 0.0 if gap == 0.0 else np.inf
    return gap / am


def _resolve_method(model: SpacetimeModel, method: str) -> str:
    if method not in ("auto", "closed", "dp"):
        raise ValueError(f"unknown method {method!r}")
    closed_available = model.metric_kind == "minkowski" and model.mass_kind == "constant"
    if method == "auto":
        return "closed" if closed_available else "dp"
    if method == "closed" and not closed_available:
        raise ValueError("closed form needs a flat metric with constant mass")
    return method


def decide(state1, state2, model: SpacetimeModel, *, method: str = "auto",
           tol: Optional[float] = None) -> CausalDecision:
    """Is state1 in the causal past of state2?

    related = base relation on the manifold AND achieved budget >= required budget
    (inclusive, within the method tolerance).  Null-separated points achieve 0, so
    distinct internal coordinates across a null gap are never related.
    """
    s1 = _as_state(state1)
    s2 = _as_state(state2)
    model.require_in_domain(s1.point, s2.point)
    base = is_causally_related(s1.point, s2.point, model)

    if model.mass_kind == "diagonal":
        return _diagonal_decision(s1, s2, base)

    used = _resolve_method(model, method)
    band = tol if tol is not None else (
        CLOSED_DECISION_TOL if used == "closed" else DP_DECISION_TOL)
    required = required_proper_time(s1.xi, s2.xi, model)

    achieved = 0.0
    if base:
        weighted = max_weighted_length(s1.point, s2.point, model, method=used)
        if model.mass_kind == "constant":
            am = abs(model.mass)
            achieved = weighted / am if am > 0 else 0.0
        else:
            achieved = weighted

    related = bool(base and achieved >= required - COMPARISON_TOL)
    marginal = bool(base and np.isfinite(required) and abs(achieved - required) <= band)
    return CausalDecision(related=related, base_related=base, required=float(required),
                          achieved=float(achieved), slack=float(achieved - required),
                          method=used, marginal=marginal, band=band)


def _diagonal_decision(s1: MixedState, s2: MixedState, base: bool) -> CausalDecision:
    required = 0.0 if s1.xi == s2.xi else np.inf
    related = bool(base and s1.xi == s2.xi)
    return CausalDecision(related=related, base_related=base, required=required,
                          achieved=0.0, slack=-required if required > 0 else 0.0,
                          method="diagonal", marginal=False, band=0.0)


def diagonal_mass_decide(state1, state2, model: SpacetimeModel) -> CausalDecision:
    """Exact decision for a diagonal internal operator: related iff xi == phi and p precedes q."""
    if model.mass_kind != "diagonal":
        raise ValueError("model is not flagged diagonal")
    s1 = _as_state(state1)
    s2 = _as_state(state2)
    model.require_in_domain(s1.point, s2.point)
    base = is_causally_related(s1.point, s2.point, model)
    return _diagonal_decision(s1, s2, base)


# ---------------------------------------------------------------------------
# cone surfaces


@dataclass
class ConeSurface:
    """phi_max over a grid of target points: the largest reachable internal coordinate.

    Unreachable targets carry phi_max = nan and reachable = False.  validation is the
    record of the closed-form-vs-decide confirmation (closed method only).
    """

    state: MixedState
    points: np.ndarray         # (N, n)
    weighted: np.ndarray       # (N,) best weighted length to each target
    phi_max: np.ndarray        # (N,)
    reachable: np.ndarray      # (N,) bool
    method: str
    grid_shape: Optional[Tuple[int, ...]] = None
    validation: Optional[Dict[str, float]] = None


def _phi_max_from_budget(xi: float, weighted: np.ndarray) -> np.ndarray:
    u = np.minimum(0.5 * np.pi, np.arcsin(np.sqrt(xi)) + weighted)
    return np.sin(u) ** 2


def _target_grid(model: SpacetimeModel, grid) -> Tuple[np.ndarray, Optional[Tuple[int, ...]]]:
    if grid is None:
        nt = int(model.resolutions["time_steps"])
        nx = int(model.resolutions["space_steps"])
        axes = [np.linspace(*model.domain_box[0], nt)]
        axes += [np.linspace(*model.domain_box[k], nx) for k in range(1, model.dimension)]
    elif isinstance(grid, (tuple, list)) and np.asarray(grid[0]).ndim == 1:
        axes = [np.asarray(a, dtype=float) for a in grid]
        if len(axes) != model.dimension:
            raise ValueError(f"grid needs {model.dimension} axes")
    else:
        pts = np.asarray(grid, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != model.dimension:
            raise ValueError("grid must be axes or an (N, n) point array")
        return pts, None
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    shape = mesh.shape[:-1]
    return mesh.reshape(-1, model.dimension), shape


def _closed_cone_budget(model: SpacetimeModel, p: np.ndarray,
                        pts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    dt = pts[:, 0] - p[0]
    r = np.linalg.norm(pts[:, 1:] - p[1:], axis=-1)
    reach = (dt >= -CONE_TOL) & (r <= dt + CONE_TOL)
    weighted = abs(model.mass) * np.sqrt(np.clip(dt * dt - r * r, 0.0, None))
    return weighted, reach


def _chord_budget(model: SpacetimeModel, p: np.ndarray, pts: np.ndarray,
                  segments: int = 32, chunk: int = 4096) -> Tuple[np.ndarray, np.ndarray]:
    """Straight-chord weighted lengths p -> target, with admissibility mask."""
    fr = np.linspace(0.0, 1.0, segments + 1)
    vals = np.empty(len(pts))
    ok = np.empty(len(pts), dtype=bool)
    nsub = int(model.resolutions["quadrature"])
    for s in range(0, len(pts), chunk):
        block = pts[s:s + chunk]
        nodes = p[None, None, :] + fr[None, :, None] * (block - p)[:, None, :]
        v, m = _segment_values(model, nodes[:, :-1], nodes[:, 1:], nsub=nsub, need_mask=True)
        vals[s:s + chunk] = np.sum(v, axis=-1)
        ok[s:s + chunk] = np.all(m, axis=-1)
    return vals, ok


def _dp_cone_budget(model: SpacetimeModel, p: np.ndarray, pts: np.ndarray,
                    time_steps: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    if model.metric_kind == "vielbein4d":
        raise NotImplementedError(
            "cone surfaces need a 1+1 lattice; evaluate decide per target in 4D")
    dt = pts[:, 0] - p[0]
    r = np.abs(pts[:, 1] - p[1])
    reach = (dt >= -CONE_TOL) & (r <= dt + CONE_TOL)

    chord_vals, chord_ok = _chord_budget(model, p, pts)
    weighted = np.where(reach & chord_ok, chord_vals, -np.inf)

    t_max = float(np.max(pts[:, 0]))
    if t_max > p[0] + 1e-9:
        fld = single_source_field(model, p, t_max, time_steps=time_steps)
        ht = fld.ts[1] - fld.ts[0] if len(fld.ts) > 1 else 1.0
        hx = fld.sigmas[1] - fld.sigmas[0] if len(fld.sigmas) > 1 else 1.0
        ii = np.clip(np.round((pts[:, 0] - fld.ts[0]) / ht).astype(int), 0, len(fld.ts) - 1)
        jj = np.clip(np.round((pts[:, 1] - p[1] - fld.sigmas[0]) / hx).astype(int),
                     0, len(fld.sigmas) - 1)
        node_vals = fld.value[ii, jj]
        weighted = np.maximum(weighted, np.where(reach, node_vals, -np.inf))

    weighted = np.where(reach, np.maximum(weighted, 0.0), weighted)
    return weighted, reach


def _validate_closed_cone(state: MixedState, model: SpacetimeModel, pts: np.ndarray,
                          weighted: np.ndarray, reach: np.ndarray,
                          samples: int) -> Dict[str, float]:
    """Conjecture check: the inverted formula must agree with decide at the surface.

    For a deterministic subsample of strictly timelike reachable targets, decide must
    say related just below phi_max and not related just above it (when phi_max < 1).
    """
    u_xi = float(np.arcsin(np.sqrt(state.xi)))
    idx = np.flatnonzero(reach & (weighted > 1e-6))
    if len(idx) == 0:
        return {"checked": 0.0, "passed": 1.0}
    sel = idx[np.linspace(0, len(idx) - 1, min(samples, len(idx))).astype(int)]
    checked = 0
    for k in np.unique(sel):
        q = pts[k]
        u = min(0.5 * np.pi, u_xi + weighted[k])
        below = np.sin(max(u - 1e-7, 0.0)) ** 2
        dec = decide(state, MixedState(q, below), model, method="closed")
        if not dec.related:
            raise RuntimeError(
                f"cone conjecture failed at {q.tolist()}: phi just below "
                f"{np.sin(u) ** 2:.12g} not reachable per decide")
        if u < 0.5 * np.pi - 1e-6:
            above = np.sin(u + 1e-6) ** 2
            dec = decide(state, MixedState(q, above), model, method="closed")
            if dec.related:
                raise RuntimeError(
                    f"cone conjecture failed at {q.tolist()}: phi above the surface "
                    "still reachable per decide")
        checked += 1
    return {"checked": float(checked), "passed": 1.0, "probe": 1e-6}


def future_cone(state, model: SpacetimeModel, grid=None, *, method: str = "auto",
                validate: int = 12, time_steps: Optional[int] = None) -> ConeSurface:
    """Largest reachable internal coordinate over a grid of target points.

    For each target q with p preceding q, phi_max = sin^2(min(pi/2, arcsin(sqrt(xi))
    + best weighted length)); on the null boundary the budget is 0, so phi_max = xi.
    The closed form is confirmed against decide on a subsample before being returned.
    """
    st = _as_state(state)
    model.require_in_domain(st.point)
    if model.mass_kind == "diagonal":
        raise ValueError("a diagonal internal operator admits no internal motion; "
                         "the surface is phi = xi on the base cone")
    pts, shape = _target_grid(model, grid)
    if not bool(np.all(model.in_domain(pts))):
        raise DomainError("cone grid extends outside the model domain box")

    used = _resolve_method(model, method)
    if used == "closed":
        weighted, reach = _closed_cone_budget(model, st.point, pts)
    else:
        weighted, reach = _dp_cone_budget(model, st.point, pts, time_steps)
        reach = reach & np.isfinite(weighted)

    phi = np.where(reach, _phi_max_from_budget(st.xi, np.where(reach, weighted, 0.0)), np.nan)
    validation = None
    if used == "closed" and validate:
        validation = _validate_closed_cone(st, model, pts, weighted, reach, validate)
    return ConeSurface(state=st, points=pts, weighted=np.where(reach, weighted, np.nan),
                       phi_max=phi, reachable=reach, method=used, grid_shape=shape,
                       validation=validation)


# ---------------------------------------------------------------------------
# fluctuations


def fluctuate(model: SpacetimeModel, Phi: Union[str, Expression],
              A: Optional[Sequence[Union[str, Expression]]] = None,
              B: Optional[Sequence[Union[str, Expression]]] = None) -> SpacetimeModel:
    """Model with the constant mass promoted to a scalar weight field Phi.

    Optional vector potentials A, B (one expression per coordinate) are recorded for
    the commutation no-op check; they never influence decisions.  A Phi that
    vanishes somewhere on the domain triggers a warning: regions of the domain stop
    contributing budget and some internal thresholds may become unreachable.
    """
    phi_expr = Phi if isinstance(Phi, Expression) else parse_expression(Phi)

    def _vec(exprs):
        if exprs is None:
            return None
        out = tuple(e if isinstance(e, Expression) else parse_expression(e) for e in exprs)
        if len(out) != model.dimension:
            raise ValueError(f"vector potential needs {model.dimension} components")
        return out

    Av, Bv = _vec(A), _vec(B)
    if (Av is None) != (Bv is None):
        raise ValueError("vector potentials come in pairs (one per sheet)")

    per_axis = 33 if model.dimension == 2 else 9
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in model.domain_box]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, model.dimension)
    vals = np.abs(phi_expr(mesh))
    if not np.all(np.isfinite(vals)):
        raise ValueError("weight field is not finite on the sampled domain")
    if np.any(vals <= 1e-12):
        warnings.warn("scalar weight vanishes on part of the domain; internal "
                      "thresholds beyond the dead region may be unreachable",
                      stacklevel=2)

    return SpacetimeModel(
        dimension=model.dimension,
        metric_kind=model.metric_kind,
        mass_kind="scalar",
        mass=model.mass,
        conformal_factor=model.conformal_factor,
        vielbein=model.vielbein,
        mass_field=phi_expr,
        vector_potentials=(Av, Bv) if Av is not None else None,
        domain_box=model.domain_box.copy(),
        resolutions=dict(model.resolutions),
        source=None,
    )
