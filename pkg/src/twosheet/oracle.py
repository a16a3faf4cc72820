"""Monte-Carlo oracle: random certified cone elements vs the decision procedure.

The decision procedure says two states are related; the definition says every cone
element must then be non-decreasing between them.  This module samples random cone
elements (a global time function plus Gaussian-windowed cosine bumps, shrunk until
the obstruction matrix certifies PSD on a grid) and evaluates the defining
inequality directly, hunting for contradictions the main code path cannot see.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .clifford import SpinRepresentation, make_representation
from .cone import (
    CausalElementPair,
    FunctionField,
    certification_grid,
    obstruction_matrices,
    ordering_gap,
    witness_element,
)
from .geometry import (
    InvalidCurveError,
    MixedState,
    SpacetimeModel,
    max_weighted_length,
)

__all__ = [
    "SampledElement",
    "OracleVerdict",
    "sample_causal_elements",
    "mc_check",
    "thread_count",
]

log = logging.getLogger(__name__)

SHRINK_FLOOR = 1e-6     # below this the perturbation is numerically dead: discard
SAFETY_FACTOR = 0.9     # headroom so refined grids still certify
NEGATIVE_TOL = 1e-9     # ordering values below this contradict a related decision
BISECT_ITERS = 20


def thread_count(jobs: int) -> int:
    """Worker count capped by TWOSHEET_THREADS (results never depend on it)."""
    cap = os.cpu_count() or 1
    env = os.environ.get("TWOSHEET_THREADS")
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise ValueError(f"TWOSHEET_THREADS must be an integer, got {env!r}")
    return max(1, min(cap, jobs))


@dataclass
class SampledElement:
    """A certified random cone element and how it was built."""

    pair: CausalElementPair
    construction: Dict[str, object]
    certified_grid: np.ndarray
    min_eigenvalue: float


# ---------------------------------------------------------------------------
# bump basis


def _bump_basis(pts: np.ndarray, centers, widths, waves,
                phases) -> Tuple[np.ndarray, np.ndarray]:
    """Values (N, nb) and coordinate gradients (N, nb, n) in one pass."""
    d = pts[:, None, :] - centers[None, :, :]
    window = np.exp(-np.sum((d / widths[None, :, :]) ** 2, axis=-1))
    phase = np.einsum("pbk,bk->pb", d, waves) + phases[None, :]
    cosp = np.cos(phase)
    wc = window * cosp
    grads = (-2.0 * d / widths[None, :, :] ** 2) * wc[..., None] \
        - (window * np.sin(phase))[..., None] * waves[None, :, :]
    return wc, grads


def _combination_field(construction: Dict[str, np.ndarray], which: str) -> FunctionField:
    """T + shrink * sum_i amp_i * bump_i as a vectorized scalar field."""
    centers = construction["centers"]
    widths = construction["widths"]
    waves = construction["waves"]
    phases = construction["phases"]
    coef = construction["shrink"] * construction[which]

    def value(pts):
        pts2 = pts.reshape(-1, pts.shape[-1])
        vals, _ = _bump_basis(pts2, centers, widths, waves, phases)
        return (pts2[:, 0] + vals @ coef).reshape(pts.shape[:-1])

    def gradient(pts):
        pts2 = pts.reshape(-1, pts.shape[-1])
        _, grads = _bump_basis(pts2, centers, widths, waves, phases)
        g = np.einsum("pbk,b->pk", grads, coef)
        g[:, 0] += 1.0
        return g.reshape(pts.shape)

    return FunctionField(value, gradient)


# ---------------------------------------------------------------------------
# shrink bisection on the affine family M(s) = M_time + s * M_bumps


class _GridContext:
    """Element-independent data on the certification grid, computed once."""

    def __init__(self, model: SpacetimeModel, rep: SpinRepresentation, grid: np.ndarray):
        self.model = model
        self.rep = rep
        self.grid = grid
        self.mass = model.mass_at(grid)
        self.omega = model.omega(grid) if model.metric_kind == "conformal2d" else None
        self.frames = model.frame_matrices(grid) if model.metric_kind == "vielbein4d" else None

        # frame derivative of T(x) = x^0 is the first column of the frame table
        if model.metric_kind == "minkowski":
            fT = np.zeros(grid.shape)
            fT[:, 0] = 1.0
        elif model.metric_kind == "conformal2d":
            fT = np.zeros(grid.shape)
            fT[:, 0] = self.omega
        else:
            fT = self.frames[..., 0]
        base_floor = float(np.min(fT[:, 0] - np.linalg.norm(fT[:, 1:], axis=-1)))
        if base_floor < 0.0:
            raise ValueError("the coordinate time function is not causal for this model; "
                             "oracle sampling needs a causal time slicing")
        self.base_floor = base_floor

        if model.dimension == 2:
            ap = fT[:, 0] + fT[:, 1]
            am = fT[:, 0] - fT[:, 1]
            # a = b = T: both sheets share fT and the coupling vanishes
            self.base2 = (ap + am, ap - am, am + ap, am - ap)  # u1, d1, u2, d2
        else:
            Vs = np.stack(rep.v_ops.vs)
            TL = np.einsum("pa,aij->pij", fT, Vs)
            M = np.zeros((len(grid), 8, 8), dtype=complex)
            M[:, :4, :4] = TL
            M[:, 4:, 4:] = TL
            self.base4 = tuple(M[(np.s_[:], *blk)] for blk in _BLOCKS_4D)

    def frame_gradients(self, ga: np.ndarray, gb: np.ndarray):
        if self.model.metric_kind == "minkowski":
            return ga, gb
        if self.model.metric_kind == "conformal2d":
            return ga * self.omega[:, None], gb * self.omega[:, None]
        return (np.einsum("pam,pm->pa", self.frames, ga),
                np.einsum("pam,pm->pa", self.frames, gb))


_BLOCKS_4D = (np.ix_([0, 1, 6, 7], [0, 1, 6, 7]), np.ix_([2, 3, 4, 5], [2, 3, 4, 5]))


def _pert_data_2d(ctx: _GridContext, c: Dict[str, np.ndarray]):
    V, Gr = _bump_basis(ctx.grid, c["centers"], c["widths"], c["waves"], c["phases"])
    va = V @ c["amp_a"]
    vb = V @ c["amp_b"]
    fa, fb = ctx.frame_gradients(np.einsum("pbk,b->pk", Gr, c["amp_a"]),
                                 np.einsum("pbk,b->pk", Gr, c["amp_b"]))
    ap = fa[:, 0] + fa[:, 1]
    am = fa[:, 0] - fa[:, 1]
    bp = fb[:, 0] + fb[:, 1]
    bm = fb[:, 0] - fb[:, 1]
    z2 = np.abs(ctx.mass * (va - vb)) ** 2
    return (ap + bm, ap - bm, am + bp, am - bp, z2)


def _min_eig_2d(ctx: _GridContext, pert, s: float) -> float:
    u1, d1, u2, d2 = ctx.base2
    u1P, d1P, u2P, d2P, z2 = pert
    s2z = (s * s) * z2
    e1 = 0.5 * (u1 + s * u1P) - np.sqrt(0.25 * (d1 + s * d1P) ** 2 + s2z)
    e2 = 0.5 * (u2 + s * u2P) - np.sqrt(0.25 * (d2 + s * d2P) ** 2 + s2z)
    return float(min(e1.min(), e2.min()))


def _pert_data_4d(ctx: _GridContext, c: Dict[str, np.ndarray]):
    V, Gr = _bump_basis(ctx.grid, c["centers"], c["widths"], c["waves"], c["phases"])
    va = V @ c["amp_a"]
    vb = V @ c["amp_b"]
    fa, fb = ctx.frame_gradients(np.einsum("pbk,b->pk", Gr, c["amp_a"]),
                                 np.einsum("pbk,b->pk", Gr, c["amp_b"]))
    Vs = np.stack(ctx.rep.v_ops.vs)
    M = np.zeros((len(ctx.grid), 8, 8), dtype=complex)
    M[:, :4, :4] = np.einsum("pa,aij->pij", fa, Vs)
    M[:, 4:, 4:] = np.einsum("pa,aij->pij", fb, Vs)
    z = ctx.mass * (va - vb)
    M[:, :4, 4:] = -ctx.rep.v_ops.iV * z[:, None, None]
    M[:, 4:, :4] = ctx.rep.v_ops.iV * np.conj(z)[:, None, None]
    return tuple(M[(np.s_[:], *blk)] for blk in _BLOCKS_4D)


def _min_eig_4d(ctx: _GridContext, pert, s: float) -> float:
    return float(min(np.linalg.eigvalsh(b + s * p)[..., 0].min()
                     for b, p in zip(ctx.base4, pert)))


def _largest_admissible_shrink(min_eig, iters: int = BISECT_ITERS) -> float:
    """Largest s in [0, 1] keeping the grid min eigenvalue >= 0.

    The smallest eigenvalue of an affine Hermitian family is concave in s, and so is
    its minimum over grid points; the admissible set is an interval containing s = 0,
    so bisection against its right edge is exact.
    """
    if min_eig(1.0) >= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if min_eig(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# element sampling


def _draw_construction(rng: np.random.Generator, model: SpacetimeModel,
                       amplitude: float) -> Dict[str, np.ndarray]:
    n = model.dimension
    lo = model.domain_box[:, 0]
    hi = model.domain_box[:, 1]
    extents = hi - lo
    nb = int(rng.integers(2, 5))
    return {
        "centers": rng.uniform(lo, hi, size=(nb, n)),
        "widths": rng.uniform(0.1, 0.5, size=(nb, n)) * extents,
        "waves": rng.uniform(-2.0, 2.0, size=(nb, n)) * (2.0 / extents),
        "phases": rng.uniform(0.0, 2.0 * np.pi, size=nb),
        "amp_a": rng.normal(0.0, 1.0, size=nb) * amplitude,
        "amp_b": rng.normal(0.0, 1.0, size=nb) * amplitude,
    }


def _build_element(index: int, seed: int, ctx: _GridContext,
                   amplitude: float) -> Optional[SampledElement]:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    c = _draw_construction(rng, ctx.model, amplitude)
    trivial = not (np.any(c["amp_a"]) or np.any(c["amp_b"]))

    if ctx.model.dimension == 2:
        pert = _pert_data_2d(ctx, c)
        min_eig = lambda s: _min_eig_2d(ctx, pert, s)
    else:
        pert = _pert_data_4d(ctx, c)
        min_eig = lambda s: _min_eig_4d(ctx, pert, s)

    s_star = _largest_admissible_shrink(min_eig)
    s_final = s_star if trivial else SAFETY_FACTOR * s_star
    if not trivial and s_final < SHRINK_FLOOR:
        log.info("discarding element %d: shrink underflow (s* = %.3e)", index, s_star)
        return None

    final_eig = min_eig(s_final)
    if final_eig < -NEGATIVE_TOL:  # cannot happen given concavity; guard anyway
        log.info("discarding element %d: certification failed after shrink "
                 "(min eig %.3e)", index, final_eig)
        return None

    c["shrink"] = float(s_final)
    c["index"] = index
    pair = CausalElementPair(a=_combination_field(c, "amp_a"),
                             b=_combination_field(c, "amp_b"),
                             description=f"sampled[{index}]")
    return SampledElement(pair=pair, construction=c,
                          certified_grid=ctx.grid, min_eigenvalue=final_eig)


def sample_causal_elements(model: SpacetimeModel, count: int, seed: int, *,
                           rep: Optional[SpinRepresentation] = None,
                           grid: Optional[np.ndarray] = None,
                           amplitude: float = 1.0) -> List[SampledElement]:
    """Draw `count` random certified cone elements, deterministically per seed.

    Each element is T + bumps on both sheets with one scalar shrink bisected until
    the obstruction matrix is PSD on the certification grid (the shrink only ever
    reduces amplitudes, never grows them).  Elements whose shrink underflows are
    discarded with a log entry; more than 50% discards aborts.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if model.mass_kind == "diagonal":
        raise ValueError("diagonal models have a decoupled cone; sample per sheet instead")
    rep = rep or make_representation(model.dimension)
    pts = certification_grid(model) if grid is None else np.asarray(grid, dtype=float)
    ctx = _GridContext(model, rep, pts)

    workers = thread_count(count)
    if workers == 1:
        results = [_build_element(i, seed, ctx, amplitude) for i in range(count)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: _build_element(i, seed, ctx, amplitude),
                                    range(count)))

    kept = [r for r in results if r is not None]
    if len(kept) < (count + 1) // 2:
        raise RuntimeError(f"{count - len(kept)} of {count} sampled elements failed "
                           "certification; the model resists random cone sampling")
    return kept


# ---------------------------------------------------------------------------
# consistency verdicts


@dataclass
class OracleVerdict:
    """Outcome of checking a decision against sampled elements.

    kinds: 'consistent' (no element objects), 'contradiction' (a certified element
    decreases along a supposedly related pair), 'witness_separates' (not-related
    confirmed constructively), 'witness_unavailable' (not-related but the separating
    construction does not apply: base failure, equal internal coordinates, or a
    null-boundary pair with no timelike curve to build along).
    """

    kind: str
    min_value: float
    min_element: Optional[int] = None
    witness_margin: Optional[float] = None
    checked: int = 0
    note: str = ""

    @property
    def consistent(self) -> bool:
        return self.kind != "contradiction"


def _element_values(elements: Sequence[SampledElement], s1: MixedState,
                    s2: MixedState) -> np.ndarray:
    """Ordering functional of every element, grouped sheet-wise for exact zeros."""
    pq = np.stack([np.asarray(s1.point, dtype=float), np.asarray(s2.point, dtype=float)])
    xi, phi = float(s1.xi), float(s2.xi)
    out = np.empty(len(elements))
    for k, el in enumerate(elements):
        av = el.pair.a.value(pq)
        bv = el.pair.b.value(pq)
        out[k] = (phi * av[1] - xi * av[0]) + ((1.0 - phi) * bv[1] - (1.0 - xi) * bv[0])
    return out


def mc_check(state1, state2, elements: Sequence[SampledElement],
             decision, *, model: Optional[SpacetimeModel] = None) -> OracleVerdict:
    """Evaluate the ordering functional of every element between the two states.

    A related decision contradicted by any value below -1e-9 is a Contradiction.
    For not-related decisions with the base relation holding and distinct internal
    coordinates, the explicit witness is constructed along the maximizing curve and
    its separating margin reported (model required for that leg).
    """
    s1 = state1 if isinstance(state1, MixedState) else MixedState(*state1)
    s2 = state2 if isinstance(state2, MixedState) else MixedState(*state2)
    values = _element_values(elements, s1, s2)
    k_min = int(np.argmin(values)) if len(values) else None
    v_min = float(values[k_min]) if len(values) else 0.0

    if decision.related:
        if v_min < -NEGATIVE_TOL:
            return OracleVerdict(kind="contradiction", min_value=v_min, min_element=k_min,
                                 checked=len(values),
                                 note=f"element {k_min} decreases along a related pair")
        return OracleVerdict(kind="consistent", min_value=v_min, min_element=k_min,
                             checked=len(values))

    if not decision.base_related or s1.xi == s2.xi or model is None:
        note = "" if model is not None else "no model supplied for witness construction"
        return OracleVerdict(kind="witness_unavailable", min_value=v_min,
                             min_element=k_min, checked=len(values), note=note)

    try:
        _, curve = max_weighted_length(s1.point, s2.point, model, return_curve=True)
        pair = witness_element(curve, s1.xi, s2.xi, model)
    except (InvalidCurveError, ValueError) as exc:
        return OracleVerdict(kind="witness_unavailable", min_value=v_min,
                             min_element=k_min, checked=len(values), note=str(exc))
    margin = -ordering_gap(pair, s1, s2)
    return OracleVerdict(kind="witness_separates", min_value=v_min, min_element=k_min,
                         witness_margin=float(margin), checked=len(values))
