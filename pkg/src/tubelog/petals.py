"""Pole petals: normalizing series, radii, attachments, boundaries.

Around a simple pole with residue lambda there is a coordinate xi with
z = z_j + xi + c_2 xi^2 + ... in which the form becomes lambda dxi/xi; the
petal is the image of the largest disk |xi| < r on which this works.  Its
boundary is an equipotential loop with a single corner at a zero of the
form, and any primitive maps the petal onto a half-cylinder of circumference
2 pi i lambda.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import Polygon as ShPolygon

from .errors import NumericalError
from .flowfield import (BUDGET, ENTERED_POLE, FINITE, INFINITY, FlowSpec,
                        PetalRegion, integrate_primitive, trace_flow)
from .ratform import RationalForm

SERIES_K = 64
PROBE_EPS_FACTOR = 1e-4
BOUNDARY_POTENTIAL_OFFSET = 1e-5
ATTACH_TOL = 1e-6
BOUNDARY_SAMPLES = 600


@dataclass
class Petal:
    pole_index: int
    series: np.ndarray                  # c_1 = 1, c_2, ..., c_K of z(xi)
    radius: float                       # conformal radius (inf allowed)
    attached_zeroes: list[int]
    boundary: list                      # closed chart-tagged polyline, [] if radius = inf
    boundary_displacement: complex
    corner_potential: float = math.nan  # log r measured by the winning probe
    corner_directions: dict = field(default_factory=dict)  # zero index -> unit tangent
    series_radius: float = math.nan     # Cauchy-Hadamard estimate
    contains_infinity: bool = False
    warnings: list = field(default_factory=list)


@dataclass
class PetalCensus:
    n0: int
    n1: int
    n2: int
    per_zero_attachment: list[list[int]]
    potentials: dict = field(default_factory=dict)  # (zero, pole) -> log-radius

    def to_json(self) -> dict:
        return {"n0": self.n0, "n1": self.n1, "n2": self.n2,
                "attachment": [list(a) for a in self.per_zero_attachment]}


# ---------------------------------------------------------------------------
# the normalizing series
# ---------------------------------------------------------------------------

def _series_mul(a: np.ndarray, b: np.ndarray, K: int) -> np.ndarray:
    return np.convolve(a, b)[:K]


def _series_inv(b: np.ndarray, K: int) -> np.ndarray:
    inv = np.zeros(K, dtype=complex)
    inv[0] = 1.0 / b[0]
    for k in range(1, K):
        inv[k] = -inv[0] * np.dot(b[1:k + 1], inv[k - 1::-1][:k])
    return inv


def petal_series(form: RationalForm, j: int, K: int = SERIES_K) -> np.ndarray:
    """Coefficients c_1..c_K of the pole-normalizing coordinate change.

    Solves xi dz/dxi = lambda / R(z) as a power series around the pole with
    the normalization c_1 = 1.  Returns the array [c_1, ..., c_K].
    """
    if K < 8:
        raise ValueError("series order K must be >= 8")
    p = form.poles[j]
    lam = form.residues[j]
    # lambda * den(p+u)/num(p+u) = u * h(u) with h(0) = 1 by definition of lam
    den_sh = np.asarray(form.den.taylor_shift(p).coeffs, dtype=complex)
    num_sh = np.asarray(form.num.taylor_shift(p).coeffs, dtype=complex)
    a = np.zeros(K, dtype=complex)
    src = (lam * den_sh)[1:K + 1]  # constant term is den(p) = 0 exactly
    a[:len(src)] = src
    b = np.zeros(K, dtype=complex)
    b[:min(K, len(num_sh))] = num_sh[:K]
    h = _series_mul(a, _series_inv(b, K), K)
    h0 = h[0]

    # ODE in coefficients: k c_k = [xi^k] u(xi) h(u(xi)).  The right side
    # depends on c_k only through the linear term c_k * h0, so repeated
    # substitution finalizes one further coefficient per pass.
    LEN = K + 1
    c = np.zeros(LEN, dtype=complex)
    c[1] = 1.0
    ks = np.arange(LEN, dtype=float)
    for _ in range(K):
        comp = np.zeros(LEN, dtype=complex)   # h(u) mod xi^{K+1}
        comp[0] = h[K - 1]
        for m in range(K - 2, -1, -1):
            comp = _series_mul(comp, c, LEN)
            comp[0] += h[m]
        s = _series_mul(c, comp, LEN)         # u * h(u)
        new = (s[2:] - h0 * c[2:]) / (ks[2:] - h0)
        if np.allclose(new, c[2:], rtol=0, atol=1e-300):
            break
        c[2:] = new
        if not np.all(np.isfinite(c)):
            raise NumericalError("series recurrence blew up", where=p,
                                 stage="petal_series")
    return c[1:]


def series_eval(pole: complex, series: np.ndarray, xi) -> complex:
    acc = 0j if not isinstance(xi, np.ndarray) else np.zeros_like(xi)
    for ck in series[::-1]:
        acc = (acc + ck) * xi
    return pole + acc


def series_invert(pole: complex, series: np.ndarray, z: complex,
                  iters: int = 60) -> complex:
    """Solve z(xi) = z for xi near 0 by Newton."""
    dcoef = series * np.arange(1, len(series) + 1)
    xi = z - pole
    for _ in range(iters):
        val = series_eval(pole, series, xi) - z
        dv = 0j
        for ck in dcoef[::-1]:
            dv = dv * xi + ck
        step = val / dv
        xi = xi - step
        if abs(step) < 1e-16 * (1.0 + abs(xi)):
            break
    return xi


def petal_radius(form: RationalForm, j: int, series: np.ndarray,
                 potential_logr: float | None = None,
                 infinity_inside: bool = False):
    """Conformal radius estimate with cross-validation.

    Primary estimate: robust Cauchy-Hadamard fit (regression of log|c_k|
    against k over the top half of the series).  When a separatrix potential
    measurement is available it wins, and the two are cross-checked within
    5 percent; a petal wrapping z = infinity makes the series see the
    1/z pole first, so the comparison is skipped there.
    """
    warnings = []
    mags = np.abs(series[1:])
    if np.all(mags <= 1e-13):
        return math.inf, math.inf, warnings
    K = len(series)
    ks = np.arange(1, K + 1)
    lo = K // 2
    sel = (ks >= lo) & (np.abs(series) > 1e-300)
    kk = ks[sel].astype(float)
    ll = np.log(np.abs(series[sel]))
    if len(kk) < 4:
        return math.inf, math.inf, ["series too short for radius fit"]
    slope = np.polyfit(kk, ll, 1)[0]
    r_series = float(np.exp(-slope))
    if potential_logr is None:
        return r_series, r_series, warnings
    r_pot = float(np.exp(potential_logr))
    if not infinity_inside:
        rel = abs(r_series - r_pot) / r_pot
        if rel > 0.20:
            warnings.append(
                f"radius estimates disagree by {rel:.1%} "
                f"(series {r_series:.6g}, potential {r_pot:.6g})")
    return r_pot, r_series, warnings


# ---------------------------------------------------------------------------
# attachments via backward-radial probes
# ---------------------------------------------------------------------------

def _probe_directions(form: RationalForm, zero: complex, lam: complex):
    """The four local horizontal directions at a simple zero for the field
    with direction -lambda (two develop along -lambda, two along +lambda)."""
    rp = form.dr(zero)
    base = (cmath.phase(-lam) - cmath.phase(rp)) / 2.0
    return [cmath.exp(1j * (base + m * math.pi / 2.0)) for m in range(4)]


def probe_zero_pole(form: RationalForm, series_j: np.ndarray, i: int, j: int,
                    *, t_cap: float = 240.0, rng=None):
    """Backward-radial probes from zero i toward pole j.

    Returns (potential, direction) where potential is the log-radius of the
    zero in the petal coordinate of pole j (the separatrix potential), or
    None if no probe spirals into the pole.
    """
    zero = form.zeroes[i]
    pole = form.poles[j]
    lam = form.residues[j]
    eps = PROBE_EPS_FACTOR * form.nearest_singularity(zero, exclude=zero)
    for attempt in range(3):
        scale = 1.0 + 0.37 * attempt
        best_back = None
        best_fwd = None
        for m, v in enumerate(_probe_directions(form, zero, lam)):
            z0 = zero + eps * scale * v
            t_max = 60.0
            while True:
                tr = trace_flow(form, FlowSpec(
                    start=z0, direction_v=-lam, t_max=t_max, record=False))
                if tr.terminal.kind == BUDGET and t_max < t_cap:
                    t_max *= 4.0
                    continue
                break
            if tr.terminal.kind == ENTERED_POLE and tr.terminal.index == j:
                xi = series_invert(pole, series_j, tr.end)
                disp, _ = integrate_primitive(form, [zero, z0])
                s0 = -(disp / lam).real
                pot = math.log(abs(xi)) + tr.t_final + s0
                # even m: development moves along -lambda, away from the zero
                # (a true petal bisector when captured); odd m runs into the
                # cone point first and only continues by numerical slop
                if m % 2 == 0:
                    if best_back is None or pot < best_back[0]:
                        best_back = (pot, v)
                elif best_fwd is None or pot < best_fwd[0]:
                    best_fwd = (pot, v)
        if best_back is not None:
            return best_back
        if best_fwd is not None:
            return best_fwd
    return None


def find_attachments(form: RationalForm, series: list[np.ndarray] | None = None,
                     attach_tol: float = ATTACH_TOL):
    """Zero-petal attachment relation, census, and per-pole potentials.

    For each (zero, pole) pair, four probes are launched along the local
    horizontal directions with field direction -lambda_j; the pair is a
    candidate when some probe spirals into the pole, and the petal corner is
    the zero realizing the minimal potential for that pole.
    """
    n = form.degree_n
    if n < 3:
        raise ValueError("attachments need n >= 3")
    if not form.zeroes:
        raise ValueError("form has no finite zeroes to attach petals to")
    if series is None:
        series = [petal_series(form, j) for j in range(n)]

    pots: dict[tuple[int, int], float] = {}
    dirs: dict[tuple[int, int], complex] = {}
    for j in range(n):
        for i in range(len(form.zeroes)):
            res = probe_zero_pole(form, series[j], i, j)
            if res is not None:
                pots[(i, j)] = res[0]
                dirs[(i, j)] = res[1]

    per_pole: dict[int, list[int]] = {}
    corner_pot: dict[int, float] = {}
    for j in range(n):
        cand = [(pots[(i, jj)], i) for (i, jj) in pots if jj == j]
        if not cand:
            raise NumericalError(f"no probe captured pole {j}; petal corner "
                                 "not found", where=form.poles[j],
                                 stage="find_attachments")
        tmin = min(c[0] for c in cand)
        att = sorted(i for (p, i) in cand
                     if p <= tmin + attach_tol * (1.0 + abs(tmin)))
        per_pole[j] = att
        corner_pot[j] = tmin

    per_zero = [sorted(j for j in range(n) if i in per_pole[j])
                for i in range(len(form.zeroes))]
    counts = [len(a) for a in per_zero]
    census = PetalCensus(
        n0=sum(1 for c in counts if c == 0),
        n1=sum(1 for c in counts if c == 1),
        n2=sum(1 for c in counts if c == 2),
        per_zero_attachment=per_zero,
        potentials={f"{i},{j}": p for (i, j), p in pots.items()},
    )
    return census, per_pole, corner_pot, dirs


# ---------------------------------------------------------------------------
# boundary tracing
# ---------------------------------------------------------------------------

def trace_petal_boundary(form: RationalForm, j: int, corner_zero: int,
                         corner_dir: complex, corner_potential: float,
                         samples_hint: int = BOUNDARY_SAMPLES):
    """Trace the petal boundary as the equipotential loop through its corner.

    Launches just inside the petal along the corner bisector, follows the
    direction i*lambda_j for one full period (exactly 2 pi in potential
    time), then extrapolates the loop outward onto the true boundary level.
    The polyline starts and ends at the exact corner zero, oriented with the
    petal interior on the left, so the loop displacement is +2 pi i lambda_j.
    """
    lam = form.residues[j]
    zero = form.zeroes[corner_zero]
    rp = form.dr(zero)
    delta = BOUNDARY_POTENTIAL_OFFSET
    rho = math.sqrt(2.0 * delta * abs(lam) / abs(rp))
    z0 = zero + rho * corner_dir
    disp0, _ = integrate_primitive(form, [zero, z0])
    s0 = -(disp0 / lam).real
    if s0 <= 0:
        raise NumericalError("boundary launch point is not inside the petal",
                             where=z0, stage="trace_petal_boundary")

    tr = trace_flow(form, FlowSpec(
        start=z0, direction_v=1j * lam, t_max=2.0 * math.pi,
        detect_zero_hits=False, capture_poles=True,
        max_step=2.0 * math.pi / samples_hint))
    if tr.terminal.kind != BUDGET:
        raise NumericalError(
            f"equipotential terminated early ({tr.terminal.kind})",
            where=tr.end, stage="trace_petal_boundary")
    gap = None
    pts = []
    for t, chart, z in tr.samples:
        pts.append((chart, z))
    # closure measured at the launch level before extrapolation
    first = pts[0]
    last = pts[-1]
    if first[0] == last[0]:
        gap = abs(first[1] - last[1])
    else:
        za = first[1] if first[0] == FINITE else 1.0 / first[1]
        zb = last[1] if last[0] == FINITE else 1.0 / last[1]
        gap = abs(za - zb)
    tol_close = 1e-6 * abs(2.0 * math.pi * lam)
    if gap > tol_close:
        raise NumericalError(f"petal boundary failed to close (gap {gap:.3e})",
                             where=first[1], stage="trace_petal_boundary")

    # push each sample outward by the measured potential deficit
    out = [(FINITE, zero)]
    for chart, z in pts[:-1]:
        if chart == FINITE:
            r1 = form.r(z)
            zm = z + 0.5 * s0 * lam / r1
            zb = z + s0 * lam / form.r(zm)
            out.append((FINITE, zb))
        else:
            rep = form.r_infinity_chart(z)
            zm = z + 0.5 * s0 * lam / rep
            zb = z + s0 * lam / form.r_infinity_chart(zm)
            out.append((INFINITY, zb))
    out.append((FINITE, zero))
    disp, _ = integrate_primitive(form, out)
    return out, disp, gap


def _boundary_polygon(boundary) -> tuple[ShPolygon, bool]:
    """Shapely polygon of a boundary polyline plus an inverted flag."""
    xy = []
    for chart, z in boundary:
        w = z if chart == FINITE else (1.0 / z)
        xy.append((w.real, w.imag))
    poly = ShPolygon(xy)
    if not poly.is_valid:
        poly = poly.buffer(0)
    return poly


def compute_petals(form: RationalForm, series_order: int = SERIES_K):
    """Full petal stage: series, attachments, radii, boundaries, census."""
    n = form.degree_n
    series = [petal_series(form, j, series_order) for j in range(n)]
    census, per_pole, corner_pot, dirs = find_attachments(form, series)

    petals = []
    for j in range(n):
        att = per_pole[j]
        corner = att[0]
        boundary, disp, gap = trace_petal_boundary(
            form, j, corner, dirs[(corner, j)], corner_pot[j])
        poly = _boundary_polygon(boundary)
        inverted = not _winds_around(boundary, form.poles[j])
        radius, r_series, warns = petal_radius(
            form, j, series[j], potential_logr=corner_pot[j],
            infinity_inside=inverted)
        petals.append(Petal(
            pole_index=j, series=series[j], radius=radius,
            attached_zeroes=att, boundary=boundary,
            boundary_displacement=disp,
            corner_potential=corner_pot[j],
            corner_directions={i: dirs[(i, j)] for i in att},
            series_radius=r_series, contains_infinity=inverted,
            warnings=warns + ([f"closure gap {gap:.2e}"]
                              if gap > 0.1e-6 * abs(2 * math.pi * form.residues[j])
                              else []),
        ))
    return petals, census


def _winds_around(boundary, p: complex) -> bool:
    total = 0.0
    prev = None
    for chart, z in boundary:
        w = z if chart == FINITE else 1.0 / z
        if prev is not None:
            total += cmath.phase((w - p) / (prev - p))
        prev = w
    return abs(total) > math.pi


def petal_regions(petals: list[Petal]) -> list[PetalRegion]:
    """Event/carving regions for the tracer and the mesh builder."""
    regions = []
    for pet in petals:
        if not pet.boundary:
            continue
        poly = _boundary_polygon(pet.boundary)
        regions.append(PetalRegion(pole_index=pet.pole_index, polygon=poly,
                                   inverted=pet.contains_infinity,
                                   corner_zero=pet.attached_zeroes[0]))
    return regions
