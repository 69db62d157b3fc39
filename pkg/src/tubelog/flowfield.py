"""Integral curves of the direction fields v / R(z), and path integrals.

A curve with R(gamma(t)) * gamma'(t) = v develops under any primitive of the
form to a straight line with direction v; t is "potential time".  The tracer
is an embedded Dormand-Prince 5(4) scheme over complex state with dense
output, event localization, and a switch to the xi = 1/z chart far from the
singularities.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .ratform import RationalForm

# Dormand-Prince 5(4) tableau and quartic dense-output matrix.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

FINITE, INFINITY = "finite", "infinity"

HIT_ZERO = "hit_zero"
ENTERED_POLE = "entered_pole"
ENTERED_PETAL = "entered_petal"
DOMAIN_EXIT = "domain_exit"
BUDGET = "budget"
RETURNED = "returned"


@dataclass
class TerminalEvent:
    kind: str
    index: int | None = None
    distance: float = 0.0
    t: float = 0.0


@dataclass
class PetalRegion:
    """Closed petal region used for entry events and mesh carving.

    ``inverted`` marks a petal that contains z = infinity, i.e. the petal is
    the unbounded complement of its boundary polyline.
    """

    pole_index: int
    polygon: object          # shapely Polygon of the boundary polyline
    inverted: bool = False
    shrunk: object = None    # slightly deflated polygon for entry events
    corner_zero: int | None = None

    pad: float = 0.0

    def __post_init__(self):
        import shapely
        poly = self.polygon
        if not poly.is_valid:
            poly = poly.buffer(0)
            self.polygon = poly
        if self.shrunk is None:
            self.pad = max(2e-4 * math.sqrt(max(poly.area, 1e-30)), 1e-13)
            # events fire slightly inside the polyline so that grazing
            # geodesic contact does not terminate a trace
            self.shrunk = poly.buffer(self.pad if self.inverted else -self.pad)
        self.bounds = self.polygon.bounds

    def contains_point(self, x: float, y: float) -> bool:
        import shapely
        inside = bool(shapely.contains_xy(self.shrunk, x, y))
        return (not inside) if self.inverted else inside

    def contains_strict(self, x: float, y: float) -> bool:
        import shapely
        inside = bool(shapely.contains_xy(self.polygon, x, y))
        return (not inside) if self.inverted else inside


@dataclass
class FlowSpec:
    """A tracing request: start point, target velocity of R(gamma)gamma',
    potential-time budget and the events to watch for."""

    start: complex
    direction_v: complex
    t_max: float
    chart: str = FINITE
    rtol: float = 1e-10
    max_step: float | None = None
    detect_zero_hits: bool = True
    capture_poles: bool = True
    petals: list[PetalRegion] | None = None
    suppress_zero: int | None = None
    suppress_radius: float = 0.0
    target_zero: int | None = None
    target_radius: float | None = None
    zero_hit_radius: float | None = None
    return_tol: float | None = None
    t_return_min: float = 0.0
    record: bool = True

    def __post_init__(self):
        if abs(self.direction_v) == 0:
            raise ValueError("direction_v must be nonzero")
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            raise ValueError("t_max must be finite and positive")


@dataclass
class PathTrace:
    samples: list                 # (t, chart, z) accepted step endpoints
    terminal: TerminalEvent
    displacement: complex
    length: float
    t_final: float
    end: complex
    end_chart: str
    closest_to_target: tuple | None = None   # (dist, t, z, unit tangent)

    def polyline(self) -> list:
        """Samples as finite-plane points (xi samples mapped back by 1/xi)."""
        out = []
        for t, chart, z in self.samples:
            out.append(z if chart == FINITE else (1.0 / z if z != 0 else complex("inf")))
        return out


class _FieldEval:
    """Fast scalar evaluation of v/R in both charts."""

    def __init__(self, form: RationalForm, v: complex):
        self.v = v
        self.nd = tuple(reversed(form.num.coeffs))
        self.dd = tuple(reversed(form.den.coeffs))
        self.nrev = form.num.coeffs[::-1]  # ascending reversed = A~ coeffs
        self.drev = form.den.coeffs[::-1]
        self.q = form.inf_order

    def rhs_finite(self, z):
        acc_n = self.nd[0]
        for c in self.nd[1:]:
            acc_n = acc_n * z + c
        acc_d = self.dd[0]
        for c in self.dd[1:]:
            acc_d = acc_d * z + c
        return self.v * acc_d / acc_n

    def rhs_infinity(self, xi):
        # representative -xi^q * A~(xi)/B~(xi); rhs = v / that
        acc_a = self.nrev[-1]
        for c in self.nrev[-2::-1]:
            acc_a = acc_a * xi + c
        acc_b = self.drev[-1]
        for c in self.drev[-2::-1]:
            acc_b = acc_b * xi + c
        rep = -(xi ** self.q) * acc_a / acc_b
        return self.v / rep


def _seg_dist(p: complex, a: complex, b: complex) -> float:
    ab = b - a
    denom = (ab.real * ab.real + ab.imag * ab.imag)
    if denom == 0.0:
        return abs(p - a)
    t = ((p - a).real * ab.real + (p - a).imag * ab.imag) / denom
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    return abs(p - (a + t * ab))


def _golden_min(f, lo, hi, iters=60):
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - g * (b - a)
    d = a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)


def _bisect_cross(f, lo, hi, iters=80):
    """First root of f in [lo, hi] given f(lo) < 0 <= f(hi) or vice versa."""
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def trace_flow(form: RationalForm, spec: FlowSpec) -> PathTrace:
    """Trace the integral curve of dz/dt = direction_v / R(z).

    Steps are error-controlled at spec.rtol with an extra cap of a quarter
    of the distance to the nearest zero (cone points bend trajectories on
    that scale).  Events are localized on the dense output.
    """
    fe = _FieldEval(form, spec.direction_v)
    poles = list(form.poles)
    zeroes = list(form.zeroes)
    diam = form.diameter()
    pole_diam = form.pole_diameter()
    r_hit_default = spec.zero_hit_radius if spec.zero_hit_radius else 1e-8 * diam
    r_capture = 1e-6 * pole_diam
    r_hit_floor = min(r_hit_default, spec.target_radius or r_hit_default)
    r_switch = 2.0 * (1.0 + max((abs(s) for s in form.singularities), default=1.0))
    r_corner_excl = 1e-3 * diam
    if spec.petals:
        r_corner_excl = max(r_corner_excl, 3.0 * max(r.pad for r in spec.petals))

    chart = spec.chart
    z = complex(spec.start)
    t = 0.0
    samples = [(t, chart, z)]
    escaped = spec.suppress_zero is None
    start_pt = complex(spec.start)
    target = zeroes[spec.target_zero] if spec.target_zero is not None else None
    closest = None  # (dist, t, z, tangent)

    def rhs(ch, w):
        return fe.rhs_finite(w) if ch == FINITE else fe.rhs_infinity(w)

    f_now = rhs(chart, z)
    h = 0.05 * (1.0 + abs(z)) / max(abs(f_now), 1e-300)
    h = min(h, spec.t_max / 10.0)

    atol = 1e-14 * diam
    nmax = 2_000_000
    steps = 0

    while True:
        steps += 1
        if steps > nmax:
            raise NumericalError("step budget exhausted", where=z, stage="trace_flow")
        # near-zero step cap (finite chart only; no zeroes in the far chart)
        if chart == FINITE and zeroes:
            dmin = min(abs(z - c) for c in zeroes)
            cap = 0.25 * max(dmin, 0.3 * r_hit_floor) / max(abs(f_now), 1e-300)
            if h > cap:
                h = cap
        if spec.max_step is not None and h > spec.max_step:
            h = spec.max_step
        budget_step = False
        if t + h >= spec.t_max:
            h = spec.t_max - t
            budget_step = True
        # spatial underflow test: near cone points the potential-time step is
        # legitimately quadratically small, so t alone says nothing
        if h * abs(f_now) < 1e-17 * (1.0 + abs(z)) and h < 1e-9 * max(1.0, t):
            raise NumericalError("step size underflow near singularity",
                                 where=(chart, z), stage="trace_flow")

        # one DP45 step
        k = [f_now]
        failed = False
        for s in range(1, 7):
            acc = 0j
            arow = _A[s]
            for m in range(s):
                acc += arow[m] * k[m]
            try:
                k.append(rhs(chart, z + h * acc))
            except ZeroDivisionError:
                failed = True
                break
        if not failed:
            z1 = z + h * (_B[0] * k[0] + _B[2] * k[2] + _B[3] * k[3]
                          + _B[4] * k[4] + _B[5] * k[5])
            err = h * (_E[0] * k[0] + _E[2] * k[2] + _E[3] * k[3]
                       + _E[4] * k[4] + _E[5] * k[5] + _E[6] * k[6])
            sc = atol + spec.rtol * max(abs(z), abs(z1))
            enorm = abs(err) / sc
        if failed or not math.isfinite(abs(z1)) or enorm > 1.0:
            h *= 0.3 if failed or not math.isfinite(abs(z1)) else \
                max(0.2, 0.9 * enorm ** -0.2)
            budget_step = False
            continue

        # dense output coefficients for this step
        d1 = d2 = d3 = d4 = 0j
        for i in range(7):
            ki = k[i]
            pi = _P[i]
            d1 += ki * pi[0]
            d2 += ki * pi[1]
            d3 += ki * pi[2]
            d4 += ki * pi[3]
        z0 = z

        def dense(theta):
            return z0 + h * theta * (d1 + theta * (d2 + theta * (d3 + theta * d4)))

        # ---- event scan over [t, t+h] ----
        best_theta = None
        best_event = None

        def consider(theta, event):
            nonlocal best_theta, best_event
            if theta is not None and (best_theta is None or theta < best_theta):
                best_theta = theta
                best_event = event

        if chart == FINITE:
            if spec.capture_poles:
                for j, p in enumerate(poles):
                    if _seg_dist(p, z0, z1) < 3.0 * r_capture and abs(z1 - p) < abs(z0 - p):
                        if abs(z1 - p) < r_capture:
                            th = _bisect_cross(lambda u: abs(dense(u) - p) - r_capture, 0.0, 1.0)
                            consider(th, TerminalEvent(ENTERED_POLE, j, abs(dense(th) - p)))
            if spec.detect_zero_hits:
                for i, c in enumerate(zeroes):
                    r_hit = spec.target_radius if (spec.target_zero == i and
                                                   spec.target_radius) else r_hit_default
                    if not escaped and spec.suppress_zero == i:
                        continue  # still leaving the launch cone point
                    if _seg_dist(c, z0, z1) < 4.0 * r_hit:
                        th, dmin = _golden_min(lambda u: abs(dense(u) - c), 0.0, 1.0)
                        if dmin < r_hit:
                            consider(th, TerminalEvent(HIT_ZERO, i, dmin))
            if spec.petals:
                zx, zy = z1.real, z1.imag
                for reg in spec.petals:
                    bx0, by0, bx1, by1 = reg.bounds
                    near = (bx0 - 1 <= zx <= bx1 + 1 and by0 - 1 <= zy <= by1 + 1) \
                        or reg.inverted
                    if near and reg.contains_point(zx, zy):
                        if reg.contains_point(z0.real, z0.imag):
                            th = 0.0
                        else:
                            th = _bisect_cross(
                                lambda u: 1.0 if reg.contains_point(dense(u).real,
                                                                    dense(u).imag) else -1.0,
                                0.0, 1.0)
                        z_ev = dense(th)
                        # a petal's corner lobe must not swallow rays that are
                        # launched from or converging onto that cone point
                        skip = False
                        for iz in (spec.target_zero, spec.suppress_zero):
                            if iz is not None and \
                                    abs(z_ev - zeroes[iz]) < r_corner_excl:
                                skip = True
                        if not skip:
                            consider(th, TerminalEvent(ENTERED_PETAL, reg.pole_index, 0.0))
            # chart switch outward
            if abs(z1) > r_switch:
                th = _bisect_cross(lambda u: abs(dense(u)) - r_switch, 0.0, 1.0)
                consider(th, TerminalEvent("_switch", None, 0.0))
        else:
            # back to the finite chart once comfortably inside the overlap
            if abs(z1) > 1.0 / (0.8 * r_switch):
                th = _bisect_cross(lambda u: abs(dense(u)) - 1.0 / (0.8 * r_switch), 0.0, 1.0)
                consider(th, TerminalEvent("_switch", None, 0.0))

        if spec.return_tol is not None and chart == FINITE and t + h > spec.t_return_min:
            if _seg_dist(start_pt, z0, z1) < spec.return_tol:
                th, dmin = _golden_min(lambda u: abs(dense(u) - start_pt), 0.0, 1.0)
                if dmin < spec.return_tol and t + th * h > spec.t_return_min:
                    consider(th, TerminalEvent(RETURNED, None, dmin))

        # closest-approach bookkeeping for the shooting target
        if target is not None and chart == FINITE:
            dseg = _seg_dist(target, z0, z1)
            if closest is None or dseg < closest[0] * 1.5:
                th, dmin = _golden_min(lambda u: abs(dense(u) - target), 0.0, 1.0)
                if closest is None or dmin < closest[0]:
                    zt = dense(th)
                    try:
                        tang = rhs(chart, zt)
                        tang /= abs(tang)
                    except ZeroDivisionError:
                        tang = 0j
                    closest = (dmin, t + th * h, zt, tang)

        if best_theta is not None and best_event.kind != "_switch":
            t_ev = t + best_theta * h
            z_ev = dense(best_theta)
            best_event.t = t_ev
            if spec.record:
                samples.append((t_ev, chart, z_ev))
            if best_event.kind == HIT_ZERO:
                # snap the endpoint onto the cone point (quadratic contact:
                # the potential gap is O(miss^2), far below tolerances)
                zc = zeroes[best_event.index]
                if spec.record:
                    samples.append((t_ev, chart, zc))
                z_ev = zc
            return _finish(spec, samples, best_event, t_ev, z_ev, chart, closest)

        if best_theta is not None:  # chart switch
            t_sw = t + best_theta * h
            z_sw = dense(best_theta)
            if spec.record:
                samples.append((t_sw, chart, z_sw))
            chart = INFINITY if chart == FINITE else FINITE
            z = 1.0 / z_sw
            t = t_sw
            if spec.record:
                samples.append((t, chart, z))
            f_now = rhs(chart, z)
            h = 0.05 * (1.0 + abs(z)) / max(abs(f_now), 1e-300)
            continue

        # accept
        t += h
        z = z1
        if not escaped and abs(z - zeroes[spec.suppress_zero]) > spec.suppress_radius:
            escaped = True
        if spec.record:
            samples.append((t, chart, z))
        if budget_step or t >= spec.t_max:
            ev = TerminalEvent(BUDGET, None, 0.0, t)
            return _finish(spec, samples, ev, t, z, chart, closest)
        f_now = k[6]  # FSAL
        h *= min(5.0, max(0.2, 0.9 * enorm ** -0.2)) if enorm > 0 else 5.0


def _finish(spec, samples, event, t_final, z_end, chart, closest):
    disp = t_final * spec.direction_v
    length = t_final * abs(spec.direction_v)
    return PathTrace(samples=samples if spec.record else [],
                     terminal=event, displacement=disp, length=length,
                     t_final=t_final, end=z_end, end_chart=chart,
                     closest_to_target=closest)


# ---------------------------------------------------------------------------
# quadrature of the form along polylines
# ---------------------------------------------------------------------------

# Gauss-Kronrod 7-15 nodes/weights on [-1, 1]
_XGK = (
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0, 0.207784955007898, 0.405845151377397,
    0.586087235467691, 0.741531185599394, 0.864864423359769,
    0.949107912342759, 0.991455371120813,
)
_WGK = (
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728, 0.204432940075298,
    0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529,
)
_WG = (
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870,
)


def _gk_segment(f, a, b):
    mid = 0.5 * (a + b)
    rad = 0.5 * (b - a)
    disp_k = 0j
    len_k = 0.0
    disp_g = 0j
    for idx in range(15):
        v = f(mid + rad * _XGK[idx])
        disp_k += _WGK[idx] * v
        len_k += _WGK[idx] * abs(v)
        if idx % 2 == 1:
            disp_g += _WG[idx // 2] * v
    return disp_k * rad, len_k * rad, abs(disp_k - disp_g) * rad


def integrate_primitive(form: RationalForm, path, qtol: float = 1e-12,
                        pole_clearance: float | None = None):
    """(integral of R dz, integral of |R| |dz|) along a chart-tagged polyline.

    Each segment is integrated by adaptive Gauss-Kronrod; endpoints at
    zeroes are fine (the integrand vanishes there), but segments passing
    within pole_clearance of a pole are rejected.
    """
    pts = []
    for item in path:
        if isinstance(item, tuple) and len(item) == 2 and isinstance(item[0], str):
            pts.append((item[0], complex(item[1])))
        else:
            pts.append((FINITE, complex(item)))
    if len(pts) < 2:
        return 0j, 0.0
    if pole_clearance is None:
        pole_clearance = 1e-9 * form.diameter()

    total_disp = 0j
    total_len = 0.0
    for (ch_a, za), (ch_b, zb) in zip(pts[:-1], pts[1:]):
        chart = ch_a
        if ch_b != ch_a:
            zb = (1.0 / zb) if zb != 0 else complex("inf")  # overlap region, both valid
            if not math.isfinite(abs(zb)):
                raise NumericalError("polyline crosses the point at infinity",
                                     stage="integrate_primitive")
        if za == zb:
            continue
        if chart == FINITE:
            for j, p in enumerate(form.poles):
                if _seg_dist(p, za, zb) < pole_clearance:
                    raise NumericalError(f"path too close to pole {j}", where=p,
                                         stage="integrate_primitive")
            dz = zb - za

            def f(s, za=za, dz=dz):
                return form.r(za + s * dz) * dz
        else:
            dz = zb - za

            def f(s, za=za, dz=dz):
                return form.r_infinity_chart(za + s * dz) * dz

        stack = [(0.0, 1.0)]
        depth = 0
        while stack:
            a, b = stack.pop()
            dk, lk, err = _gk_segment(f, a, b)
            if err <= qtol * (1.0 + abs(dk)) or (b - a) < 1e-12:
                total_disp += dk
                total_len += lk
            else:
                depth += 1
                if depth > 20000:
                    raise NumericalError("quadrature failed to converge",
                                         stage="integrate_primitive")
                mid = 0.5 * (a + b)
                stack.append((a, mid))
                stack.append((mid, b))
    return total_disp, total_len
