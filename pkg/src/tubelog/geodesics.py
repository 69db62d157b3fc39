"""The flat metric space outside the petals, and geodesic cuts between zeroes.

The sphere minus the open petals carries the metric |R(z)||dz|.  A graded
triangulation gives Dijkstra upper bounds; angle shooting then replaces mesh
paths by genuine flat segments between cone points.  The greedy stage picks
the n-3 minimizing cuts connecting the n-2 zeroes: first the globally
closest zero pair, then, repeatedly, the zero closest to the set already
chosen.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import shapely
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra
from scipy.spatial import Delaunay

from .errors import NumericalError
from .flowfield import (ENTERED_PETAL, FINITE, HIT_ZERO, INFINITY, FlowSpec,
                        PetalRegion, integrate_primitive, trace_flow)
from .petals import Petal, petal_regions
from .ratform import RationalForm

DEFAULT_RESOLUTION = 50_000          # target triangle count
SHOOT_EPS_FACTOR = 1e-7
GL8_X = (-0.9602898564975363, -0.7966664774136267, -0.525532409916329,
         -0.18343464249564978, 0.18343464249564978, 0.525532409916329,
         0.7966664774136267, 0.9602898564975363)
GL8_W = (0.10122853629037626, 0.22238103445337448, 0.31370664587788727,
         0.362683783378362, 0.362683783378362, 0.31370664587788727,
         0.22238103445337448, 0.10122853629037626)


@dataclass
class MetricMesh:
    points: np.ndarray            # finite-chart coordinate (0j marker at infinity)
    charts: np.ndarray            # 0 finite, 1 xi-chart
    xi: np.ndarray                # xi coordinate where charts == 1
    triangles: np.ndarray
    edges: np.ndarray             # (ne, 2) int
    weights: np.ndarray           # metric length per edge
    zero_vertices: dict           # zero index -> vertex id
    graph: object                 # csr adjacency with metric weights
    h_mean: float                 # mean metric edge length
    h_euclid: float               # base euclidean grid spacing
    regions: list[PetalRegion]

    def vertex_point(self, k: int) -> complex:
        if self.charts[k] == 0:
            return complex(self.points[k])
        x = self.xi[k]
        return complex(1.0 / x) if x != 0 else complex("inf")


def _inside_any_region(regions):
    def test(xs, ys):
        out = np.zeros(len(xs), dtype=bool)
        for r in regions:
            c = shapely.contains_xy(r.polygon, xs, ys)
            out |= (~c) if r.inverted else c
        return out
    return test


def build_mesh(form: RationalForm, petals: list[Petal],
               resolution: int = DEFAULT_RESOLUTION, *,
               seed: int = 0) -> MetricMesh:
    """Conforming triangulation of the sphere minus the open petals.

    Background grid points are jittered (seeded) and graded 4x finer within
    0.2 of the zero separation around each zero; petal boundaries enter as
    dense point fences; when no petal contains z = infinity the far region
    is meshed in the xi = 1/z chart and glued along a shared ring.  Edge
    weights are 8-point Gauss quadrature of |R| |dz|.
    """
    regions = petal_regions(petals)
    rng = np.random.default_rng(np.random.SeedSequence([0x4D45, seed]))
    zeros = list(form.zeroes)
    sphere_closed = any(r.inverted for r in regions)

    boundary_flat: list[list[complex]] = []
    for pet in petals:
        boundary_flat.append([z if ch == FINITE else 1.0 / z
                              for ch, z in pet.boundary])
    sing_scale = max((abs(s) for s in form.singularities), default=1.0)
    all_bd = [w for poly in boundary_flat for w in poly]
    if sphere_closed:
        r_out = 1.05 * max(max(abs(w) for w in all_bd), sing_scale)
    else:
        far = max((abs(w) for w in all_bd), default=sing_scale)
        r_out = 1.3 * max(far, sing_scale) + 0.5

    target_pts = max(300, resolution // 2)
    h = math.sqrt(math.pi * r_out * r_out / target_pts)

    pts: list[complex] = []
    for poly in boundary_flat:
        step = min(h, _polyline_length(poly) / 40.0)
        keep = [poly[0]]
        acc = 0.0
        for a, b in zip(poly[:-1], poly[1:]):
            acc += abs(b - a)
            if acc >= 0.8 * step:
                keep.append(b)
                acc = 0.0
        pts.extend(keep[:-1] if keep[-1] == poly[-1] else keep)

    nband = int(2.0 * r_out / h) + 1
    gx = np.linspace(-r_out, r_out, nband)
    gxx, gyy = np.meshgrid(gx, gx)
    gz = (gxx + 1j * gyy).ravel()
    gz = gz + (rng.uniform(-0.18, 0.18, len(gz))
               + 1j * rng.uniform(-0.18, 0.18, len(gz))) * h
    gz = gz[np.abs(gz) <= r_out - 0.3 * h]

    if zeros:
        others = list(form.poles)
        sep = min(abs(a - b) for a in zeros for b in (zeros + others) if b != a)
        fine_r = 0.2 * sep
        fh = h / 4.0
        nf = max(3, int(2.0 * fine_r / fh) + 1)
        fx = np.linspace(-fine_r, fine_r, nf)
        fxx, fyy = np.meshgrid(fx, fx)
        fz0 = (fxx + 1j * fyy).ravel()
        for c in zeros:
            fz = c + fz0 + (rng.uniform(-0.18, 0.18, len(fz0))
                            + 1j * rng.uniform(-0.18, 0.18, len(fz0))) * fh
            fz = fz[np.abs(fz - c) <= fine_r]
            gz = np.concatenate([gz, fz])

    inside_any = _inside_any_region(regions)
    mask = ~inside_any(gz.real, gz.imag)
    for reg in regions:
        live = mask.nonzero()[0]
        if len(live) == 0:
            break
        d = shapely.distance(shapely.points(gz.real[live], gz.imag[live]),
                             reg.polygon.exterior)
        mask[live[d < 0.45 * h]] = False
    if zeros:
        # keep the grid out of the immediate neighbourhood of each zero
        live = mask.nonzero()[0]
        for c in zeros:
            mask[live[np.abs(gz[live] - c) < 0.35 * h / 4.0]] = False
            live = mask.nonzero()[0]
    pts.extend(gz[mask].tolist())

    ring_start = len(pts)
    ring: list[complex] = []
    if not sphere_closed:
        nring = max(24, int(2 * math.pi * r_out / h))
        ring = [r_out * (1.0 + 1e-4 * math.sin(7.1 * k)) *
                cmath.exp(2j * math.pi * (k + 0.13) / nring)
                for k in range(nring)]
        pts.extend(ring)

    zero_start = len(pts)
    pts.extend(zeros)

    # dedupe exact duplicates (petal corners coincide with zeroes)
    canon = np.zeros(len(pts), dtype=int)
    seen: dict[complex, int] = {}
    plist: list[complex] = []
    for k, v in enumerate(pts):
        key = complex(round(v.real, 12), round(v.imag, 12))
        if key not in seen:
            seen[key] = len(plist)
            plist.append(v)
        canon[k] = seen[key]
    points = np.asarray(plist, dtype=complex)
    zero_ids = {i: int(canon[zero_start + i]) for i in range(len(zeros))}

    tri_fin = Delaunay(np.column_stack([points.real, points.imag]))
    tris = tri_fin.simplices
    cent = points[tris].mean(axis=1)
    keep = ~inside_any(cent.real, cent.imag)
    if not sphere_closed:
        keep &= np.abs(cent) <= r_out * 1.002
    tris = tris[keep]

    n_fin = len(points)
    charts = np.zeros(n_fin, dtype=np.int8)
    xi_all = np.zeros(n_fin, dtype=complex)
    tri_blocks = [tris]

    if not sphere_closed:
        ring_ids = [int(canon[ring_start + k]) for k in range(len(ring))]
        rho = 1.0 / r_out
        xi_pts = [1.0 / w for w in ring]
        for rr in (0.15, 0.32, 0.5, 0.68, 0.85):
            mloc = max(6, int(len(ring) * rr * 0.5))
            for kk in range(mloc):
                xi_pts.append(rho * rr * cmath.exp(2j * math.pi * (kk + 0.3) / mloc))
        xi_pts.append(0j)
        xi_arr = np.asarray(xi_pts, dtype=complex)
        tri_xi = Delaunay(np.column_stack([xi_arr.real, xi_arr.imag]))
        xtris = tri_xi.simplices
        xc = np.abs(xi_arr[xtris].mean(axis=1))
        xtris = xtris[xc <= rho * 1.002]
        gid = np.zeros(len(xi_arr), dtype=int)
        gid[:len(ring)] = ring_ids
        extra = len(xi_arr) - len(ring)
        gid[len(ring):] = n_fin + np.arange(extra)
        charts = np.concatenate([charts, np.ones(extra, dtype=np.int8)])
        xi_all = np.concatenate([xi_all, xi_arr[len(ring):]])
        points = np.concatenate([points, np.array(
            [1.0 / x if x != 0 else 0j for x in xi_arr[len(ring):]])])
        tri_blocks.append(gid[xtris])

    tris = np.vstack(tri_blocks)
    edges = np.unique(np.sort(np.vstack([tris[:, [0, 1]], tris[:, [1, 2]],
                                         tris[:, [0, 2]]]), axis=1), axis=0)
    weights = _edge_weights(form, points, charts, xi_all, edges)
    graph = coo_matrix((weights, (edges[:, 0], edges[:, 1])),
                       shape=(len(points), len(points)))
    graph = (graph + graph.T).tocsr()
    return MetricMesh(points=points, charts=charts, xi=xi_all, triangles=tris,
                      edges=edges, weights=weights, zero_vertices=zero_ids,
                      graph=graph, h_mean=float(np.mean(weights)),
                      h_euclid=h, regions=regions)


def _polyline_length(poly) -> float:
    return sum(abs(b - a) for a, b in zip(poly[:-1], poly[1:]))


def _edge_weights(form, pts, charts, xi_all, edges) -> np.ndarray:
    i, j = edges[:, 0], edges[:, 1]
    both_finite = (charts[i] == 0) & (charts[j] == 0)
    w = np.zeros(len(edges))
    if np.any(both_finite):
        a = pts[i[both_finite]]
        b = pts[j[both_finite]]
        acc = np.zeros(len(a))
        for x, wt in zip(GL8_X, GL8_W):
            acc += wt * np.abs(form.r(a + (0.5 + 0.5 * x) * (b - a)))
        w[both_finite] = 0.5 * acc * np.abs(b - a)
    rest = ~both_finite
    if np.any(rest):
        def as_xi(ids):
            out = np.where(charts[ids] == 1, xi_all[ids], 0j)
            fin = charts[ids] == 0
            out[fin] = 1.0 / pts[ids[fin]]
            return out
        xa, xb = as_xi(i[rest]), as_xi(j[rest])
        acc = np.zeros(xa.shape)
        for x, wt in zip(GL8_X, GL8_W):
            acc += wt * np.abs(form.r_infinity_chart(xa + (0.5 + 0.5 * x) * (xb - xa)))
        w[rest] = 0.5 * acc * np.abs(xb - xa)
    return w


def shortest_path(mesh: MetricMesh, a: int, b: int):
    """Dijkstra upper bound between two zero vertices; (length, vertex ids)."""
    va, vb = mesh.zero_vertices[a], mesh.zero_vertices[b]
    if va == vb:
        return 0.0, [va]
    dist, pred = _csgraph_dijkstra(mesh.graph, directed=False, indices=va,
                                   return_predecessors=True)
    d = dist[vb]
    if not np.isfinite(d):
        raise NumericalError("mesh is disconnected", stage="shortest_path")
    path = [vb]
    while path[-1] != va:
        path.append(int(pred[path[-1]]))
    return float(d), path[::-1]


# ---------------------------------------------------------------------------
# shooting refinement
# ---------------------------------------------------------------------------

@dataclass
class GeodesicPath:
    polyline: list                      # chart-tagged points
    length: float
    breakpoints: list                   # zero indices of interior anchors
    endpoints: tuple                    # (zero a, zero b)
    displacement: complex
    departure_angle: float = math.nan   # developed angle in [0, 4pi) at start
    arrival_angle: float = math.nan     # developed angle in [0, 4pi) at end
    from_mesh_fallback: bool = False


def developed_angle(form: RationalForm, zero: complex, v: complex) -> float:
    """Lift of the tangent direction v at a simple zero into the [0, 4pi) cone.

    The local development doubles angles: a direction v maps to the ray
    arg(R'(c) v^2), and the lift arg(R') + 2 arg(v) with arg(v) in [0, 2pi)
    enumerates the cone injectively.
    """
    rp = form.dr(zero)
    return (cmath.phase(rp) + 2.0 * (cmath.phase(v) % (2.0 * math.pi))) \
        % (4.0 * math.pi)


def _departure_vector(form: RationalForm, zero: complex, psi: float) -> complex:
    rp = form.dr(zero)
    return cmath.exp(1j * ((psi - cmath.phase(rp)) / 2.0))


def _shoot_ray(form, regions, i_from, psi, t_max, i_target):
    zero = form.zeroes[i_from]
    eps = SHOOT_EPS_FACTOR * form.nearest_singularity(zero, exclude=zero)
    v = _departure_vector(form, zero, psi)
    u = cmath.exp(1j * (psi % (2.0 * math.pi)))
    return trace_flow(form, FlowSpec(
        start=zero + eps * v, direction_v=u, t_max=t_max,
        petals=regions, suppress_zero=i_from, suppress_radius=1e3 * eps,
        target_zero=i_target, target_radius=1e-7 * form.diameter(),
        zero_hit_radius=1e-7 * form.diameter()))


def shoot_between(form: RationalForm, regions, i_from: int, i_to: int,
                  psi0: float, t_budget: float, *, window: float = 0.08):
    """Straight flat segment from zero i_from to zero i_to by angle shooting.

    Bisection over the developed departure angle on the signed miss (which
    side of the target the ray passes).  Returns ((psi, trace), None) on
    success, or (None, (kind, index)) when an obstruction shadows the
    target.
    """
    target = form.zeroes[i_to]
    d_init = abs(target - form.zeroes[i_from])
    last_tr = None

    def attempt(psi):
        nonlocal last_tr
        tr = _shoot_ray(form, regions, i_from, psi, t_budget, i_to)
        last_tr = tr
        if tr.terminal.kind == HIT_ZERO and tr.terminal.index == i_to:
            return 0.0, tr
        if tr.closest_to_target is None:
            return None, tr
        d, t, z, tang = tr.closest_to_target
        if d > 0.9 * d_init:
            return None, tr  # the ray went elsewhere; side is meaningless
        side = (tang.conjugate() * (target - z)).imag
        return math.copysign(max(d, 1e-300), side), tr

    def find_valid(start, step, limit):
        # walk an endpoint inward/outward until the miss is meaningful
        psi = start
        for _ in range(24):
            f, _tr = attempt(psi)
            if f is not None:
                return psi, f
            psi += step
            if (step > 0 and psi > limit) or (step < 0 and psi < limit):
                break
        return None, None

    lo, hi = psi0 - window, psi0 + window
    for _ in range(7):
        plo, flo = find_valid(lo, window / 4.0, psi0)
        phi, fhi = find_valid(hi, -window / 4.0, psi0)
        if flo is not None and fhi is not None and (flo < 0) != (fhi < 0):
            lo, hi = plo, phi
            break
        lo -= window
        hi += window
    else:
        # classify the obstruction so the caller can insert an anchor
        tr = _shoot_ray(form, regions, i_from, psi0, t_budget, i_to)
        if tr.terminal.kind == HIT_ZERO and tr.terminal.index != i_to:
            return None, ("zero", tr.terminal.index)
        if tr.terminal.kind == ENTERED_PETAL:
            return None, ("petal", tr.terminal.index)
        return None, ("bracket", None)
    if flo == 0.0:
        return (lo, _shoot_ray(form, regions, i_from, lo, t_budget, i_to)), None
    if fhi == 0.0:
        return (hi, _shoot_ray(form, regions, i_from, hi, t_budget, i_to)), None

    # cone points magnify angles without bound, so the hit can need the
    # bracket driven down to the last few ulps of the departure angle
    for _ in range(96):
        mid = 0.5 * (lo + hi)
        fm, tr = attempt(mid)
        if fm == 0.0:
            return (mid, tr), None
        if fm is None:
            return None, ("lost", None)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
        if hi - lo < 4e-15 * (1.0 + abs(mid)):
            break
    if last_tr is not None and last_tr.terminal.kind == HIT_ZERO:
        return None, ("zero", last_tr.terminal.index)
    if last_tr is not None and last_tr.terminal.kind == ENTERED_PETAL:
        return None, ("petal", last_tr.terminal.index)
    return None, ("pinch", None)


def _segment_between(form, regions, i_from, i_to, psi_guess, t_budget,
                     window: float = 0.08):
    res, obstruction = shoot_between(form, regions, i_from, i_to, psi_guess,
                                     t_budget, window=window)
    if res is None:
        return None, obstruction
    psi, tr = res
    zero_b = form.zeroes[i_to]
    pts = [(FINITE, form.zeroes[i_from])] + [(ch, z) for _, ch, z in tr.samples[1:]]
    disp, quad_length = integrate_primitive(form, pts)
    length = abs(disp)  # the development of the segment is straight
    # arrival flag: the backward direction of a straight segment is exactly
    # psi + pi mod 2pi; only the 4pi-sheet bit comes from the geometry
    approx = None
    diam = form.diameter()
    for _, ch, z in reversed(tr.samples):
        w = z if ch == FINITE else 1.0 / z
        if 1e-4 * diam < abs(w - zero_b) < 5e-2 * diam:
            approx = developed_angle(form, zero_b, w - zero_b)
            break
    base = (psi + math.pi) % (2.0 * math.pi)
    if approx is None:
        arrival = base
    else:
        cands = [base, base + 2.0 * math.pi]
        arrival = min(cands, key=lambda c: _circ_gap(c, approx))
    seg = {
        "from": i_from, "to": i_to, "psi": psi,
        "polyline": pts, "displacement": disp, "length": length,
        "departure_angle": psi % (4.0 * math.pi),
        "arrival_angle": arrival % (4.0 * math.pi),
    }
    return seg, None


def _circ_gap(a: float, b: float, period: float = 4.0 * math.pi) -> float:
    d = abs(a - b) % period
    return min(d, period - d)


def refine_path(form: RationalForm, mesh: MetricMesh, path_ids: list,
                a: int, b: int, regions=None) -> GeodesicPath:
    """Replace a mesh path between zeroes by a chain of straight segments.

    Anchors are cone points; between consecutive anchors a straight flat
    segment is found by angle shooting, new anchors are inserted when an
    obstruction shadows the target, and interior anchors that no longer
    shorten the chain are removed.  Falls back to the mesh polyline (with a
    flag) if shooting cannot bracket the target.
    """
    if regions is None:
        regions = mesh.regions
    vertex_to_zero = {v: i for i, v in mesh.zero_vertices.items()}
    snap = _snap_radius(form, mesh)
    anchors = [a]
    anchor_pos = [0]
    for k, vid in enumerate(path_ids[1:-1], start=1):
        zi = vertex_to_zero.get(vid)
        if zi is None and mesh.charts[vid] == 0:
            # mesh paths often brush past a cone point without using its
            # vertex; treat a close pass as an anchor (pruned later if idle)
            w = mesh.vertex_point(vid)
            for iz, c in enumerate(form.zeroes):
                if abs(w - c) < snap:
                    zi = iz
                    break
        if zi is not None and zi != anchors[-1] and \
                not (zi in anchors and zi == b):
            anchors.append(zi)
            anchor_pos.append(k)
    if anchors[-1] != b:
        anchors.append(b)
        anchor_pos.append(len(path_ids) - 1)
    else:
        anchor_pos[-1] = len(path_ids) - 1

    mesh_len = _path_length(mesh, path_ids)
    budget = 1.6 * mesh_len + 0.5
    sub_slices = {(anchors[k], anchors[k + 1]):
                  path_ids[anchor_pos[k]:anchor_pos[k + 1] + 1]
                  for k in range(len(anchors) - 1)}

    def initial_guess(i_from, i_to):
        """The mesh path displacement fixes the departure direction mod 2pi
        exactly (path independence of the integral); the early mesh steps
        only resolve which sheet of the 4pi cone it lifts to."""
        zero = form.zeroes[i_from]
        ids = sub_slices.get((i_from, i_to))
        coarse = None
        if ids is not None:
            for vid in ids:
                w = mesh.vertex_point(vid)
                if math.isfinite(abs(w)) and abs(w - zero) > 1.2 * snap:
                    coarse = developed_angle(form, zero, w - zero)
                    break
            pts = [(FINITE, zero)] + \
                [(FINITE, mesh.vertex_point(v)) if mesh.charts[v] == 0
                 else (INFINITY, mesh.xi[v]) for v in ids[1:-1]] + \
                [(FINITE, form.zeroes[i_to])]
            try:
                W, _ = integrate_primitive(form, pts, qtol=1e-9)
            except NumericalError:
                W = None
        else:
            W = None
        if W is None or coarse is None:
            v0 = form.zeroes[i_to] - zero
            return developed_angle(form, zero, v0), 0.4
        base = cmath.phase(W) % (2.0 * math.pi)
        psi0 = min((base, base + 2.0 * math.pi),
                   key=lambda c: _circ_gap(c, coarse))
        return psi0, 0.08

    def solve(i_from, i_to, depth=0):
        psi0, window = initial_guess(i_from, i_to)
        seg, obstruction = _segment_between(form, regions, i_from, i_to,
                                            psi0, budget, window=window)
        if seg is not None:
            return [seg]
        kind, idx = obstruction
        if depth < 4:
            block = None
            if kind == "zero" and idx not in (i_from, i_to):
                block = idx
            elif kind == "petal":
                corner = _petal_corner(regions, idx)
                if corner is not None and corner not in (i_from, i_to):
                    block = corner
            if block is not None:
                left = solve(i_from, block, depth + 1)
                right = solve(block, i_to, depth + 1)
                if left and right:
                    return left + right
        return None

    chain = []
    ok = True
    for i_from, i_to in zip(anchors[:-1], anchors[1:]):
        part = solve(i_from, i_to)
        if part is None:
            ok = False
            break
        chain.extend(part)

    if not ok:
        pts = [(FINITE, mesh.vertex_point(v)) if mesh.charts[v] == 0
               else (INFINITY, mesh.xi[v]) for v in path_ids]
        disp, _ = integrate_primitive(form, pts)
        return GeodesicPath(polyline=pts, length=mesh_len,
                            breakpoints=anchors[1:-1], endpoints=(a, b),
                            displacement=disp, from_mesh_fallback=True)

    improved = True
    sweeps = 0
    while improved and sweeps < 6:
        improved = False
        sweeps += 1
        k = 0
        while k + 1 < len(chain):
            s1, s2 = chain[k], chain[k + 1]
            base = cmath.phase(s1["displacement"] + s2["displacement"]) \
                % (2.0 * math.pi)
            guess = min((base, base + 2.0 * math.pi),
                        key=lambda c: _circ_gap(c, s1["psi"]))
            cand, _ = _segment_between(form, regions, s1["from"], s2["to"],
                                       guess, budget)
            if cand is not None and cand["length"] <= s1["length"] + s2["length"] + 1e-12:
                chain[k:k + 2] = [cand]
                improved = True
            else:
                k += 1

    polyline = []
    total_len = 0.0
    disp = 0j
    for s in chain:
        part = s["polyline"] if not polyline else s["polyline"][1:]
        polyline.extend(part)
        total_len += s["length"]
        disp += s["displacement"]
    return GeodesicPath(
        polyline=polyline, length=total_len,
        breakpoints=[s["to"] for s in chain[:-1]], endpoints=(a, b),
        displacement=disp,
        departure_angle=chain[0]["departure_angle"],
        arrival_angle=chain[-1]["arrival_angle"])


def _snap_radius(form: RationalForm, mesh: MetricMesh) -> float:
    sep = min((abs(x - y) for x in form.zeroes for y in form.singularities
               if x != y), default=1.0)
    return min(0.25 * sep, 0.45 * mesh.h_euclid)


def _petal_corner(regions, pole_index):
    for r in regions:
        if r.pole_index == pole_index:
            return r.corner_zero
    return None


def _path_length(mesh: MetricMesh, ids: list) -> float:
    g = mesh.graph
    return float(sum(g[ids[k], ids[k + 1]] for k in range(len(ids) - 1)))


# ---------------------------------------------------------------------------
# the greedy tree
# ---------------------------------------------------------------------------

@dataclass
class SpanningTree:
    order: list                    # chosen zero indices c^(1..n-2)
    edges: list                    # GeodesicPath per stage, n-3 of them
    parents: list                  # index into `order` realizing each stage
    distance_matrix: np.ndarray
    warnings: list


def all_pairs_refined(form: RationalForm, mesh: MetricMesh, regions=None):
    """Refined distance matrix and geodesic paths between all zero pairs."""
    m = len(form.zeroes)
    D = np.zeros((m, m))
    paths: dict[tuple[int, int], GeodesicPath] = {}
    for i in range(m):
        for j in range(i + 1, m):
            d_mesh, ids = shortest_path(mesh, i, j)
            gp = refine_path(form, mesh, ids, i, j, regions=regions)
            D[i, j] = D[j, i] = gp.length
            gp.mesh_length = d_mesh
            paths[(i, j)] = gp
    return D, paths


def greedy_tree(form: RationalForm, mesh: MetricMesh, regions=None) -> SpanningTree:
    """Greedy cut system: closest pair first, then nearest zero to the set.

    Ties break lexicographically by (distance, lower zero index, lower
    parent index) so repeated runs give identical trees.
    """
    m = len(form.zeroes)
    if m < 2:
        raise ValueError("greedy tree needs at least two zeroes (n >= 4)")
    D, paths = all_pairs_refined(form, mesh, regions)
    warnings = []

    pair_keys = sorted((D[i, j], i, j) for i in range(m) for j in range(i + 1, m))
    if len(pair_keys) > 1 and pair_keys[1][0] - pair_keys[0][0] < 1e-12:
        warnings.append("distance degeneracy at stage 1; tie-break applied")
    _, i0, j0 = pair_keys[0]
    order = [i0, j0]
    edges = [paths[(i0, j0)]]
    parents = [0]

    while len(order) < m:
        cand = []
        for c in range(m):
            if c in order:
                continue
            for pi, p in enumerate(order):
                cand.append((D[min(c, p), max(c, p)], c, pi))
        cand.sort()
        if len(cand) > 1 and cand[1][0] - cand[0][0] < 1e-12 and \
                cand[1][1] != cand[0][1]:
            warnings.append(f"distance degeneracy at stage {len(order)}")
        d, c, pi = cand[0]
        p = order[pi]
        gp = paths[(min(c, p), max(c, p))]
        if gp.endpoints != (p, c):
            gp = _reverse_path(gp)
        order.append(c)
        edges.append(gp)
        parents.append(pi)
    return SpanningTree(order=order, edges=edges, parents=parents,
                        distance_matrix=D, warnings=warnings)


def _reverse_path(gp: GeodesicPath) -> GeodesicPath:
    out = GeodesicPath(
        polyline=list(reversed(gp.polyline)), length=gp.length,
        breakpoints=list(reversed(gp.breakpoints)),
        endpoints=(gp.endpoints[1], gp.endpoints[0]),
        displacement=-gp.displacement,
        departure_angle=gp.arrival_angle,
        arrival_angle=gp.departure_angle,
        from_mesh_fallback=gp.from_mesh_fallback)
    return out


# ---------------------------------------------------------------------------
# non-crossing verification
# ---------------------------------------------------------------------------

def _simplify(points: list[complex], tol: float) -> list[complex]:
    """Douglas-Peucker simplification."""
    if len(points) < 3:
        return points
    a, b = points[0], points[-1]
    dmax, idx = 0.0, 0
    for k in range(1, len(points) - 1):
        d = _point_seg_dist(points[k], a, b)
        if d > dmax:
            dmax, idx = d, k
    if dmax <= tol:
        return [a, b]
    left = _simplify(points[:idx + 1], tol)
    right = _simplify(points[idx:], tol)
    return left[:-1] + right


def _point_seg_dist(p, a, b):
    ab = b - a
    den = (ab.real * ab.real + ab.imag * ab.imag)
    if den == 0:
        return abs(p - a)
    t = ((p - a).real * ab.real + (p - a).imag * ab.imag) / den
    t = max(0.0, min(1.0, t))
    return abs(p - (a + t * ab))


def _segments_cross(a0, a1, b0, b1):
    def orient(p, q, r):
        return ((q - p).conjugate() * (r - p)).imag
    d1 = orient(a0, a1, b0)
    d2 = orient(a0, a1, b1)
    d3 = orient(b0, b1, a0)
    d4 = orient(b0, b1, a1)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _seg_seg_dist(a0, a1, b0, b1):
    if _segments_cross(a0, a1, b0, b1):
        return 0.0
    return min(_point_seg_dist(a0, b0, b1), _point_seg_dist(a1, b0, b1),
               _point_seg_dist(b0, a0, a1), _point_seg_dist(b1, a0, a1))


def verify_noncrossing(form: RationalForm, tree: SpanningTree):
    """Cuts may meet only at shared endpoint zeroes; (ok, witness or None)."""
    diam = form.diameter()
    tol = 1e-8 * diam
    excl = 1e-5 * diam
    polys = []
    for gp in tree.edges:
        flat = [z if ch == FINITE else 1.0 / z for ch, z in gp.polyline]
        polys.append(_simplify(flat, 0.2 * tol))

    for e1 in range(len(tree.edges)):
        for e2 in range(e1 + 1, len(tree.edges)):
            g1, g2 = tree.edges[e1], tree.edges[e2]
            shared = set(g1.endpoints) | set(g1.breakpoints)
            shared &= set(g2.endpoints) | set(g2.breakpoints)
            shared_pts = [form.zeroes[i] for i in shared]
            p1, p2 = polys[e1], polys[e2]
            for i in range(len(p1) - 1):
                for j in range(len(p2) - 1):
                    d = _seg_seg_dist(p1[i], p1[i + 1], p2[j], p2[j + 1])
                    if d < tol:
                        w = _closest_point_pair(p1[i], p1[i + 1], p2[j], p2[j + 1])
                        if not any(abs(w - s) < excl for s in shared_pts):
                            return False, w
    return True, None


def _closest_point_pair(a0, a1, b0, b1):
    best = (math.inf, a0)
    for t in np.linspace(0.0, 1.0, 33):
        p = a0 + t * (a1 - a0)
        d = _point_seg_dist(p, b0, b1)
        if d < best[0]:
            best = (d, p)
    return best[1]
