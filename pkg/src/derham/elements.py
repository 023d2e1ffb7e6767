"""Local element definitions: shape spaces, DoF functionals, unisolvence.

Families are indexed by a smoothness grade r (0 = classical Lagrange /
Nedelec second kind / BDM / DG, 1 = Hermite-grade vertex continuity,
2 = second-order vertex continuity), plus 'hz' for the edge-continuous
H(div) element in 3D and 'minus' for the trimmed (first-kind) H(div) space.

All moment DoFs are normalized by the measure of their subsimplex, and
every integral is exact (barycentric formula).  DoFs attached to a shared
subsimplex are generated from global mesh data only, so two cells sharing
a face produce identical functionals and assembly needs no sign fixes.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, combinations_with_replacement

import numpy as np

from .forms import (FormPolynomial, Simplex, dim_full, dim_trimmed, full_basis,
                    independent_subset, monomials, poly_mul, span_rank,
                    trimmed_basis, RANK_RTOL)
from .mesh import SimplicialMesh

UNISOLVENCE_TOL = 1e-6
KRONECKER_TOL = 1e-8


# ---------------------------------------------------------------------------
# DoF functionals
# ---------------------------------------------------------------------------

@dataclass
class DoF:
    entity_dim: int
    entity_verts: tuple
    klass: str
    shared: bool

    def apply(self, u, cell_verts):
        raise NotImplementedError


@dataclass
class PointEval(DoF):
    point: np.ndarray = None
    weight: np.ndarray = None   # None for scalars; proxy weight otherwise

    def apply(self, u, cell_verts):
        f = u if self.weight is None else u.proxy_contract(self.weight)
        return float(f.eval(self.point[None, :])[()].item()) if () in f.comps else 0.0


@dataclass
class PointDeriv(DoF):
    point: np.ndarray = None
    directions: tuple = ()
    weight: np.ndarray = None

    def apply(self, u, cell_verts):
        f = u if self.weight is None else u.proxy_contract(self.weight)
        for d in self.directions:
            f = f.directional_derivative(d)
        return float(f.eval(self.point[None, :])[()].item()) if () in f.comps else 0.0


def _vmap(entity_verts, cell_verts):
    return [cell_verts.index(v) for v in entity_verts]


@dataclass
class ScalarMoment(DoF):
    """(1/|s|) * integral over s of (scalar u) * q."""
    sub: Simplex = None
    q: dict = None

    def apply(self, u, cell_verts):
        tr = u.restrict(self.sub, _vmap(self.entity_verts, cell_verts))
        if () not in tr.comps:
            return 0.0
        prod = FormPolynomial(self.sub, 0, {(): poly_mul(tr.comps[()], self.q)})
        return float(prod.integrate_scalar() / self.sub.measure)


@dataclass
class NormalDerivMoment(DoF):
    """(1/|s|) * integral over s of (directional derivative of u) * q."""
    sub: Simplex = None
    q: dict = None
    direction: np.ndarray = None

    def apply(self, u, cell_verts):
        du = u.directional_derivative(self.direction)
        tr = du.restrict(self.sub, _vmap(self.entity_verts, cell_verts))
        if () not in tr.comps:
            return 0.0
        prod = FormPolynomial(self.sub, 0, {(): poly_mul(tr.comps[()], self.q)})
        return float(prod.integrate_scalar() / self.sub.measure)


@dataclass
class ComponentMoment(DoF):
    """(1/|s|) * integral over s of (vector-proxy of u . weight) * q."""
    sub: Simplex = None
    q: dict = None
    weight: np.ndarray = None

    def apply(self, u, cell_verts):
        f = u.proxy_contract(self.weight)
        tr = f.restrict(self.sub, _vmap(self.entity_verts, cell_verts))
        if () not in tr.comps:
            return 0.0
        prod = FormPolynomial(self.sub, 0, {(): poly_mul(tr.comps[()], self.q)})
        return float(prod.integrate_scalar() / self.sub.measure)


@dataclass
class TraceWedgeMoment(DoF):
    """(1/|s|) * integral over s of Tr(u) wedge eta, eta a test form on s."""
    sub: Simplex = None
    eta: FormPolynomial = None

    def apply(self, u, cell_verts):
        tr = u.restrict(self.sub, _vmap(self.entity_verts, cell_verts))
        return float(tr.wedge(self.eta).integrate() / self.sub.measure)


@dataclass
class CellWedgeMoment(DoF):
    """(1/|t|) * integral over the cell of u wedge eta (no restriction)."""
    eta: FormPolynomial = None

    def apply(self, u, cell_verts):
        w = u.wedge(self.eta)
        if w.k == 0:
            return float(w.integrate_scalar() / u.simplex.measure)
        return float(w.integrate() / u.simplex.measure)


# ---------------------------------------------------------------------------
# element definitions
# ---------------------------------------------------------------------------

_P_MIN = {
    # (r, k, n): minimal polynomial degree
    (0, 0, 1): 1, (0, 1, 1): 0,
    (1, 0, 1): 3, (1, 1, 1): 1,
    (2, 0, 1): 5, (2, 1, 1): 3,
    (0, 0, 2): 1, (0, 1, 2): 1, (0, 2, 2): 0,
    (1, 0, 2): 3, (1, 1, 2): 1, (1, 2, 2): 0,
    (2, 0, 2): 5, (2, 1, 2): 3, (2, 2, 2): 1,
    (0, 0, 3): 1, (0, 1, 3): 1, (0, 2, 3): 1, (0, 3, 3): 0,
    (1, 0, 3): 3, (1, 1, 3): 1, (1, 2, 3): 1, (1, 3, 3): 0,
    (2, 0, 3): 5, (2, 1, 3): 4, (2, 2, 3): 1, (2, 3, 3): 0,
    ("hz", 2, 3): 2,
    ("minus", 2, 3): 1,
}

_LABELS = {
    (0, 0): "lagrange", (0, 1): "nedelec2/bdm", (0, 2): "bdm", (0, 3): "dg",
    (1, 0): "hermite", (1, 1): "vertex-continuous vector", (1, 2): "bdm", (1, 3): "dg",
    (2, 0): "second-order vertex scalar", (2, 1): "derivative-continuous vector",
    (2, 2): "vertex-continuous hdiv", (2, 3): "dg",
    ("hz", 2): "edge-continuous hdiv", ("minus", 2): "trimmed hdiv",
}


@dataclass(frozen=True)
class ElementDef:
    r: object
    p: int
    k: int
    n: int

    @property
    def label(self):
        if self.n == 1 and self.r in (0, 1, 2):
            return {(0, 0): "lagrange", (0, 1): "dg",
                    (1, 0): "hermite", (1, 1): "lagrange",
                    (2, 0): "second-order vertex scalar", (2, 1): "hermite"}[(self.r, self.k)]
        if self.k == self.n:
            if self.r == 2 and self.n == 2:
                return "vertex-continuous dg"
            return "dg"
        return _LABELS.get((self.r, self.k), f"r{self.r} k{self.k}")

    @property
    def local_dim(self):
        if self.r == "minus":
            return dim_trimmed(self.n, self.p, self.k)
        return dim_full(self.n, self.p, self.k)


def element_def(r, p, k, n):
    """Validate and return an element definition for the (r, p, k, n) family."""
    if n not in (1, 2, 3):
        raise ValueError(f"dimension {n} not supported")
    if k < 0 or k > n:
        raise ValueError(f"form degree k={k} invalid in dimension {n}")
    key = (r, k, n)
    if key not in _P_MIN:
        raise ValueError(f"no family r={r}, k={k} in dimension {n}")
    if p < _P_MIN[key]:
        raise ValueError(
            f"family r={r}, k={k}, n={n} requires p >= {_P_MIN[key]} (got p={p})")
    return ElementDef(r, p, k, n)


def p_min(r, k, n):
    return _P_MIN[(r, k, n)]


def shape_basis(el, simplex):
    if el.r == "minus":
        return trimmed_basis(simplex, el.p, el.k)
    return full_basis(simplex, el.p, el.k)


def _qpolys(sub, deg):
    """Scalar test monomials of total degree deg on a subsimplex."""
    return [({a: 1}) for a in monomials(sub.dim + 1, deg)] if deg >= 0 else []


def _axes(n):
    return [np.eye(n)[i] for i in range(n)]


def entity_dofs(el, mesh, d, idx):
    """DoFs attached to one subsimplex; cell-interior blocks use d == n."""
    r, p, k, n = el.r, el.p, el.k, el.n
    everts = mesh.skeleton[d][idx]
    shared = d < n
    out = []

    if d == 0:
        v = int(everts[0])
        pt = mesh.vertices[v]
        if k == 0:
            if r in (0, 1, 2):
                out.append(PointEval(0, everts, "vertex-value", shared, point=pt))
            if r in (1, 2):
                for i, e in enumerate(_axes(n)):
                    out.append(PointDeriv(0, everts, f"vertex-d{i}", shared,
                                          point=pt, directions=(e,)))
            if r == 2:
                for (i, j) in combinations_with_replacement(range(n), 2):
                    ax = _axes(n)
                    out.append(PointDeriv(0, everts, f"vertex-d{i}{j}", shared,
                                          point=pt, directions=(ax[i], ax[j])))
        elif k == 1 and r in (1, 2):
            for i, e in enumerate(_axes(n)):
                out.append(PointEval(0, everts, f"vertex-c{i}", shared,
                                     point=pt, weight=e))
            if r == 2:
                for i, e in enumerate(_axes(n)):
                    for j, dj in enumerate(_axes(n)):
                        out.append(PointDeriv(0, everts, f"vertex-c{i}d{j}", shared,
                                              point=pt, directions=(dj,), weight=e))
        elif k == n - 1 and n == 3 and r in (2, "hz"):
            for i, e in enumerate(_axes(n)):
                out.append(PointEval(0, everts, f"vertex-c{i}", shared,
                                     point=pt, weight=e))
        elif k == n and r == 2 and n == 2:
            out.append(PointEval(0, everts, "vertex-value", shared,
                                 point=pt, weight=np.array([1.0])))
        return out

    if d < n:
        sub = mesh.sub_simplex(d, idx)
    else:
        sub = None

    if d == 1 and d < n:
        if k == 0:
            if r == 0:
                degq = p - 2
                for q in _qpolys(sub, degq):
                    out.append(ScalarMoment(1, everts, "edge-moment", shared, sub=sub, q=q))
            elif r == 1:
                for q in _qpolys(sub, p - 4):
                    out.append(ScalarMoment(1, everts, "edge-moment", shared, sub=sub, q=q))
            elif r == 2:
                fr = mesh.frame(1, idx)
                for i, nu in enumerate(fr.normals):
                    for q in _qpolys(sub, p - 5):
                        out.append(NormalDerivMoment(1, everts, f"edge-nderiv{i}", shared,
                                                     sub=sub, q=q, direction=nu))
                for q in _qpolys(sub, p - 6):
                    out.append(ScalarMoment(1, everts, "edge-moment", shared, sub=sub, q=q))
        elif k == 1:
            if r in (0, 1):
                degq = p if r == 0 else p - 2
                for q in _qpolys(sub, degq):
                    eta = FormPolynomial(sub, 0, {(): q})
                    out.append(TraceWedgeMoment(1, everts, "edge-trace", shared,
                                                sub=sub, eta=eta))
            elif r == 2:
                for i, e in enumerate(_axes(n)):
                    for q in _qpolys(sub, p - 4):
                        out.append(ComponentMoment(1, everts, f"edge-c{i}", shared,
                                                   sub=sub, q=q, weight=e))
        elif k == 2 and r == "hz":
            fr = mesh.frame(1, idx)
            for i, nu in enumerate(fr.normals):
                for q in _qpolys(sub, p - 2):
                    out.append(ComponentMoment(1, everts, f"edge-normal{i}", shared,
                                               sub=sub, q=q, weight=nu))
        return out

    if d == 2 and d < n:
        # faces of tetrahedra
        if k == 0:
            degq = {0: p - 3, 1: p - 3, 2: p - 6}[r]
            for q in _qpolys(sub, degq):
                out.append(ScalarMoment(2, everts, "face-moment", shared, sub=sub, q=q))
        elif k == 1:
            if r in (0, 1):
                for eta in trimmed_basis(sub, p - 1, 1):
                    out.append(TraceWedgeMoment(2, everts, "face-trace", shared,
                                                sub=sub, eta=eta))
            elif r == 2:
                for axis in range(2):
                    for q in _qpolys(sub, p - 3):
                        eta = FormPolynomial(sub, 1, {(axis,): q})
                        out.append(TraceWedgeMoment(2, everts, f"face-t{axis}", shared,
                                                    sub=sub, eta=eta))
        elif k == 2:
            if r in (0, 1, "minus"):
                degq = p if r in (0, 1) else p - 1
                for q in _qpolys(sub, degq):
                    eta = FormPolynomial(sub, 0, {(): q})
                    out.append(TraceWedgeMoment(2, everts, "face-normal", shared,
                                                sub=sub, eta=eta))
            elif r == 2:
                for a in monomials(3, p):
                    if max(a) == p:   # skip pure vertex monomials: q = 0 at vertices
                        continue
                    eta = FormPolynomial(sub, 0, {(): {a: 1}})
                    out.append(TraceWedgeMoment(2, everts, "face-normal", shared,
                                                sub=sub, eta=eta))
            elif r == "hz":
                for q in _qpolys(sub, p - 3):
                    eta = FormPolynomial(sub, 0, {(): q})
                    out.append(TraceWedgeMoment(2, everts, "face-normal", shared,
                                                sub=sub, eta=eta))
        return out

    # cell-interior DoFs (d == n); idx is the cell index, one block per cell
    cell = mesh.cell_simplex(idx)
    everts = tuple(int(v) for v in mesh.cells[idx])
    if k == 0:
        if r == 0:
            degq = p - n - 1
        elif r == 1:
            degq = p - 3 if n == 2 else p - 4
        else:
            degq = p - 6 if n <= 2 else p - 4
        for a in monomials(n + 1, degq):
            eta = FormPolynomial(cell, 0, {(): {a: 1}})
            out.append(CellWedgeMoment(n, everts, "interior", False, eta=eta))
    elif k == n and n == 1:
        degq = {0: p, 1: p - 2, 2: p - 4}[r]
        for a in monomials(2, degq):
            eta = FormPolynomial(cell, 0, {(): {a: 1}})
            out.append(CellWedgeMoment(n, everts, "interior", False, eta=eta))
    elif k == n:
        if el.r == 2 and n == 2:
            test_alphas = [a for a in monomials(3, p) if max(a) < p]
        else:
            test_alphas = monomials(n + 1, p)
        for a in test_alphas:
            eta = FormPolynomial(cell, 0, {(): {a: 1}})
            out.append(CellWedgeMoment(n, everts, "interior", False, eta=eta))
    elif k == 1 and n == 2:
        if r in (0, 1):
            for eta in trimmed_basis(cell, p - 1, 1):
                out.append(CellWedgeMoment(2, everts, "interior", False, eta=eta))
        elif r == 2:
            for i, e in enumerate(_axes(2)):
                for a in monomials(3, p - 3):
                    out.append(_interior_component_moment(cell, everts, e, {a: 1},
                                                          f"interior-c{i}"))
    elif k == 1 and n == 3:
        for eta in trimmed_basis(cell, p - 2, 2):
            out.append(CellWedgeMoment(3, everts, "interior", False, eta=eta))
    elif k == 2 and n == 3:
        if r == "minus":
            for eta in full_basis(cell, p - 2, 1):
                out.append(CellWedgeMoment(3, everts, "interior", False, eta=eta))
        else:
            for eta in trimmed_basis(cell, p - 1, 1):
                out.append(CellWedgeMoment(3, everts, "interior", False, eta=eta))
    return out


def _interior_component_moment(cell, everts, weight, q, klass):
    """Interior (u . e_i) moments for the 2D r=2 vector element."""
    n = cell.dim
    # represent as a wedge with the top-degree form q * (e_i paired via proxy):
    # for a 1-form u in 2D, u wedge (w dy) picks components; easiest is a
    # dedicated functional evaluating the contraction directly.
    dof = _InteriorComponent(n, tuple(everts), klass, False)
    dof.weight = np.asarray(weight, float)
    dof.q = dict(q)
    return dof


@dataclass
class _InteriorComponent(DoF):
    weight: np.ndarray = None
    q: dict = None

    def apply(self, u, cell_verts):
        f = u.proxy_contract(self.weight)
        if () not in f.comps:
            return 0.0
        prod = FormPolynomial(u.simplex, 0, {(): poly_mul(f.comps[()], self.q)})
        return float(prod.integrate_scalar() / u.simplex.measure)


def cell_dofs(el, mesh, ci, cache=None):
    """Ordered DoF list of a cell: entity blocks by dimension, then entity."""
    cverts = tuple(int(v) for v in mesh.cells[ci])
    out = []
    for d in range(el.n):
        for everts in combinations(cverts, d + 1):
            idx = mesh.simplex_id(everts)
            key = (el.r, el.p, el.k, d, idx)
            if cache is not None and key in cache:
                block = cache[key]
            else:
                block = entity_dofs(el, mesh, d, idx)
                if cache is not None:
                    cache[key] = block
            out.extend(block)
    out.extend(entity_dofs(el, mesh, el.n, ci))
    return out


def _single_cell_mesh(simplex_vertices):
    verts = np.asarray(simplex_vertices, float)
    return SimplicialMesh(verts, [tuple(range(len(verts)))])


def dof_matrix(el, simplex_vertices):
    """Square DoF-by-shape matrix on one simplex (exact integrals, float)."""
    mesh = _single_cell_mesh(simplex_vertices)
    cell = mesh.cell_simplex(0)
    dofs = cell_dofs(el, mesh, 0)
    basis = shape_basis(el, cell)
    cverts = tuple(int(v) for v in mesh.cells[0])
    M = np.empty((len(dofs), len(basis)))
    for j, b in enumerate(basis):
        for i, dof in enumerate(dofs):
            M[i, j] = dof.apply(b, cverts)
    return M, dofs, basis


def unisolvence_check(el, simplex_vertices, tol=UNISOLVENCE_TOL):
    """Full-rank test of the DoF matrix; fail is a result, not an error.

    Rows are equilibrated to unit sup norm first: each DoF functional is only
    defined up to a nonzero factor, and mixing point derivatives with moments
    otherwise skews the singular-value ratio for no structural reason.
    """
    M, dofs, basis = dof_matrix(el, simplex_vertices)
    report = {
        "family": (el.r, el.p, el.k, el.n),
        "n_dofs": len(dofs),
        "dim_shape": len(basis),
        "square": len(dofs) == len(basis),
    }
    if M.size:
        rownorm = np.abs(M).max(axis=1)
        if np.any(rownorm == 0.0):
            report.update(sigma_max=0.0, sigma_min=0.0, sigma_ratio=0.0, rank=0,
                          **{"pass": False})
            return report
        M = M / rownorm[:, None]
    sv = np.linalg.svd(M, compute_uv=False) if M.size else np.array([])
    report["sigma_max"] = float(sv[0]) if sv.size else 0.0
    report["sigma_min"] = float(sv[-1]) if sv.size else 0.0
    report["sigma_ratio"] = report["sigma_min"] / report["sigma_max"] if sv.size else 0.0
    report["rank"] = int(np.sum(sv > tol * sv[0])) if sv.size else 0
    report["pass"] = report["square"] and report["rank"] == len(basis)
    return report


def dual_basis(el, simplex_vertices):
    """Basis dual to the DoFs (Kronecker property), grouped by DoF class."""
    M, dofs, basis = dof_matrix(el, simplex_vertices)
    if len(dofs) != len(basis):
        raise ValueError("DoF count does not match shape dimension")
    C = np.linalg.inv(M)
    duals = []
    for j in range(len(dofs)):
        f = FormPolynomial(basis[0].simplex, el.k)
        for m, b in enumerate(basis):
            if C[m, j] != 0.0:
                f = f + b.as_float().scale(C[m, j])
        duals.append(f)
    resid = np.abs(M @ C - np.eye(len(dofs))).max()
    if resid > KRONECKER_TOL:
        raise RuntimeError(f"dual basis residual {resid:.2e} exceeds tolerance")
    return duals, dofs, resid


# ---------------------------------------------------------------------------
# bubbles
# ---------------------------------------------------------------------------

def tangential_bubble_span(simplex, p):
    """Spanning set q * (prod of three barycentrics) * nu_i on a tetrahedron.

    nu_i is the unit normal of the face opposite vertex i.  The span equals
    the full tangential-trace-free subspace; callers reduce it to a basis.
    """
    if simplex.dim != 3:
        raise ValueError("tangential bubbles live on tetrahedra")
    out = []
    grads = simplex.grad_bary_float()
    for i in range(4):
        others = [j for j in range(4) if j != i]
        nu = grads[i] / np.linalg.norm(grads[i])   # normal of face opposite i
        lam_prod = {}
        alpha = [0, 0, 0, 0]
        for j in others:
            alpha[j] = 1
        lam_prod[tuple(alpha)] = 1
        for a in monomials(4, p - 3):
            poly = poly_mul(lam_prod, {a: 1})
            comps = {}
            for axis in range(3):
                if nu[axis] != 0.0:
                    comps[(axis,)] = {e: c * nu[axis] for e, c in poly.items()}
            out.append(FormPolynomial(simplex, 1, comps))
    return out


def zero_trace_dim(mesh, p, k, jet_orders=None):
    """Dimension of {u in P_p Lambda^k(cell): vanishing boundary traces}.

    On the single cell of ``mesh``, constrains the pullback onto every
    boundary facet to vanish; ``jet_orders`` additionally constrains vertex
    jets (scalar case).  Returns (dimension, nullspace basis as forms).
    """
    cell = mesh.cell_simplex(0)
    n = mesh.dim
    basis = full_basis(cell, p, k)
    cverts = tuple(int(v) for v in mesh.cells[0])
    rows = []
    for fi in range(len(mesh.skeleton[n - 1])):
        sub = mesh.sub_simplex(n - 1, fi)
        everts = mesh.skeleton[n - 1][fi]
        vmap = [cverts.index(v) for v in everts]
        coeff_rows = {}
        for j, b in enumerate(basis):
            tr = b.restrict(sub, vmap)
            for key, poly in tr.comps.items():
                for e, c in poly.items():
                    coeff_rows.setdefault((key, e), np.zeros(len(basis)))[j] = float(c)
        rows.extend(coeff_rows.values())
    A = np.array(rows) if rows else np.zeros((0, len(basis)))
    ns = _nullspace(A)
    forms = []
    for col in range(ns.shape[1]):
        f = FormPolynomial(cell, k)
        for m, b in enumerate(basis):
            if abs(ns[m, col]) > 1e-14:
                f = f + b.as_float().scale(ns[m, col])
        forms.append(f)
    return ns.shape[1], forms


def _nullspace(A, rtol=RANK_RTOL):
    if A.size == 0:
        return np.eye(A.shape[1]) if A.ndim == 2 else np.zeros((0, 0))
    u, s, vt = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    return vt[rank:].T


def bubble_basis(el, simplex_vertices):
    """Trace-free shape functions of an element on one simplex.

    For the 3D H(curl) case returns the reduced spanning construction; for
    the 2D H(div) case returns the normal-trace-free subspace.
    """
    mesh = _single_cell_mesh(simplex_vertices)
    cell = mesh.cell_simplex(0)
    if el.n == 3 and el.k == 1:
        span = tangential_bubble_span(cell, el.p)
        return independent_subset(span, p=el.p)
    if el.n == 2 and el.k == 1:
        _, forms = zero_trace_dim(mesh, el.p, 1)
        return forms
    raise ValueError("bubble bases implemented for k=1 in dimensions 2 and 3")


def hcurl_bubble_dim_formula(p):
    """Closed form printed for the 3D tangential bubble space."""
    return (p ** 3 - 2 * p ** 2 - p + 2) // 2


# ---------------------------------------------------------------------------
# vertex jet sequences and subsimplex bubble counts
# ---------------------------------------------------------------------------

def jet_complex_ranks(n, r):
    """Symbol-matrix exactness of the vertex jet sequence in dimension n."""
    if r == 1:
        vars0 = ["u"] + [f"u{i}" for i in range(n)]
        vars1 = [f"w{i}" for i in range(n)]
        d0 = np.zeros((len(vars1), len(vars0)))
        for i in range(n):
            d0[i, 1 + i] = 1.0
        dims = [len(vars0), len(vars1), 0]
        mats = [d0]
    elif r == 2:
        pairs = list(combinations_with_replacement(range(n), 2))
        vars0 = ["u"] + [f"u{i}" for i in range(n)] + [f"u{i}{j}" for i, j in pairs]
        vars1 = [f"w{i}" for i in range(n)] + [f"w{i}_{j}" for i in range(n) for j in range(n)]
        vars2 = [f"v{i}{j}" for i, j in combinations(range(n), 2)]
        idx0 = {v: i for i, v in enumerate(vars0)}
        idx1 = {v: i for i, v in enumerate(vars1)}
        d0 = np.zeros((len(vars1), len(vars0)))
        for i in range(n):
            d0[idx1[f"w{i}"], idx0[f"u{i}"]] = 1.0
            for j in range(n):
                a, b = min(i, j), max(i, j)
                d0[idx1[f"w{i}_{j}"], idx0[f"u{a}{b}"]] = 1.0
        d1 = np.zeros((len(vars2), len(vars1)))
        for row, (i, j) in enumerate(combinations(range(n), 2)):
            d1[row, idx1[f"w{j}_{i}"]] = 1.0
            d1[row, idx1[f"w{i}_{j}"]] = -1.0
        dims = [len(vars0), len(vars1), len(vars2)]
        mats = [d0, d1]
    else:
        raise ValueError("jet sequences defined for r = 1, 2")

    ranks = [int(np.linalg.matrix_rank(m)) if m.size else 0 for m in mats]
    nullities = [m.shape[1] - rk for m, rk in zip(mats, ranks)]
    comp = 0.0
    if len(mats) == 2:
        prod = mats[1] @ mats[0]
        comp = float(np.abs(prod).max()) if prod.size else 0.0
    exact = nullities[0] == 1
    for s in range(1, len(mats)):
        exact = exact and nullities[s] == ranks[s - 1]
    onto = ranks[-1] == dims[len(mats)] if dims[len(mats)] else True
    exact = exact and onto
    return {
        "dims": [1] + dims,
        "ranks": ranks,
        "kernel_first": nullities[0],
        "composition_max": comp,
        "exact": exact,
    }


def _edge_value_bubble_dim(degree, vanish_order, zero_mean=False):
    """Rank oracle: polynomials on [0,1] vanishing to the given order at both ends."""
    if degree < 0:
        return 0
    edge = Simplex([[0.0], [1.0]])
    basis = monomials(2, degree)
    rows = []
    for a in basis:
        f = FormPolynomial.monomial(edge, 0, (), a)
        vals = []
        for x in (np.array([0.0]), np.array([1.0])):
            g = f
            for order in range(vanish_order + 1):
                vals.append(g.eval(x[None, :])[()].item() if () in g.comps else 0.0)
                g = g.directional_derivative(np.array([1.0]))
        if zero_mean:
            vals.append(float(f.integrate_scalar()))
        rows.append(vals)
    A = np.array(rows).T
    return _nullspace(A).shape[1]


def subsimplex_bubble_dims(n, r, p):
    """Bubble-sequence dimension report for edges, faces and interiors.

    Dimensions come from explicit trace-constraint ranks (the oracle); the
    report also carries the closed-form counts so callers can assert the
    alternating-sum exactness identities.
    """
    out = {"edge": {}, "face": {}, "interior": {}}
    if r == 2:
        val = _edge_value_bubble_dim(p, 2)
        nder = _edge_value_bubble_dim(p - 1, 1)
        tang = _edge_value_bubble_dim(p - 1, 1, zero_mean=True)
        dim0 = val + (n - 1) * nder
        dim1 = tang + (n - 1) * _edge_value_bubble_dim(p - 1, 1)
        out["edge"] = {"dim0": dim0, "dim1": dim1,
                       "formula0": max(p - 5, 0) + (n - 1) * max(p - 4, 0),
                       "formula1": n * (p - 4) - 1 if p >= 5 else 0,
                       "exact": dim0 == dim1}
    elif r == 1:
        val = _edge_value_bubble_dim(p, 1)
        tang = _edge_value_bubble_dim(p - 1, 0, zero_mean=True)
        out["edge"] = {"dim0": val, "dim1": tang,
                       "formula0": max(p - 3, 0),
                       "formula1": p - 3 if p >= 3 else 0,
                       "exact": val == tang}
    if n >= 2:
        from .mesh import reference_triangle
        tri = reference_triangle()
        if r == 1:
            d0, _ = zero_trace_dim(tri, p, 0)
            d1, _ = zero_trace_dim(tri, p - 1, 1)
            d2 = dim_full(2, p - 2, 2) - 1
            out["face"] = {"dims": [d0, d1, d2], "alternating": d0 - d1 + d2}
        else:
            d0 = _scalar_face_bubble_dim(tri, p, vertex_order=2, edge_normal=True)
            d1 = 2 * _scalar_face_bubble_dim(tri, p - 1, vertex_order=1, edge_normal=False)
            d2 = dim_full(2, p - 2, 2) - 3 - 1
            out["face"] = {"dims": [d0, d1, d2], "alternating": d0 - d1 + d2}
    if n >= 3:
        from .mesh import reference_tet
        tet = reference_tet()
        b0, _ = zero_trace_dim(tet, p, 0)
        b1, _ = zero_trace_dim(tet, p - 1, 1)
        b2, _ = zero_trace_dim(tet, p - 2, 2)
        b3 = dim_full(3, p - 3, 3) - 1
        out["interior"] = {"dims": [b0, b1, b2, b3],
                           "alternating": b0 - b1 + b2 - b3}
    return out


def _scalar_face_bubble_dim(tri_mesh, p, vertex_order, edge_normal):
    """Scalar bubbles on a triangle with vertex-jet and edge-trace conditions."""
    if p < 0:
        return 0
    cell = tri_mesh.cell_simplex(0)
    basis = full_basis(cell, p, 0)
    cverts = tuple(int(v) for v in tri_mesh.cells[0])

    def value_at(form, pt):
        return form.eval(pt[None, :])[()].item() if () in form.comps else 0.0

    rows = []
    for j, b in enumerate(basis):
        col = []
        for v in range(3):
            pt = tri_mesh.vertices[v]
            col.append(value_at(b, pt))
            if vertex_order >= 1:
                for e in _axes(2):
                    col.append(value_at(b.directional_derivative(e), pt))
            if vertex_order >= 2:
                for (i1, i2) in combinations_with_replacement(range(2), 2):
                    ax = _axes(2)
                    g = b.directional_derivative(ax[i1]).directional_derivative(ax[i2])
                    col.append(value_at(g, pt))
        rows.append(col)
    A = [list(r) for r in rows]
    # edge traces
    for ei in range(3):
        sub = tri_mesh.sub_simplex(1, ei)
        everts = tri_mesh.skeleton[1][ei]
        vmap = [cverts.index(v) for v in everts]
        fr = tri_mesh.frame(1, ei)
        for j, b in enumerate(basis):
            tr = b.restrict(sub, vmap)
            cdict = tr.comps.get((), {})
            for e in monomials(2, p):
                A[j].append(float(cdict.get(e, 0)))
            if edge_normal:
                dn = b.directional_derivative(fr.normals[0]).restrict(sub, vmap)
                ndict = dn.comps.get((), {})
                for e in monomials(2, max(p - 1, 0)):
                    A[j].append(float(ndict.get(e, 0)))
    return _nullspace(np.array(A).T).shape[1]


# ---------------------------------------------------------------------------
# decomposition checks (global; implemented over the assembly layer)
# ---------------------------------------------------------------------------

def verify_decomposition(n, p, mesh):
    """Span equality of the nodal space with (continuous part + bubbles)."""
    from . import assembly
    return assembly.verify_decomposition(n, p, mesh)
