"""Global space assembly, exterior-derivative matrices, exactness checks.

Shared DoFs are generated from global subsimplex data, so identifying them
across cells is a dictionary lookup; there are no orientation sign tables.
Assembly itself is deterministic and single-threaded; assembled spaces and
operator matrices are immutable afterwards and safe to share.  Rank
decisions use a relative singular-value cutoff (forms.RANK_RTOL).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import elements
from .elements import (element_def, entity_dofs, shape_basis,
                       tangential_bubble_span, zero_trace_dim)
from .forms import (FormPolynomial, RANK_RTOL, _coefficient_matrix,
                    dim_trimmed, full_basis, monomials)
from .mesh import SimplicialMesh

DD_TOL = 1e-10
CONTAINMENT_TOL = 1e-8


def rank_of(mat, rtol=RANK_RTOL):
    if mat.size == 0:
        return 0
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def nullspace(mat, rtol=RANK_RTOL):
    if mat.size == 0:
        return np.eye(mat.shape[1] if mat.ndim == 2 else 0)
    u, s, vt = np.linalg.svd(mat, full_matrices=True)
    rank = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    return vt[rank:].T


class GlobalSpace:
    """An assembled finite element space on a mesh.

    ``dofs`` lists global DoFs as (dim, entity-or-cell index, slot, shared);
    per-cell tables give the local DoF objects and their global indices in
    the canonical cell order.
    """

    def __init__(self, mesh, el):
        self.mesh = mesh
        self.el = el
        n = mesh.dim
        if el.n != n:
            raise ValueError("element dimension does not match the mesh")
        cache = {}
        gid = {}
        self.dofs = []
        self.cell_dof_objs = []
        self.cell_global = []
        for ci in range(len(mesh.cells)):
            cverts = tuple(int(v) for v in mesh.cells[ci])
            local, gidx = [], []
            for d in range(n):
                for everts in combinations(cverts, d + 1):
                    idx = mesh.simplex_id(everts)
                    key = (el.r, el.p, el.k, d, idx)
                    if key not in cache:
                        cache[key] = entity_dofs(el, mesh, d, idx)
                    block = cache[key]
                    for slot in range(len(block)):
                        gkey = (d, idx, slot)
                        if gkey not in gid:
                            gid[gkey] = len(self.dofs)
                            self.dofs.append((d, idx, slot, True))
                        gidx.append(gid[gkey])
                    local.extend(block)
            interior = entity_dofs(el, mesh, n, ci)
            for slot in range(len(interior)):
                gidx.append(len(self.dofs))
                self.dofs.append((n, ci, slot, False))
            local.extend(interior)
            self.cell_dof_objs.append(local)
            self.cell_global.append(np.array(gidx, dtype=int))
        self.dim = len(self.dofs)
        self._shapes = {}
        self._duals = {}
        self._local_mats = {}

    # -- per-cell data -----------------------------------------------------------
    def shapes(self, ci):
        if ci not in self._shapes:
            self._shapes[ci] = shape_basis(self.el, self.mesh.cell_simplex(ci))
        return self._shapes[ci]

    def local_matrix(self, ci):
        if ci not in self._local_mats:
            basis = self.shapes(ci)
            dofs = self.cell_dof_objs[ci]
            cverts = tuple(int(v) for v in self.mesh.cells[ci])
            M = np.empty((len(dofs), len(basis)))
            for j, b in enumerate(basis):
                for i, dof in enumerate(dofs):
                    M[i, j] = dof.apply(b, cverts)
            self._local_mats[ci] = M
        return self._local_mats[ci]

    def dual_coeffs(self, ci):
        """Columns express the local dual basis in the shape basis."""
        if ci not in self._duals:
            self._duals[ci] = np.linalg.inv(self.local_matrix(ci))
        return self._duals[ci]

    def dual_form(self, ci, local_index):
        C = self.dual_coeffs(ci)
        basis = self.shapes(ci)
        f = FormPolynomial(basis[0].simplex, self.el.k)
        for m, b in enumerate(basis):
            if C[m, local_index] != 0.0:
                f = f + b.as_float().scale(C[m, local_index])
        return f

    def apply_global_dofs(self, cell_forms):
        """Evaluate all global DoFs on a function given per cell as a form."""
        out = np.zeros(self.dim)
        seen = np.zeros(self.dim, dtype=bool)
        for ci, form in cell_forms.items():
            cverts = tuple(int(v) for v in self.mesh.cells[ci])
            for dof, gi in zip(self.cell_dof_objs[ci], self.cell_global[ci]):
                if not seen[gi]:
                    out[gi] = dof.apply(form, cverts)
                    seen[gi] = True
        return out

    def constant_coefficients(self):
        """Global DoF vector of the constant function (0-forms only)."""
        if self.el.k != 0:
            raise ValueError("constants only in 0-form spaces")
        one = {ci: FormPolynomial(self.mesh.cell_simplex(ci), 0, {(): {(0,) * (self.mesh.dim + 1): 1.0}})
               for ci in range(len(self.mesh.cells))}
        # lambda's sum to one; exponent all-zero means the constant 1
        return self.apply_global_dofs(one)


def assemble_space(mesh, r, p, k):
    return GlobalSpace(mesh, element_def(r, p, k, mesh.dim))


# ---------------------------------------------------------------------------
# closed-form global dimensions
# ---------------------------------------------------------------------------

def dim_formula(r, p, k, n, counts):
    """Closed-form global dimension from the (V, E, F, T) counts."""
    V, E, F, T = counts

    def c(a, b):
        return math.comb(a, b) if a >= 0 else 0
    if n == 1:
        table = {
            (0, 0): V + (p - 1) * E,
            (0, 1): (p + 1) * E,
            (1, 0): 2 * V + (p - 3) * E,
            (1, 1): V + (p - 1) * E,
            (2, 0): 3 * V + (p - 5) * E,
            (2, 1): 2 * V + (p - 3) * E,
        }
        return table[(r, k)]
    if n == 2:
        table = {
            (0, 0): V + (p - 1) * E + c(p - 1, 2) * F,
            (0, 1): (p + 1) * E + (p - 1) * (p + 1) * F,
            (0, 2): c(p + 2, 2) * F,
            (1, 0): 3 * V + (p - 3) * E + c(p - 1, 2) * F,
            (1, 1): 2 * V + (p - 1) * E + (p - 1) * (p + 1) * F,
            (1, 2): c(p + 2, 2) * F,
            (2, 0): 6 * V + (2 * p - 9) * E + c(p - 4, 2) * F,
            (2, 1): 6 * V + 2 * (p - 3) * E + (p - 1) * (p - 2) * F,
            (2, 2): V + (c(p + 2, 2) - 3) * F,
        }
        return table[(r, k)]
    table = {
        (0, 0): V + (p - 1) * E + c(p - 1, 2) * F + c(p - 1, 3) * T,
        (0, 1): (p + 1) * E + (p - 1) * (p + 1) * F + (p - 2) * (p - 1) * (p + 1) * T // 2,
        (0, 2): c(p + 2, 2) * F + (p - 1) * (p + 1) * (p + 2) * T // 2,
        (0, 3): c(p + 3, 3) * T,
        (1, 0): 4 * V + (p - 3) * E + c(p - 1, 2) * F + c(p - 1, 3) * T,
        (1, 1): 3 * V + (p - 1) * E + (p - 1) * (p + 1) * F + (p - 2) * (p - 1) * (p + 1) * T // 2,
        (1, 2): c(p + 2, 2) * F + (p - 1) * (p + 1) * (p + 2) * T // 2,
        (1, 3): c(p + 3, 3) * T,
        (2, 0): 10 * V + (2 * (p - 4) + (p - 5)) * E + c(p - 4, 2) * F + c(p - 1, 3) * T,
        (2, 1): 12 * V + 3 * (p - 3) * E + (p - 1) * (p - 2) * F
                + (p ** 3 - 2 * p ** 2 - p + 2) * T // 2,
        (2, 2): 3 * V + (p ** 2 + 3 * p - 4) * F // 2 + (p - 1) * (p + 1) * (p + 2) * T // 2,
        (2, 3): c(p + 3, 3) * T,
        ("hz", 2): 3 * V + 2 * (p - 1) * E + c(p - 1, 2) * F + (p - 1) * (p + 1) * (p + 2) * T // 2,
        ("minus", 2): c(p + 1, 2) * F + 3 * c(p + 1, 3) * T,
    }
    return table[(r, k)]


def family_row(n, r, p):
    """The (r, degree, k) slots of one de Rham row at window parameter p."""
    if n == 1:
        return [(r, p + 1, 0), (r, p, 1)]
    if n == 2:
        base = {0: p, 1: p + 2, 2: p + 3}[r]
        return [(r, base - k, k) for k in range(0, 3)]
    if r == "mixed":
        return [(1, p, 0), (1, p - 1, 1), ("minus", p - 1, 2), (0, p - 2, 3)]
    base = {0: p, 1: p + 3, 2: p + 3}[r]
    return [(r, base - k, k) for k in range(0, 4)]


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

@dataclass
class OperatorMatrix:
    src: GlobalSpace
    dst: GlobalSpace
    array: np.ndarray

    def export_coo(self):
        rows, cols = np.nonzero(self.array)
        lines = [f"{self.array.shape[0]} {self.array.shape[1]} {len(rows)}"]
        for i, j in zip(rows, cols):
            lines.append(f"{i} {j} {self.array[i, j]:.17g}")
        return "\n".join(lines) + "\n"


def assemble_local_operator(src, dst, fmap, consistency_tol=1e-7):
    """Matrix of a cell-local linear map between assembled spaces.

    Column j holds the target DoFs of ``fmap`` applied to the j-th global
    dual function.  Entries reachable from two cells are compared; a
    disagreement means the image violates the target continuity.
    """
    mesh = src.mesh
    D = np.zeros((dst.dim, src.dim))
    filled = {}
    for ci in range(len(mesh.cells)):
        cverts = tuple(int(v) for v in mesh.cells[ci])
        shapes = src.shapes(ci)
        images = [fmap(f.as_float()) for f in shapes]
        dst_dofs = dst.cell_dof_objs[ci]
        A = np.empty((len(dst_dofs), len(images)))
        for m, g in enumerate(images):
            for i, dof in enumerate(dst_dofs):
                A[i, m] = dof.apply(g, cverts)
        Dloc = A @ src.dual_coeffs(ci)
        scale = max(np.abs(Dloc).max(), 1.0)
        for i_loc, gi in enumerate(dst.cell_global[ci]):
            for j_loc, gj in enumerate(src.cell_global[ci]):
                v = Dloc[i_loc, j_loc]
                if (gi, gj) in filled:
                    if abs(v - D[gi, gj]) > consistency_tol * scale:
                        raise RuntimeError(
                            f"operator entry disagrees across cells at ({gi},{gj}): "
                            f"{D[gi, gj]} vs {v}; wrong family pairing?")
                else:
                    D[gi, gj] = v
                    filled[(gi, gj)] = True
    return OperatorMatrix(src, dst, D)


def assemble_d(src, dst, consistency_tol=1e-7):
    """Exterior-derivative matrix in the dual bases of the two spaces.

    The target must be the next slot of the same family row: its form degree
    is one higher and its polynomial degree at least one lower.  Continuity
    violations surface as cross-cell entry disagreements.
    """
    if dst.el.k != src.el.k + 1:
        raise ValueError("target form degree must be source degree + 1")
    if dst.el.p < src.el.p - 1:
        raise ValueError(
            f"wrong family pairing: d image has degree {src.el.p - 1} but the "
            f"target only holds degree {dst.el.p}")
    return assemble_local_operator(src, dst, lambda f: f.exterior_derivative(),
                                   consistency_tol=consistency_tol)


def containment_residual(src, dst, D=None, n_points=30, max_cols=12, seed=0):
    """Sampled residual of d(dual_j) minus its target-space interpolant."""
    if D is None:
        D = assemble_d(src, dst)
    rng = np.random.default_rng(seed)
    mesh = src.mesh
    cols = list(range(src.dim))
    if len(cols) > max_cols:
        cols = list(rng.choice(src.dim, size=max_cols, replace=False))
    worst = 0.0
    for j in cols:
        for ci in range(len(mesh.cells)):
            loc = np.where(src.cell_global[ci] == j)[0]
            cell = mesh.cell_simplex(ci)
            pts = cell.random_points(n_points, rng)
            if loc.size:
                df = src.dual_form(ci, loc[0]).exterior_derivative()
                dvals = df.eval(pts)
            else:
                dvals = {}
            interp = FormPolynomial(cell, dst.el.k)
            for i_loc, gi in enumerate(dst.cell_global[ci]):
                c = D.array[gi, j]
                if c != 0.0:
                    interp = interp + dst.dual_form(ci, i_loc).scale(c)
            ivals = interp.eval(pts)
            scale = max([np.abs(v).max() for v in dvals.values()] + [1.0])
            for key in set(dvals) | set(ivals):
                a = dvals.get(key, np.zeros(len(pts)))
                b = ivals.get(key, np.zeros(len(pts)))
                worst = max(worst, np.abs(a - b).max() / scale)
    return worst


def complex_residual(D2, D1):
    """Max entry of D2 @ D1 after row normalization."""
    prod = D2.array @ D1.array
    scale = np.abs(D2.array) @ np.abs(D1.array)
    rows = scale.max(axis=1)
    rows[rows == 0.0] = 1.0
    return float((np.abs(prod) / rows[:, None]).max())


@dataclass
class ExactnessReport:
    dims: list
    ranks: list
    nullities: list
    dd_residuals: list
    betti: list
    expected_betti: list
    kernel_is_constants: bool
    surjective_end: bool
    alternating_ok: bool

    @property
    def passed(self):
        return (all(r < DD_TOL for r in self.dd_residuals)
                and self.betti == self.expected_betti
                and self.kernel_is_constants
                and self.alternating_ok)

    def to_json(self):
        return json.dumps({
            "dims": self.dims, "ranks": self.ranks, "nullities": self.nullities,
            "dd_residuals": self.dd_residuals, "betti": self.betti,
            "expected_betti": self.expected_betti,
            "kernel_is_constants": self.kernel_is_constants,
            "surjective_end": self.surjective_end,
            "alternating_ok": self.alternating_ok, "pass": self.passed,
        }, indent=2)


def verify_row(mesh, slots, expected_betti=None, check_containment=False):
    """Assemble a row of spaces and verify complex + exactness properties."""
    spaces = [assemble_space(mesh, r, p, k) for (r, p, k) in slots]
    ops = [assemble_d(spaces[i], spaces[i + 1]) for i in range(len(spaces) - 1)]
    if check_containment:
        for i, op in enumerate(ops):
            res = containment_residual(spaces[i], spaces[i + 1], D=op)
            if res > CONTAINMENT_TOL:
                raise RuntimeError(f"containment residual {res:.2e} at slot {i}")
    dims = [s.dim for s in spaces]
    ranks = [rank_of(op.array) for op in ops]
    nullities = [dims[i] - ranks[i] for i in range(len(ops))]
    dd = [complex_residual(ops[i + 1], ops[i]) for i in range(len(ops) - 1)]
    betti = [nullities[0]]
    for i in range(1, len(ops)):
        betti.append(nullities[i] - ranks[i - 1])
    betti.append(dims[-1] - ranks[-1])
    if expected_betti is None:
        expected_betti = [1] + [0] * (len(dims) - 1)
    # kernel of the first operator should be exactly the constants
    kernel_const = True
    if slots[0][2] == 0 and nullities[0] >= 1:
        x = spaces[0].constant_coefficients()
        resid = np.abs(ops[0].array @ x).max() / max(np.abs(x).max(), 1.0)
        kernel_const = resid < 1e-8 and nullities[0] == expected_betti[0]
    alt_dims = sum((-1) ** i * dims[i] for i in range(len(dims)))
    alt_betti = sum((-1) ** i * expected_betti[i] for i in range(len(dims)))
    report = ExactnessReport(
        dims=dims, ranks=ranks, nullities=nullities, dd_residuals=dd,
        betti=betti, expected_betti=list(expected_betti),
        kernel_is_constants=kernel_const,
        surjective_end=(ranks[-1] == dims[-1]),
        alternating_ok=(alt_dims == alt_betti) if betti == list(expected_betti) else False,
    )
    return report, spaces, ops


def verify_exactness(mesh, r, p, expected_betti=None, check_containment=False):
    slots = family_row(mesh.dim, r, p)
    report, _, _ = verify_row(mesh, slots, expected_betti, check_containment)
    return report


def mixed_sequence(mesh, p):
    """Exactness of the mixed row ending in the trimmed H(div) slot.

    Degrees: full spaces of degree p and p-1, the trimmed space of degree
    p-1, and piecewise polynomials of degree p-2.  (With a trimmed slot of
    degree p-2 the curl image is not contained in the space, so that pairing
    is not even a complex; the assembly consistency check rejects it.)
    """
    if mesh.dim != 3 or p < 3:
        raise ValueError("mixed sequence needs n=3 and p >= 3")
    slots = family_row(3, "mixed", p)
    report, _, _ = verify_row(mesh, slots)
    return report


# ---------------------------------------------------------------------------
# broken (stacked per-cell coefficient) representation
# ---------------------------------------------------------------------------

class BrokenSpace:
    """Coordinates for piecewise polynomial k-forms of degree p on a mesh."""

    def __init__(self, mesh, p, k):
        self.mesh, self.p, self.k = mesh, p, k
        n = mesh.dim
        self.keys = list(combinations(range(n), k))
        self.alphas = monomials(n + 1, p)
        self.block = len(self.keys) * len(self.alphas)
        self.size = self.block * len(mesh.cells)
        self._index = {}
        for ki, key in enumerate(self.keys):
            for ai, a in enumerate(self.alphas):
                self._index[(key, a)] = ki * len(self.alphas) + ai

    def coeffs(self, ci, form):
        """Coefficient vector of one cell's form inside the global stack."""
        from .forms import poly_homogenize
        v = np.zeros(self.size)
        off = ci * self.block
        for key, poly in form.comps.items():
            hom = poly_homogenize(poly, self.mesh.dim + 1, self.p)
            for e, c in hom.items():
                v[off + self._index[(key, e)]] = float(c)
        return v

    def matrix_of_space(self, space):
        """Stacked coefficients of every global dual function (columns)."""
        assert space.el.k == self.k and space.el.p <= self.p
        mat = np.zeros((self.size, space.dim))
        for ci in range(len(self.mesh.cells)):
            cols = space.cell_global[ci]
            S, _, _ = _coefficient_matrix([f.as_float() for f in space.shapes(ci)], self.p)
            mat[ci * self.block:(ci + 1) * self.block, cols] = S @ space.dual_coeffs(ci)
        return mat

    def matrix_of_forms(self, cell_form_lists):
        """Columns from per-cell form lists: {ci: [forms supported on ci]}."""
        cols = []
        for ci, forms in cell_form_lists.items():
            for f in forms:
                cols.append(self.coeffs(ci, f))
        return np.array(cols).T if cols else np.zeros((self.size, 0))


def space_equal(space_a, space_b, rtol=RANK_RTOL):
    """True iff the two assembled spaces span the same piecewise functions."""
    if space_a.mesh is not space_b.mesh or space_a.el.k != space_b.el.k:
        raise ValueError("spaces must share mesh and form degree")
    p = max(space_a.el.p, space_b.el.p)
    br = BrokenSpace(space_a.mesh, p, space_a.el.k)
    A = br.matrix_of_space(space_a)
    B = br.matrix_of_space(space_b)
    if space_a.dim != space_b.dim:
        return False, {"dims": (space_a.dim, space_b.dim)}
    ra = rank_of(A, rtol)
    rboth = rank_of(np.hstack([A, B]), rtol)
    equal = (ra == space_a.dim) and (rboth == ra)
    return equal, {"dims": (space_a.dim, space_b.dim), "rank_a": ra, "rank_union": rboth}


# ---------------------------------------------------------------------------
# homogeneous boundary conditions
# ---------------------------------------------------------------------------

def _dof_lookup(space):
    """Map (entity dim, entity id) -> list of (global index, klass)."""
    table = {}
    seen = set()
    for ci in range(len(space.mesh.cells)):
        for dof, gi in zip(space.cell_dof_objs[ci], space.cell_global[ci]):
            if gi in seen:
                continue
            seen.add(gi)
            d = dof.entity_dim
            if d < space.mesh.dim:
                idx = space.mesh.simplex_id(dof.entity_verts)
            else:
                idx = ci
            table.setdefault((d, idx), []).append((int(gi), dof.klass))
    return table


def homogeneous_constraints(space, classification):
    """Constraint rows on the global DoF vector for vanishing boundary data.

    Implements the corner / non-corner rules: at non-corner boundary
    vertices only derivatives along the boundary (2D) or the flat tangent
    plane (3D) are constrained; corner vertices lose every derivative.
    """
    mesh = space.mesh
    el = space.el
    lookup = _dof_lookup(space)
    rows = []

    def unit_row(gi):
        r = np.zeros(space.dim)
        r[gi] = 1.0
        return r

    def klass_ids(d, idx, prefix):
        return [gi for gi, kl in lookup.get((d, idx), []) if kl.startswith(prefix)]

    bedges = set(mesh.boundary_simplices(1))
    bverts = set(mesh.boundary_simplices(0))
    bfaces = set(mesh.boundary_simplices(2)) if mesh.dim == 3 else set()

    if mesh.dim == 2 and el.r == 1 and el.k == 0:
        for ei in bedges:
            for gi in klass_ids(1, ei, "edge-moment"):
                rows.append(unit_row(gi))
        for vi in bverts:
            rows.append(unit_row(klass_ids(0, vi, "vertex-value")[0]))
            d0 = klass_ids(0, vi, "vertex-d0")[0]
            d1 = klass_ids(0, vi, "vertex-d1")[0]
            if vi in classification.corner_vertices:
                rows.append(unit_row(d0))
                rows.append(unit_row(d1))
            else:
                tau = _boundary_tangent(mesh, vi)
                r = np.zeros(space.dim)
                r[d0], r[d1] = tau[0], tau[1]
                rows.append(r)
    elif mesh.dim == 2 and el.r == 1 and el.k == 1:
        for ei in bedges:
            for gi in klass_ids(1, ei, "edge-trace"):
                rows.append(unit_row(gi))
        for vi in bverts:
            c0 = klass_ids(0, vi, "vertex-c0")[0]
            c1 = klass_ids(0, vi, "vertex-c1")[0]
            if vi in classification.corner_vertices:
                rows.append(unit_row(c0))
                rows.append(unit_row(c1))
            else:
                # normal trace of the flux proxy: B . nu = c1 nu0 - c0 nu1
                tau = _boundary_tangent(mesh, vi)
                nu = np.array([tau[1], -tau[0]])
                r = np.zeros(space.dim)
                r[c1], r[c0] = nu[0], -nu[1]
                rows.append(r)
    elif el.k == mesh.dim:
        # quotient by constants: zero-mean constraint
        r = np.zeros(space.dim)
        for ci in range(len(mesh.cells)):
            cell = mesh.cell_simplex(ci)
            ints = np.array([float(b.as_float().wedge(
                FormPolynomial(cell, 0, {(): {(0,) * (mesh.dim + 1): 1.0}})).integrate())
                for b in space.shapes(ci)])
            vals = ints @ space.dual_coeffs(ci)
            for i_loc, gi in enumerate(space.cell_global[ci]):
                r[gi] = vals[i_loc]
        rows.append(r)
    elif mesh.dim == 3 and el.r == 2 and el.k == 0:
        for fi in bfaces:
            for gi in klass_ids(2, fi, "face-moment"):
                rows.append(unit_row(gi))
        for ei in bedges:
            val_ids = klass_ids(1, ei, "edge-moment")
            n0 = klass_ids(1, ei, "edge-nderiv0")
            n1 = klass_ids(1, ei, "edge-nderiv1")
            for gi in val_ids:
                rows.append(unit_row(gi))
            if ei in classification.corner_edges:
                for gi in n0 + n1:
                    rows.append(unit_row(gi))
            else:
                # only the in-plane normal derivative is boundary data
                fr = mesh.frame(1, ei)
                plane_nu = _boundary_plane_normal(mesh, ei)
                w = np.cross(fr.tangents[0], plane_nu)
                a = float(w @ fr.normals[0])
                b = float(w @ fr.normals[1])
                for g0, g1 in zip(n0, n1):
                    r = np.zeros(space.dim)
                    r[g0], r[g1] = a, b
                    rows.append(r)
        for vi in bverts:
            rows.append(unit_row(klass_ids(0, vi, "vertex-value")[0]))
            first = {i: klass_ids(0, vi, f"vertex-d{i}")[0] for i in range(3)}
            second = {(i, j): klass_ids(0, vi, f"vertex-d{i}{j}")[0]
                      for i in range(3) for j in range(i, 3)}
            if vi in classification.corner_vertices:
                for gi in list(first.values()) + list(second.values()):
                    rows.append(unit_row(gi))
            else:
                t1, t2 = _boundary_tangent_plane(mesh, vi)
                for t in (t1, t2):
                    r = np.zeros(space.dim)
                    for i in range(3):
                        r[first[i]] += t[i]
                    rows.append(r)
                for ta, tb in ((t1, t1), (t1, t2), (t2, t2)):
                    r = np.zeros(space.dim)
                    for i in range(3):
                        for j in range(3):
                            a, b = min(i, j), max(i, j)
                            r[second[(a, b)]] += ta[i] * tb[j]
                    rows.append(r)
    else:
        raise ValueError("homogeneous restriction not implemented for this family")
    return np.array(rows) if rows else np.zeros((0, space.dim))


def boundary_derivative_resolution(mesh, vi):
    """Coefficients expressing axis derivatives through boundary-edge ones.

    At a corner vertex the two adjacent boundary-edge directions t1, t2 are
    independent, and the returned 2x2 matrix A satisfies
    d/d(e_i) = A[i, 0] d/d(t1) + A[i, 1] d/d(t2);
    given boundary values, tangential derivatives along the edges determine
    every vertex derivative DoF through A.  Raises at non-corner vertices,
    where only one independent tangential direction exists.
    """
    if mesh.dim != 2:
        raise ValueError("derivative resolution is for 2D boundary vertices")
    dirs = []
    for ei in mesh.boundary_simplices(1):
        everts = mesh.skeleton[1][ei]
        if vi in everts:
            d = mesh.vertices[everts[1]] - mesh.vertices[everts[0]]
            dirs.append(d / np.linalg.norm(d))
    if len(dirs) < 2:
        raise ValueError("vertex is not a boundary vertex with two edges")
    T = np.column_stack(dirs[:2])
    if abs(np.linalg.det(T)) < 1e-12:
        raise ValueError("non-corner vertex: edge directions are collinear")
    return np.linalg.inv(T).T


def _boundary_tangent(mesh, vi):
    for ei in mesh.boundary_simplices(1):
        everts = mesh.skeleton[1][ei]
        if vi in everts:
            d = mesh.vertices[everts[1]] - mesh.vertices[everts[0]]
            return d / np.linalg.norm(d)
    raise ValueError("vertex not on the boundary")


def _boundary_tangent_plane(mesh, vi):
    dirs = []
    for ei in mesh.boundary_simplices(1):
        everts = mesh.skeleton[1][ei]
        if vi in everts:
            d = mesh.vertices[everts[1]] - mesh.vertices[everts[0]]
            dirs.append(d / np.linalg.norm(d))
    dirs = np.array(dirs)
    u, s, vt = np.linalg.svd(dirs)
    return vt[0], vt[1]


def _boundary_plane_normal(mesh, ei):
    everts = mesh.skeleton[1][ei]
    for fi in mesh.boundary_simplices(2):
        if set(everts) <= set(mesh.skeleton[2][fi]):
            return mesh.frame(2, fi).normals[0]
    raise ValueError("edge not on the boundary")


@dataclass
class HomogeneousSpace:
    base: GlobalSpace
    constraints: np.ndarray
    basis: np.ndarray       # (base.dim, dim) orthonormal columns

    @property
    def dim(self):
        return self.basis.shape[1]


def restrict_homogeneous(space, classification):
    C = homogeneous_constraints(space, classification)
    N = nullspace(C) if C.size else np.eye(space.dim)
    return HomogeneousSpace(space, C, N)


def homogeneous_row_report(mesh, p, classification):
    """Assembled homogeneous 2D dims, removal-count formulas, and exactness."""
    cls = classification
    slots = family_row(2, 1, p)
    spaces = [assemble_space(mesh, r, q, k) for (r, q, k) in slots]
    homs = [restrict_homogeneous(s, cls) for s in spaces]
    E0 = len(mesh.boundary_simplices(1))
    q0, q1 = slots[0][1], slots[1][1]
    formulas = [
        spaces[0].dim - (q0 - 3) * E0 - 3 * cls.v0 + cls.v0s,
        spaces[1].dim - (q1 - 1) * E0 - 2 * cls.v0 + cls.v0s,
        spaces[2].dim - 1,
    ]
    ops = [assemble_d(spaces[i], spaces[i + 1]) for i in range(2)]
    rb = [h.basis for h in homs]
    # restricted operators; verify the image stays homogeneous
    rops = []
    ok_invariant = True
    for i, op in enumerate(ops):
        img = op.array @ rb[i]
        if homs[i + 1].constraints.size:
            resid = np.abs(homs[i + 1].constraints @ img).max() if img.size else 0.0
            scale = max(np.abs(img).max(), 1.0)
            ok_invariant = ok_invariant and resid <= 1e-8 * scale
        rops.append(rb[i + 1].T @ img)
    dims = [h.dim for h in homs]
    ranks = [rank_of(m) for m in rops]
    exact = (dims[0] - ranks[0] == 0
             and dims[1] - ranks[1] == ranks[0]
             and ranks[1] == dims[2])
    return {
        "dims": dims,
        "formulas": formulas,
        "alternating": dims[0] - dims[1] + dims[2],
        "ranks": ranks,
        "exact": exact,
        "image_homogeneous": ok_invariant,
    }


# ---------------------------------------------------------------------------
# decompositions, savings
# ---------------------------------------------------------------------------

def verify_decomposition(n, p, mesh):
    """Nodal space equals continuous part plus trace-free bubbles (span rank)."""
    if n == 2:
        if p < 2:
            raise ValueError("2D decomposition needs p >= 2")
        target = assemble_space(mesh, 1, p, 1)
        scalar = assemble_space(mesh, 0, p, 0)
        br = BrokenSpace(mesh, p, 1)
        comp_cols = _vector_lift_columns(br, scalar, ncomp=2)
        bubble_cols = []
        for ci in range(len(mesh.cells)):
            single = _single_cell(mesh, ci)
            _, forms = zero_trace_dim(single, p, 1)
            moved = [_transplant(f, mesh.cell_simplex(ci)) for f in forms]
            bubble_cols.append((ci, moved))
        bub = br.matrix_of_forms(dict(bubble_cols))
        tgt = br.matrix_of_space(target)
    elif n == 3:
        target = assemble_space(mesh, 2, p, 1)
        scalar = assemble_space(mesh, 1, p, 0)
        br = BrokenSpace(mesh, p, 1)
        comp_cols = _vector_lift_columns(br, scalar, ncomp=3)
        bubble_cols = []
        for ci in range(len(mesh.cells)):
            cell = mesh.cell_simplex(ci)
            span = tangential_bubble_span(cell, p)
            bubble_cols.append((ci, span))
        bub = br.matrix_of_forms(dict(bubble_cols))
        tgt = br.matrix_of_space(target)
    else:
        raise ValueError("decomposition implemented in dimensions 2 and 3")
    both = np.hstack([comp_cols, bub])
    r_target = rank_of(tgt)
    r_sum = rank_of(both)
    r_union = rank_of(np.hstack([tgt, both]))
    return {
        "dim_target": target.dim,
        "rank_target": r_target,
        "rank_sum": r_sum,
        "rank_union": r_union,
        "dim_continuous": 2 * scalar.dim if n == 2 else 3 * scalar.dim,
        "equal": r_target == target.dim == r_sum == r_union,
        "continuous_strictly_smaller": (2 if n == 2 else 3) * scalar.dim < target.dim,
    }


def _single_cell(mesh, ci):
    verts = mesh.vertices[list(mesh.cells[ci])]
    return SimplicialMesh(verts, [tuple(range(mesh.dim + 1))])


def _transplant(form, cell):
    """Re-attach a form built on a congruent single-cell simplex to the cell."""
    return FormPolynomial(cell, form.k, {k: dict(v) for k, v in form.comps.items()})


def _vector_lift_columns(br, scalar_space, ncomp):
    """Columns of componentwise vector fields built from a scalar space."""
    mesh = scalar_space.mesh
    cols = np.zeros((br.size, ncomp * scalar_space.dim))
    nalpha = len(br.alphas)
    for ci in range(len(mesh.cells)):
        S, _, _ = _coefficient_matrix([f.as_float() for f in scalar_space.shapes(ci)], br.p)
        vals = S @ scalar_space.dual_coeffs(ci)   # (nalpha, nloc)
        for comp in range(ncomp):
            key_pos = br.keys.index((comp,))
            rows = slice(ci * br.block + key_pos * nalpha,
                         ci * br.block + (key_pos + 1) * nalpha)
            cols[rows, comp * scalar_space.dim + scalar_space.cell_global[ci]] = vals
    return cols


def interpolation_split_residual(mesh, p, seed=0, n_samples=25):
    """Max tangential face trace of (u - continuous interpolant of u), 3D.

    Realizes the interpolation onto the vector-Hermite space that copies all
    shared DoFs of u, keeps interior moments, and zeroes face-normal parts;
    the remainder must be a tangential-trace-free bubble on every cell.
    """
    rng = np.random.default_rng(seed)
    target = assemble_space(mesh, 2, p, 1)
    scalar = assemble_space(mesh, 1, p, 0)
    worst = 0.0
    for trial in range(2):
        x = rng.normal(size=target.dim)
        comp_vecs = []
        for comp in range(3):
            y = np.zeros(scalar.dim)
            done = np.zeros(scalar.dim, dtype=bool)
            for ci in range(len(mesh.cells)):
                u = FormPolynomial(mesh.cell_simplex(ci), 1)
                for i_loc, gi in enumerate(target.cell_global[ci]):
                    if x[gi] != 0.0:
                        u = u + target.dual_form(ci, i_loc).scale(x[gi])
                cverts = tuple(int(v) for v in mesh.cells[ci])
                for dof, gi in zip(scalar.cell_dof_objs[ci], scalar.cell_global[ci]):
                    if done[gi]:
                        continue
                    done[gi] = True
                    e = np.zeros(3)
                    e[comp] = 1.0
                    if dof.entity_dim == 2:
                        fi = mesh.simplex_id(dof.entity_verts)
                        nu = mesh.frame(2, fi).normals[0]
                        e = e - (e @ nu) * nu
                    scalar_form = u.contract_vector(e)
                    y[gi] = dof.apply(scalar_form, cverts)
            comp_vecs.append(y)
        for ci in range(len(mesh.cells)):
            cell = mesh.cell_simplex(ci)
            u = FormPolynomial(cell, 1)
            for i_loc, gi in enumerate(target.cell_global[ci]):
                if x[gi] != 0.0:
                    u = u + target.dual_form(ci, i_loc).scale(x[gi])
            for comp in range(3):
                g = FormPolynomial(cell, 0)
                for i_loc, gi in enumerate(scalar.cell_global[ci]):
                    if comp_vecs[comp][gi] != 0.0:
                        g = g + scalar.dual_form(ci, i_loc).scale(comp_vecs[comp][gi])
                u = u + FormPolynomial(cell, 1, {(comp,): g.comps.get((), {})}).scale(-1.0)
            scale = 1.0
            for fpos, fverts in enumerate(combinations(tuple(int(v) for v in mesh.cells[ci]), 3)):
                fi = mesh.simplex_id(fverts)
                sub = mesh.sub_simplex(2, fi)
                vmap = [tuple(int(v) for v in mesh.cells[ci]).index(v) for v in fverts]
                tr = u.restrict(sub, vmap)
                pts = sub.random_points(n_samples, rng)
                vals = tr.eval(pts)
                for v in vals.values():
                    worst = max(worst, np.abs(v).max() / scale)
    return worst


def dof_savings(p, mesh):
    """Comparison of the classical and nodal H(curl) dimensions on a mesh."""
    if mesh.dim != 3:
        raise ValueError("DoF savings are a 3D comparison")
    V, E, F, T = mesh.counts
    classical = assemble_space(mesh, 0, p, 1).dim
    nodal = assemble_space(mesh, 2, p, 1).dim if p >= 4 else None
    closed_classical = dim_formula(0, p, 1, 3, mesh.counts)
    closed_nodal = dim_formula(2, p, 1, 3, mesh.counts)
    per_t_classical = p ** 3 / 2 + 7 * p ** 2 + 13 * p / 2
    per_t_nodal = p ** 3 / 2 + p ** 2 - 3 * p - 11 / 2
    return {
        "counts": {"V": V, "E": E, "F": F, "T": T},
        "edge_vertex_ratio": E / V,
        "dim_classical": classical,
        "dim_nodal": nodal,
        "closed_classical": closed_classical,
        "closed_nodal": closed_nodal,
        "difference": (classical - nodal) if nodal is not None else None,
        "per_tet_estimate_classical": per_t_classical,
        "per_tet_estimate_nodal": per_t_nodal,
        "per_tet_estimate_difference": 6 * p ** 2 + 19 * p / 2 + 11 / 2,
    }
