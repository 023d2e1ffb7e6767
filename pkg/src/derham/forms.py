"""Polynomial differential forms on a single simplex.

Coefficients are kept in barycentric monomials.  Arithmetic is duck-typed:
polynomials built from Fractions/ints stay exact (so d(d(u)) cancels at the
coefficient level), while float inputs degrade gracefully to floats.  All
integrals use the closed barycentric formula; there is no quadrature anywhere.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations

import numpy as np
import scipy.linalg

# Relative singular-value cutoff for every rank decision in the package.
RANK_RTOL = 1e-9


def _fraction_matrix_inverse(rows):
    """Exact inverse of a small square matrix given as Fraction rows."""
    m = len(rows)
    aug = [list(r) + [Fraction(int(i == j)) for j in range(m)] for i, r in enumerate(rows)]
    for col in range(m):
        piv = next(r for r in range(col, m) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(m):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [row[m:] for row in aug]


class Simplex:
    """A nondegenerate m-simplex in its intrinsic coordinates.

    ``vertices`` is an (m+1, m) array.  Subsimplices of a mesh cell are
    expressed in an orthonormal chart (origin + tangent frame), so tangential
    traces keep their metric meaning.  Exact rational copies of the geometry
    back the barycentric gradients, the measure and the integral formula.
    """

    def __init__(self, vertices, chart_origin=None, chart_tangents=None):
        self.vertices = np.asarray(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[0] != self.vertices.shape[1] + 1:
            raise ValueError("expected (m+1, m) vertex array")
        self.dim = self.vertices.shape[1]
        self.chart_origin = None if chart_origin is None else np.asarray(chart_origin, float)
        self.chart_tangents = None if chart_tangents is None else np.asarray(chart_tangents, float)
        vf = [[Fraction(float(x)) for x in row] for row in self.vertices]
        edges = [[vf[i + 1][j] - vf[0][j] for j in range(self.dim)] for i in range(self.dim)]
        det = self._det(edges)
        if det == 0:
            raise ValueError("degenerate simplex (zero volume)")
        self._measure = abs(det) / Fraction(math.factorial(self.dim))
        # lambda_j(x) = a_j + g_j . x, solved exactly from [1 | x_i] lam = e_i
        rows = [[Fraction(1)] + vf[i] for i in range(self.dim + 1)]
        inv = _fraction_matrix_inverse(rows)
        self._bary_affine = [(inv[0][j], tuple(inv[i + 1][j] for i in range(self.dim)))
                             for j in range(self.dim + 1)]

    @staticmethod
    def _det(rows):
        m = len(rows)
        if m == 0:
            return Fraction(1)
        if m == 1:
            return rows[0][0]
        if m == 2:
            return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
        if m == 3:
            a, b, c = rows
            return (a[0] * (b[1] * c[2] - b[2] * c[1])
                    - a[1] * (b[0] * c[2] - b[2] * c[0])
                    + a[2] * (b[0] * c[1] - b[1] * c[0]))
        raise ValueError("determinant only needed up to 3x3")

    @classmethod
    def embedded(cls, ambient_vertices, tangents):
        """Build the intrinsic simplex of a d-face embedded in R^n.

        ``tangents`` is a (d, n) orthonormal frame; the chart origin is the
        first vertex.  The returned simplex remembers the chart so points and
        vectors can be moved between ambient and intrinsic coordinates.
        """
        amb = np.asarray(ambient_vertices, float)
        tan = np.asarray(tangents, float)
        origin = amb[0]
        intrinsic = (amb - origin) @ tan.T
        return cls(intrinsic, chart_origin=origin, chart_tangents=tan)

    @property
    def measure(self):
        return self._measure

    @property
    def measure_float(self):
        return float(self._measure)

    def barycentric(self, points):
        """Barycentric coordinates of intrinsic points, shape (..., m+1)."""
        pts = np.atleast_2d(np.asarray(points, float))
        lam = np.empty((pts.shape[0], self.dim + 1))
        for j, (a, g) in enumerate(self._bary_affine):
            lam[:, j] = float(a) + pts @ np.array([float(x) for x in g])
        return lam

    def grad_bary(self, j):
        """Exact gradient of lambda_j in intrinsic coordinates (Fractions)."""
        return self._bary_affine[j][1]

    def grad_bary_float(self):
        return np.array([[float(x) for x in self._bary_affine[j][1]]
                         for j in range(self.dim + 1)])

    def to_intrinsic(self, ambient_points):
        if self.chart_tangents is None:
            return np.asarray(ambient_points, float)
        pts = np.atleast_2d(np.asarray(ambient_points, float))
        return (pts - self.chart_origin) @ self.chart_tangents.T

    def integrate_monomial(self, alpha):
        """Exact integral of lambda^alpha over the simplex (Fraction * measure)."""
        total = sum(alpha)
        num = Fraction(math.factorial(self.dim))
        for a in alpha:
            num *= math.factorial(a)
        return num / math.factorial(total + self.dim) * self._measure

    def random_points(self, count, rng):
        """Strictly interior sample points (intrinsic coordinates)."""
        w = rng.dirichlet([2.0] * (self.dim + 1), size=count)
        return w @ self.vertices


def integrate_monomial(simplex, alpha):
    """Module-level alias: exact integral of a barycentric monomial."""
    return simplex.integrate_monomial(tuple(alpha))


# ---------------------------------------------------------------------------
# scalar polynomial helpers: dict {exponent tuple: coefficient}
# ---------------------------------------------------------------------------

def poly_mul(a, b):
    out = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            key = tuple(x + y for x, y in zip(ea, eb))
            v = out.get(key, 0) + ca * cb
            if v == 0:
                out.pop(key, None)
            else:
                out[key] = v
    return out


def poly_homogenize(a, nvars, target):
    """Multiply by (sum lambda)^d so every exponent has total degree target."""
    out = {}
    ones = {tuple(int(i == j) for i in range(nvars)): 1 for j in range(nvars)}
    for ea, ca in a.items():
        d = target - sum(ea)
        if d < 0:
            raise ValueError("cannot homogenize downward")
        term = {ea: ca}
        for _ in range(d):
            term = poly_mul(term, ones)
        for k, v in term.items():
            w = out.get(k, 0) + v
            if w == 0:
                out.pop(k, None)
            else:
                out[k] = w
    return out


def monomials(nvars, degree):
    """All exponent tuples of the given total degree (lexicographic)."""
    if degree < 0:
        return []
    if nvars == 1:
        return [(degree,)]
    out = []
    for first in range(degree, -1, -1):
        out.extend((first,) + rest for rest in monomials(nvars - 1, degree - first))
    return out


class FormPolynomial:
    """A differential k-form with polynomial coefficients on one simplex.

    ``comps`` maps a strictly increasing tuple of intrinsic axis indices to a
    scalar polynomial dict.  Zero terms are pruned so equality is syntactic.
    """

    def __init__(self, simplex, k, comps=None):
        if k < 0 or k > simplex.dim:
            raise ValueError(f"form degree {k} invalid on a {simplex.dim}-simplex")
        self.simplex = simplex
        self.k = k
        self.comps = {}
        if comps:
            for key, poly in comps.items():
                clean = {e: c for e, c in poly.items() if c != 0}
                if clean:
                    self.comps[tuple(key)] = clean

    # -- construction helpers ------------------------------------------------
    @classmethod
    def zero(cls, simplex, k):
        return cls(simplex, k)

    @classmethod
    def monomial(cls, simplex, k, key, alpha, coeff=1):
        return cls(simplex, k, {tuple(key): {tuple(alpha): coeff}})

    def copy(self):
        return FormPolynomial(self.simplex, self.k,
                              {k: dict(v) for k, v in self.comps.items()})

    # -- algebra ---------------------------------------------------------------
    def __add__(self, other):
        if other.simplex is not self.simplex or other.k != self.k:
            raise ValueError("mismatched forms")
        out = {k: dict(v) for k, v in self.comps.items()}
        for key, poly in other.comps.items():
            tgt = out.setdefault(key, {})
            for e, c in poly.items():
                v = tgt.get(e, 0) + c
                if v == 0:
                    tgt.pop(e, None)
                else:
                    tgt[e] = v
        return FormPolynomial(self.simplex, self.k, out)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, c):
        if c == 0:
            return FormPolynomial(self.simplex, self.k)
        return FormPolynomial(self.simplex, self.k,
                              {k: {e: c * v for e, v in p.items()} for k, p in self.comps.items()})

    def mul_scalar_poly(self, poly):
        return FormPolynomial(self.simplex, self.k,
                              {k: poly_mul(p, poly) for k, p in self.comps.items()})

    def as_float(self):
        return FormPolynomial(self.simplex, self.k,
                              {k: {e: float(c) for e, c in p.items()}
                               for k, p in self.comps.items()})

    def max_degree(self):
        return max((sum(e) for p in self.comps.values() for e in p), default=0)

    def canonical(self):
        return tuple(sorted((key, tuple(sorted(p.items())))
                            for key, p in self.comps.items()))

    def __eq__(self, other):
        return (isinstance(other, FormPolynomial) and self.k == other.k
                and self.simplex is other.simplex and self.canonical() == other.canonical())

    def is_zero(self):
        return not self.comps

    # -- calculus ---------------------------------------------------------------
    def exterior_derivative(self):
        """d of the form; uses the exact barycentric gradients of the simplex."""
        m = self.simplex.dim
        if self.k >= m:
            raise ValueError("exterior derivative of a top-degree form")
        out = {}
        for key, poly in self.comps.items():
            for alpha, c in poly.items():
                for j, aj in enumerate(alpha):
                    if aj == 0:
                        continue
                    new_alpha = list(alpha)
                    new_alpha[j] -= 1
                    new_alpha = tuple(new_alpha)
                    g = self.simplex.grad_bary(j)
                    for axis in range(m):
                        if g[axis] == 0 or axis in key:
                            continue
                        pos = sum(1 for x in key if x < axis)
                        sign = -1 if pos % 2 else 1
                        new_key = tuple(sorted(key + (axis,)))
                        coeff = c * aj * g[axis] * sign
                        tgt = out.setdefault(new_key, {})
                        v = tgt.get(new_alpha, 0) + coeff
                        if v == 0:
                            tgt.pop(new_alpha, None)
                        else:
                            tgt[new_alpha] = v
        return FormPolynomial(self.simplex, self.k + 1, out)

    def directional_derivative(self, direction):
        """Scalar-coefficient derivative of each component along a vector."""
        m = self.simplex.dim
        d = [Fraction(float(x)) for x in np.asarray(direction, float)]
        out = {}
        for key, poly in self.comps.items():
            tgt = {}
            for alpha, c in poly.items():
                for j, aj in enumerate(alpha):
                    if aj == 0:
                        continue
                    g = self.simplex.grad_bary(j)
                    gd = sum(g[axis] * d[axis] for axis in range(m))
                    if gd == 0:
                        continue
                    na = list(alpha)
                    na[j] -= 1
                    na = tuple(na)
                    v = tgt.get(na, 0) + c * aj * gd
                    if v == 0:
                        tgt.pop(na, None)
                    else:
                        tgt[na] = v
            if tgt:
                out[key] = tgt
        return FormPolynomial(self.simplex, self.k, out)

    def wedge(self, other):
        if other.simplex is not self.simplex:
            raise ValueError("wedge of forms on different simplices")
        kk = self.k + other.k
        if kk > self.simplex.dim:
            return FormPolynomial(self.simplex, min(kk, self.simplex.dim))
        out = {}
        for k1, p1 in self.comps.items():
            for k2, p2 in other.comps.items():
                if set(k1) & set(k2):
                    continue
                merged = k1 + k2
                order = tuple(sorted(merged))
                perm = list(merged)
                sign = 1
                for i in range(len(perm)):
                    for j in range(len(perm) - 1 - i):
                        if perm[j] > perm[j + 1]:
                            perm[j], perm[j + 1] = perm[j + 1], perm[j]
                            sign = -sign
                prod = poly_mul(p1, p2)
                tgt = out.setdefault(order, {})
                for e, c in prod.items():
                    v = tgt.get(e, 0) + sign * c
                    if v == 0:
                        tgt.pop(e, None)
                    else:
                        tgt[e] = v
        return FormPolynomial(self.simplex, kk, out)

    def integrate(self):
        """Integral over the simplex; only defined for top-degree forms."""
        if self.k != self.simplex.dim:
            raise ValueError("can only integrate a top-degree form")
        key = tuple(range(self.simplex.dim))
        total = 0
        for e, c in self.comps.get(key, {}).items():
            total += c * self.simplex.integrate_monomial(e)
        return total

    def integrate_scalar(self):
        """Integral of a 0-form over the simplex."""
        if self.k != 0:
            raise ValueError("expected a 0-form")
        total = 0
        for e, c in self.comps.get((), {}).items():
            total += c * self.simplex.integrate_monomial(e)
        return total

    def eval(self, points):
        """Evaluate all components at intrinsic points; returns {key: values}."""
        lam = self.simplex.barycentric(points)
        out = {}
        for key, poly in self.comps.items():
            vals = np.zeros(lam.shape[0])
            for e, c in poly.items():
                term = np.full(lam.shape[0], float(c))
                for j, a in enumerate(e):
                    if a:
                        term *= lam[:, j] ** a
                vals += term
            out[key] = vals
        return out

    def eval_vector(self, points):
        """Proxy values for k=1 forms: array (npts, m) of component values."""
        if self.k != 1:
            raise ValueError("eval_vector is for 1-forms")
        vals = self.eval(points)
        m = self.simplex.dim
        out = np.zeros((np.atleast_2d(points).shape[0], m))
        for (axis,), v in vals.items():
            out[:, axis] = v
        return out

    def contract_vector(self, w):
        """0-form u . w for a k=1 form with a constant intrinsic vector w."""
        if self.k != 1:
            raise ValueError("contract_vector is for 1-forms")
        wf = [Fraction(float(x)) for x in np.asarray(w, float)]
        out = {}
        for (axis,), poly in self.comps.items():
            if wf[axis] == 0:
                continue
            for e, c in poly.items():
                v = out.get(e, 0) + c * wf[axis]
                if v == 0:
                    out.pop(e, None)
                else:
                    out[e] = v
        return FormPolynomial(self.simplex, 0, {(): out})

    def proxy_contract(self, w):
        """Contract the vector proxy of the form with a constant vector.

        k=1: proxy = components.  k=m-1: flux proxy (in 3D: (c23, -c13, c12);
        in 2D: (c1, -c0)).  k=m: scalar proxy times w[0].
        """
        m = self.simplex.dim
        wf = [Fraction(float(x)) for x in np.asarray(w, float)]
        out = {}

        def add(poly, factor):
            if factor == 0:
                return
            for e, c in poly.items():
                v = out.get(e, 0) + c * factor
                if v == 0:
                    out.pop(e, None)
                else:
                    out[e] = v

        if self.k == 1:
            for (axis,), poly in self.comps.items():
                add(poly, wf[axis])
        elif self.k == m - 1 and m >= 2:
            # flux proxy: dx_J pairs with (-1)^missing e_missing
            for key, poly in self.comps.items():
                missing = next(i for i in range(m) if i not in key)
                add(poly, wf[missing] * ((-1) ** missing))
        elif self.k == m:
            for key, poly in self.comps.items():
                add(poly, wf[0])
        elif self.k == 0:
            for key, poly in self.comps.items():
                add(poly, wf[0])
        else:
            raise ValueError("no vector proxy for this form degree")
        return FormPolynomial(self.simplex, 0, {(): out})

    def restrict(self, child, vertex_map):
        """Trace onto a subsimplex.

        ``vertex_map[i]`` is the parent-local vertex index of the child's i-th
        vertex.  Barycentric monomials restrict by dropping every exponent not
        visible on the child; the form part pulls back through the child chart.
        """
        m, d = self.simplex.dim, child.dim
        if self.k > d:
            raise ValueError("trace of a form of too-high degree")
        # chart tangents of the child expressed in parent intrinsic axes
        tan = child.chart_tangents
        if tan is None:
            raise ValueError("child simplex needs a chart for form pullback")
        if self.simplex.chart_tangents is not None:
            tan = tan @ self.simplex.chart_tangents.T
        keep = set(vertex_map)
        pull = {}
        for key, poly in self.comps.items():
            # restrict the scalar part first
            restricted = {}
            for alpha, c in poly.items():
                if any(a > 0 and j not in keep for j, a in enumerate(alpha)):
                    continue
                beta = tuple(alpha[vertex_map[i]] for i in range(d + 1))
                v = restricted.get(beta, 0) + c
                if v == 0:
                    restricted.pop(beta, None)
                else:
                    restricted[beta] = v
            if not restricted:
                continue
            for new_key in combinations(range(d), self.k):
                if self.k == 0:
                    det = 1
                elif self.k == 1:
                    det = Fraction(float(tan[new_key[0]][key[0]]))
                elif self.k == 2:
                    a = Fraction(float(tan[new_key[0]][key[0]]))
                    b = Fraction(float(tan[new_key[1]][key[0]]))
                    c2 = Fraction(float(tan[new_key[0]][key[1]]))
                    d2 = Fraction(float(tan[new_key[1]][key[1]]))
                    det = a * d2 - b * c2
                else:
                    sub = np.array([[float(tan[b][a]) for b in new_key] for a in key])
                    det = Fraction(float(np.linalg.det(sub)))
                if det == 0:
                    continue
                tgt = pull.setdefault(new_key, {})
                for e, c in restricted.items():
                    v = tgt.get(e, 0) + c * det
                    if v == 0:
                        tgt.pop(e, None)
                    else:
                        tgt[e] = v
        return FormPolynomial(child, self.k, pull)

    # -- serialization ---------------------------------------------------------
    def export_lines(self, p=None):
        """Text export: header naming (n, k, p), then component|alpha|coeff."""
        deg = self.max_degree() if p is None else p
        lines = [f"# form n={self.simplex.dim} k={self.k} p={deg}"]
        comp_keys = sorted(self.comps)
        for idx, key in enumerate(comp_keys):
            for e in sorted(self.comps[key]):
                c = self.comps[key][e]
                lines.append(f"{idx} | {','.join(map(str, e))} | {float(c):.17g}")
        return lines


# ---------------------------------------------------------------------------
# polynomial form spaces
# ---------------------------------------------------------------------------

def dim_full(n, p, k):
    """Dimension of the full degree-p k-form space on an n-simplex."""
    if p < 0 or k < 0 or k > n:
        return 0
    return math.comb(p + n, n) * math.comb(n, k)


def dim_trimmed(n, p, k):
    """Dimension of the trimmed degree-p k-form space on an n-simplex."""
    if p < 1 or k < 0 or k > n:
        return 0
    return math.comb(k + p - 1, k) * math.comb(n + p, n - k)


def full_basis(simplex, p, k):
    """Bernstein basis of the full space: C(p; alpha) lambda^alpha dy_J.

    The multinomial scaling keeps DoF matrices far better conditioned than
    bare monomials while the coefficients stay exact integers.
    """
    m = simplex.dim
    out = []
    for key in combinations(range(m), k):
        for alpha in monomials(m + 1, p):
            mult = math.factorial(p)
            for a in alpha:
                mult //= math.factorial(a)
            out.append(FormPolynomial.monomial(simplex, k, key, alpha, coeff=mult))
    return out


def scalar_basis(simplex, p):
    """Monomial basis of scalar polynomials of degree <= p (as 0-forms)."""
    return full_basis(simplex, p, 0)


def _coefficient_matrix(forms, p):
    """Stack form coefficients (homogenized to degree p) into a dense matrix."""
    if not forms:
        return np.zeros((0, 0)), [], []
    simplex = forms[0].simplex
    m = simplex.dim
    k = forms[0].k
    keys = list(combinations(range(m), k))
    alphas = monomials(m + 1, p)
    index = {}
    for ki, key in enumerate(keys):
        for ai, a in enumerate(alphas):
            index[(key, a)] = ki * len(alphas) + ai
    mat = np.zeros((len(keys) * len(alphas), len(forms)))
    for col, f in enumerate(forms):
        for key, poly in f.comps.items():
            hom = poly_homogenize(poly, m + 1, p)
            for e, c in hom.items():
                mat[index[(key, e)], col] = float(c)
    return mat, keys, alphas


def koszul(form):
    """Contraction with the position field (intrinsic chart coordinates)."""
    simplex = form.simplex
    m = simplex.dim
    if form.k == 0:
        raise ValueError("koszul of a 0-form")
    # x_i as barycentric-linear polynomial: x_i = sum_j V[j, i] lambda_j
    vf = [[Fraction(float(x)) for x in row] for row in simplex.vertices]
    coords = []
    for i in range(m):
        coords.append({tuple(int(j == jj) for jj in range(m + 1)): vf[j][i]
                       for j in range(m + 1) if vf[j][i] != 0})
    out = FormPolynomial(simplex, form.k - 1)
    for key, poly in form.comps.items():
        for pos, axis in enumerate(key):
            rest = tuple(x for x in key if x != axis)
            sign = (-1) ** pos
            piece = poly_mul(poly, coords[axis])
            if not piece:
                continue
            term = FormPolynomial(simplex, form.k - 1,
                                  {rest: {e: sign * c for e, c in piece.items()}})
            out = out + term
    return out


def trimmed_basis(simplex, p, k):
    """Basis of the trimmed space via the Koszul spanning construction.

    Spans monomials of degree p-1 plus Koszul contractions of degree-(p-1)
    (k+1)-form monomials, then extracts a maximal independent subset by
    pivoted QR.  For k=0 this is the full space; for k=m it is the full
    (p-1)-degree top-form space.
    """
    m = simplex.dim
    if p < 1:
        return []
    if k == 0:
        return full_basis(simplex, p, 0)
    if k == m:
        return full_basis(simplex, p - 1, m)
    span = full_basis(simplex, p - 1, k)
    for f in full_basis(simplex, p - 1, k + 1):
        kf = koszul(f)
        if not kf.is_zero():
            span.append(kf)
    target = dim_trimmed(m, p, k)
    mat, _, _ = _coefficient_matrix(span, p)
    _, _, piv = scipy.linalg.qr(mat, pivoting=True, mode="economic")
    smax = np.linalg.svd(mat, compute_uv=False)[0]
    chosen = sorted(piv[:target])
    basis = [span[i] for i in chosen]
    check, _, _ = _coefficient_matrix(basis, p)
    sv = np.linalg.svd(check, compute_uv=False)
    if len(sv) < target or sv[-1] <= RANK_RTOL * smax:
        raise RuntimeError("trimmed space extraction lost rank")
    return basis


class SpaceBasis:
    """An ordered, linearly independent basis of a polynomial form space.

    Independence is verified on construction by the rank of the stacked
    coefficient matrix; ``kind`` is one of full / trimmed / bubble.
    """

    def __init__(self, simplex, basis, kind):
        self.simplex = simplex
        self.basis = list(basis)
        self.kind = kind
        if self.basis:
            deg = max(f.max_degree() for f in self.basis)
            if span_rank(self.basis, p=deg) != len(self.basis):
                raise ValueError("basis is not linearly independent")

    def __len__(self):
        return len(self.basis)

    def __iter__(self):
        return iter(self.basis)


def space_basis(simplex, p, k, kind="full"):
    """Validated basis of the full or trimmed space on one simplex."""
    if kind == "full":
        return SpaceBasis(simplex, full_basis(simplex, p, k), "full")
    if kind == "trimmed":
        return SpaceBasis(simplex, trimmed_basis(simplex, p, k), "trimmed")
    raise ValueError(f"unknown space kind {kind!r}")


def independent_subset(forms, p=None, rtol=RANK_RTOL):
    """Maximal linearly independent subset of a list of forms (pivoted QR)."""
    if not forms:
        return []
    deg = p if p is not None else max(f.max_degree() for f in forms)
    mat, _, _ = _coefficient_matrix(forms, deg)
    sv = np.linalg.svd(mat, compute_uv=False)
    rank = int(np.sum(sv > rtol * sv[0])) if sv.size else 0
    _, _, piv = scipy.linalg.qr(mat, pivoting=True, mode="economic")
    return [forms[i] for i in sorted(piv[:rank])]


def span_rank(forms, p=None, rtol=RANK_RTOL):
    if not forms:
        return 0
    deg = p if p is not None else max(f.max_degree() for f in forms)
    mat, _, _ = _coefficient_matrix(forms, deg)
    sv = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(sv > rtol * sv[0])) if sv.size and sv[0] > 0 else 0
