"""Command-line front end.

Exit codes: 0 = success / all checks pass, 1 = a verification failed,
2 = usage or input errors.  Outputs are byte-deterministic for fixed inputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import assembly, bgg, elements, mesh as meshmod
from .assembly import (dim_formula, dof_savings, homogeneous_row_report,
                       mixed_sequence, verify_exactness)
from .elements import dual_basis, element_def, unisolvence_check
from .mesh import SimplicialMesh, cube_center_fan_grid


def _load_mesh(path):
    try:
        return SimplicialMesh.load(path)
    except FileNotFoundError:
        raise SystemExit(f"error: mesh file not found: {path}")
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise SystemExit(f"error: cannot parse mesh file {path}: {exc}")


def _tol(args):
    if args.tol is not None:
        return args.tol
    env = os.environ.get("DERHAM_TOL")
    return float(env) if env else 1e-10


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _p_values(args):
    if args.p_range:
        lo, hi = args.p_range.split(":")
        return list(range(int(lo), int(hi) + 1))
    if args.p is None:
        raise SystemExit("error: provide --p or --p-range")
    return [args.p]


REFERENCE = {
    1: [[0.0], [1.0]],
    2: [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
    3: [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
}


def cmd_tables(args):
    m = _load_mesh(args.mesh)
    n = m.dim
    if args.dim is not None and args.dim != n:
        raise SystemExit(f"error: --dim {args.dim} does not match the mesh ({n}D)")
    rows = []
    families = [0, 1, 2]
    for p in _p_values(args):
        for r in families + (["hz"] if n == 3 else []):
            ks = range(n + 1) if r in (0, 1, 2) else [2]
            for k in ks:
                try:
                    el = element_def(r, p, k, n)
                except ValueError:
                    continue
                rows.append({
                    "r": str(r), "k": k, "p": p, "label": el.label,
                    "local_dim": el.local_dim,
                    "global_dim": dim_formula(r, p, k, n, m.counts),
                })
    if args.format == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        lines = ["r,k,p,label,local_dim,global_dim"]
        lines += [f"{x['r']},{x['k']},{x['p']},{x['label']},{x['local_dim']},{x['global_dim']}"
                  for x in rows]
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0


def cmd_verify(args):
    m = _load_mesh(args.mesh)
    betti = None
    if args.betti:
        betti = [int(x) for x in args.betti.split(",")]
    try:
        if args.row == "mixed":
            rep = mixed_sequence(m, args.p)
        else:
            rep = verify_exactness(m, int(args.row), args.p, expected_betti=betti)
    except (ValueError, RuntimeError) as exc:
        raise SystemExit(f"error: {exc}")
    text = rep.to_json() + "\n"
    _emit(text, args.out)
    if not rep.passed:
        if betti is None and rep.betti != rep.expected_betti:
            sys.stderr.write(
                "verification failed: computed harmonic dimensions "
                f"{rep.betti}; if the mesh is not contractible pass --betti\n")
        else:
            sys.stderr.write("verification failed\n")
        return 1
    return 0


def cmd_element(args):
    try:
        el = element_def(args.r_parsed, args.p, args.k, args.dim)
    except ValueError as exc:
        raise SystemExit(f"error: {exc}")
    rep = unisolvence_check(el, REFERENCE[args.dim])
    lines = [f"family r={el.r} p={el.p} k={el.k} n={el.n} ({el.label})",
             f"local dimension {el.local_dim}",
             f"unisolvent: {rep['pass']} (sigma ratio {rep['sigma_ratio']:.3e})"]
    single = meshmod.SimplicialMesh(np.asarray(REFERENCE[args.dim], float),
                                    [tuple(range(args.dim + 1))])
    dofs = elements.cell_dofs(el, single, 0)
    for i, dof in enumerate(dofs):
        cls = "shared" if dof.shared else "per-cell"
        q = getattr(dof, "q", None)
        eta = getattr(dof, "eta", None)
        if q is not None:
            deg = f" test-deg {max(sum(e) for e in q)}"
        elif eta is not None and not eta.is_zero():
            deg = f" test-deg {eta.max_degree()}"
        else:
            deg = ""
        lines.append(f"dof {i:3d}: dim {dof.entity_dim} simplex {dof.entity_verts} "
                     f"{dof.klass}{deg} [{cls}]")
    _emit("\n".join(lines) + "\n", args.out)
    return 0 if rep["pass"] else 1


def cmd_bc(args):
    m = _load_mesh(args.mesh)
    if m.dim != 2:
        raise SystemExit("error: boundary-count reports are two-dimensional")
    cls = m.classify_boundary(args.bctol)
    rep = homogeneous_row_report(m, args.p, cls)
    out = {
        "V0": cls.v0, "V0s": cls.v0s, "E0": len(m.boundary_simplices(1)),
        "corner_vertices": sorted(cls.corner_vertices),
        "reduced_dims": rep["dims"],
        "formula_dims": rep["formulas"],
        "alternating_sum": rep["alternating"],
        "exact": rep["exact"],
    }
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    return 0 if rep["dims"] == rep["formulas"] and rep["exact"] else 1


def cmd_bgg(args):
    m = _load_mesh(args.mesh)
    resid = bgg.verify_bgg_identity(m, args.p)
    xi = bgg.xi_complex(m, args.p)
    stress_p = max(args.p, 3)
    st = bgg.huzhang_stress(stress_p)
    out = {
        "identity_residual": resid,
        "xi": xi,
        "stress": {
            "p": st.p, "n_dofs": st.n_dofs,
            "skew_interior": st.skew_interior, "sym_interior": st.sym_interior,
            "interior_identity": st.interior_identity,
            "unisolvent": st.unisolvent,
            "sym_restricted_unisolvent": st.sym_restricted_unisolvent,
        },
    }
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    ok = resid < _tol(args) and xi["exact"] and st.unisolvent and st.interior_identity
    return 0 if ok else 1


def cmd_compare(args):
    try:
        nx, ny, nz = (int(x) for x in args.grid.split(","))
    except ValueError:
        raise SystemExit("error: --grid expects three comma-separated sizes")
    m = cube_center_fan_grid(nx, ny, nz)
    rep = dof_savings(args.p, m)
    ok = rep["dim_classical"] == rep["closed_classical"]
    if rep["dim_nodal"] is not None:
        ok = ok and rep["dim_nodal"] == rep["closed_nodal"]
    if args.format == "json":
        _emit(json.dumps(rep, indent=2) + "\n", args.out)
    else:
        lines = ["quantity,value"]
        for key in ("dim_classical", "closed_classical", "dim_nodal",
                    "closed_nodal", "difference", "edge_vertex_ratio",
                    "per_tet_estimate_classical", "per_tet_estimate_nodal",
                    "per_tet_estimate_difference"):
            lines.append(f"{key},{rep[key]}")
        for key, v in rep["counts"].items():
            lines.append(f"count_{key},{v}")
        _emit("\n".join(lines) + "\n", args.out)
    return 0 if ok else 1


def cmd_export(args):
    try:
        el = element_def(args.r_parsed, args.p, args.k, args.dim)
    except ValueError as exc:
        raise SystemExit(f"error: {exc}")
    duals, dofs, _ = dual_basis(el, REFERENCE[args.dim])
    lines = []
    for f in duals:
        lines.extend(f.export_lines(p=args.p))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _parse_r(value):
    if value in ("hz", "minus"):
        return value
    try:
        return int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid family grade {value!r}")


def build_parser():
    ap = argparse.ArgumentParser(prog="derham",
                                 description="nodal de Rham family verification tool")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, mesh=False):
        p.add_argument("--out", default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if mesh:
            p.add_argument("--mesh", required=True)

    t = sub.add_parser("tables", help="family grid with local/global dimensions")
    common(t, mesh=True)
    t.add_argument("--p", type=int, default=None)
    t.add_argument("--p-range", default=None)
    t.add_argument("--dim", type=int, default=None)

    v = sub.add_parser("verify", help="complex + exactness verification")
    common(v, mesh=True)
    v.add_argument("--row", "--r", dest="row", default="1",
                   help="family grade 0|1|2|mixed")
    v.add_argument("--p", type=int, required=True)
    v.add_argument("--betti", default=None,
                   help="expected harmonic dimensions, comma separated")

    e = sub.add_parser("element", help="element catalog and unisolvence")
    common(e)
    e.add_argument("--r", dest="r_parsed", type=_parse_r, required=True)
    e.add_argument("--k", type=int, required=True)
    e.add_argument("--dim", type=int, required=True)
    e.add_argument("--p", type=int, required=True)

    b = sub.add_parser("bc", help="boundary classification and reduced dims")
    common(b, mesh=True)
    b.add_argument("--r", type=int, default=1)
    b.add_argument("--p", type=int, required=True)
    b.add_argument("--bctol", type=float, default=meshmod.COLLINEAR_TOL)

    g = sub.add_parser("bgg", help="elasticity construction report")
    common(g, mesh=True)
    g.add_argument("--p", type=int, required=True)

    c = sub.add_parser("compare", help="classical vs nodal dimension savings")
    common(c)
    c.add_argument("--p", type=int, required=True)
    c.add_argument("--grid", required=True, help="nx,ny,nz")

    x = sub.add_parser("export", help="dual basis in text form")
    common(x)
    x.add_argument("--r", dest="r_parsed", type=_parse_r, required=True)
    x.add_argument("--k", type=int, required=True)
    x.add_argument("--dim", type=int, required=True)
    x.add_argument("--p", type=int, required=True)

    return ap


COMMANDS = {
    "tables": cmd_tables,
    "verify": cmd_verify,
    "element": cmd_element,
    "bc": cmd_bc,
    "bgg": cmd_bgg,
    "compare": cmd_compare,
    "export": cmd_export,
}


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            sys.stderr.write(exc.code + "\n")
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
