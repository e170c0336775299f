"""Compare Ritz estimates from PCG with the exact preconditioned spectrum on small cases."""

import argparse

from stokesdd import manufactured
from stokesdd.assembly import assemble_system, eliminate_dirichlet
from stokesdd.mesh import build_mesh_pair, build_subdomain_layout
from stokesdd.oracle import preconditioned_spectrum
from stokesdd.partition import build_jump_operators, build_saddle_blocks, classify_dofs
from stokesdd.pcg import pcg
from stokesdd.reduced import build_reduced_operator


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=8, help="pressure cells per side")
    ap.add_argument("--nsub", type=int, default=2)
    args = ap.parse_args(argv)
    print("coarse          pressure       exact_min  ritz_min  exact_max  ritz_max  iters")
    for pressure in ("continuous", "discontinuous"):
        for coarse in ("corners", "corners+edges"):
            mp = build_mesh_pair(args.n)
            layout = build_subdomain_layout(mp, args.nsub)
            system = eliminate_dirichlet(assemble_system(mp, manufactured.forcing, pressure))
            part = classify_dofs(mp, layout, coarse, pressure)
            op = build_reduced_operator(build_saddle_blocks(system, part), build_jump_operators(part, layout),
                                        mp.velocity_mesh.h)
            ev = preconditioned_spectrum(op)
            rep = pcg(op.apply_G, op.apply_preconditioner, op.form_reduced_rhs(), 1e-6, 500, op.project_out_null)
            print(f"{coarse:15s} {pressure:14s} {ev[0]:9.4f} {rep.ritz_min:9.4f} {ev[-1]:10.4f} "
                  f"{rep.ritz_max:9.4f} {rep.iterations:6d}")
            op.close()


if __name__ == "__main__":
    main()
