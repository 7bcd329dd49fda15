"""Charge-cavity model: differential conductance versus bias for several couplings g.

The cavity is damped by thermal jump operators so that the uncoupled case
``g = 0`` still has a unique stationary state.
"""
import numpy as np

from _common import parser, plot, reduced_runner, write_csv
from heom.observables import conductance, current

THERMAL = [{"operator": "a", "thermal": {"omega": 1.0, "kT": 0.5, "Delta": 0.01, "W": 0.2}}]


def main():
    p = parser(__doc__, "out/cavity_conductance")
    p.add_argument("--n-photon", type=int, default=4)
    p.add_argument("--couplings", type=float, nargs="+", default=[0.0, 0.25, 0.5])
    args = p.parse_args()
    bias = np.linspace(-10, 10, 41)
    curves = {}
    for g in args.couplings:
        r = reduced_runner("example2", args.out, N=args.N, n_max=args.n_max, drop_bosonic=True,
                           lindblad=THERMAL, g=g, n_photon=args.n_photon)
        I = [current(r.stationary(phi)[0], r.model(phi).baths, "L").value for phi in bias]
        G = conductance(bias, I)[:, 1]
        curves[f"g={g:g}"] = (bias, G)
        write_csv(args.out / f"conductance_g{g:g}.csv", ["phi", "current", "conductance"],
                  zip(bias, I, G))
        mid = len(bias) // 2
        print(f"g={g:g}: G(0)={G[mid]:.4f}, local minimum at 0: "
              f"{bool(G[mid] < G[mid - 1] and G[mid] < G[mid + 1])}", flush=True)
    if args.plot:
        plot(args.out / "conductance.png", curves, "Phi", "dI/dPhi")


if __name__ == "__main__":
    main()
