"""Anderson impurity: current versus bias for several importance thresholds."""
import numpy as np

from _common import parser, plot, reduced_runner, write_csv
from heom.observables import current


def main():
    p = parser(__doc__, "out/importance")
    p.set_defaults(n_max=4)
    p.add_argument("--thresholds", type=float, nargs="+", default=[1e-5, 1e-6, 1e-7, 0.0])
    args = p.parse_args()
    bias = np.linspace(0, 4, 9)
    curves, results = {}, {}
    for I_th in args.thresholds:
        r = reduced_runner("example1", args.out, N=args.N, n_max=args.n_max, I_th=I_th)
        I = np.array([current(r.stationary(phi)[0], r.model(phi).baths, "L").value
                      for phi in bias])
        results[I_th] = I
        curves[f"I_th={I_th:g}"] = (bias, I)
        write_csv(args.out / f"current_Ith{I_th:g}.csv", ["phi", "current"], zip(bias, I))
        print(f"I_th={I_th:g}: {len(r.space)} ADOs", flush=True)
    ref = results[min(args.thresholds)]
    for I_th, I in results.items():
        print(f"I_th={I_th:g}: max deviation from the smallest threshold {np.abs(I - ref).max():.3e}")
    if args.plot:
        plot(args.out / "current.png", curves, "Phi", "I_L")


if __name__ == "__main__":
    main()
