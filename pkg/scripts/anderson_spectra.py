"""Anderson impurity: DOS at several biases and the differential conductance."""
import numpy as np

from _common import parser, plot, reduced_runner, write_csv
from heom.hierarchy import Parity
from heom.observables import conductance, current, dos


def main():
    p = parser(__doc__, "out/anderson")
    p.add_argument("--I-th", type=float, default=0.0)
    args = p.parse_args()
    r = reduced_runner("example1", args.out, N=args.N, n_max=args.n_max, I_th=args.I_th)

    w = np.linspace(-10, 10, 201)
    curves = {}
    for phi in (0.0, 0.5, 1.0):
        ss, _ = r.stationary(phi)
        A = dos(r.generator(phi, Parity.ODD), ss, r.model(phi).operator("d_up"), w).values
        curves[f"Phi={phi:g}"] = (w, A)
        write_csv(args.out / f"dos_phi{phi:g}.csv", ["omega", "value"], zip(w, A))

    bias = np.linspace(-4, 4, 17)
    I = [current(r.stationary(phi)[0], r.model(phi).baths, "L").value for phi in bias]
    G = conductance(bias, I)
    write_csv(args.out / "conductance.csv", ["phi", "current", "conductance"],
              zip(bias, I, G[:, 1]))
    print(f"{len(r.space)} ADOs; conductance maximum at Phi = {bias[np.argmax(G[:, 1])]:g}")
    if args.plot:
        plot(args.out / "dos.png", curves, "omega", "A(omega)")
        plot(args.out / "conductance.png", {"G": (bias, G[:, 1])}, "Phi", "dI/dPhi")


if __name__ == "__main__":
    main()
