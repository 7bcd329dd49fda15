"""Charge-cavity model at Phi = 6: charge DOS and cavity PSD versus coupling g.

The cavity PSD is computed twice: with the bosonic bath in the hierarchy and
with the bath replaced by thermal Born-Markov jump operators.
"""
import numpy as np

from _common import parser, plot, reduced_runner, write_csv
from heom.hierarchy import Parity
from heom.observables import dos, psd

PHI = 6.0
THERMAL = [{"operator": "a", "thermal": {"omega": 1.0, "kT": 0.5, "Delta": 0.01, "W": 0.2}}]


def main():
    p = parser(__doc__, "out/cavity_spectra")
    p.add_argument("--m-max", type=int, default=2)
    p.add_argument("--I-th", type=float, default=1e-5)
    p.add_argument("--n-photon", type=int, default=4)
    p.add_argument("--couplings", type=float, nargs="+", default=[0.1, 0.3, 0.5])
    p.add_argument("--skip-dos", action="store_true")
    args = p.parse_args()
    w_dos = np.linspace(-10, 10, 101)
    w_psd = np.linspace(0.6, 1.4, 9)
    dos_curves, psd_curves = {}, {}
    for g in args.couplings:
        for label, kw in (("HEOM", dict(m_max=args.m_max)),
                          ("ME", dict(m_max=0, drop_bosonic=True, lindblad=THERMAL))):
            r = reduced_runner("example2", args.out, N=args.N, n_max=args.n_max, I_th=args.I_th,
                               g=g, n_photon=args.n_photon, **kw)
            ss, _ = r.stationary(PHI)
            S = psd(r.generator(PHI, Parity.EVEN), ss, r.model(PHI).operator("a"), w_psd).values
            psd_curves[f"{label} g={g:g}"] = (w_psd, S)
            write_csv(args.out / f"psd_{label}_g{g:g}.csv", ["omega", "value"], zip(w_psd, S))
            print(f"{label} g={g:g}: {len(r.space)} ADOs, PSD peak at {w_psd[np.argmax(S)]:g}",
                  flush=True)
            if label == "HEOM" and not args.skip_dos:
                A = dos(r.generator(PHI, Parity.ODD), ss, r.model(PHI).operator("d"), w_dos).values
                dos_curves[f"g={g:g}"] = (w_dos, A)
                write_csv(args.out / f"dos_g{g:g}.csv", ["omega", "value"], zip(w_dos, A))
    if args.plot:
        if dos_curves:
            plot(args.out / "dos.png", dos_curves, "omega", "A(omega)")
        plot(args.out / "psd.png", psd_curves, "omega", "S(omega)")


if __name__ == "__main__":
    main()
