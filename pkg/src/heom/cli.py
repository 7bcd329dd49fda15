"""
Batch front-end.

    heom run <config.json> [--count-only] [--threads N] [--out DIR]
    heom describe <config.json> <index>
    heom oracle <name>

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io as heomio
from .bath import Flavor
from .config import ConfigError, RunConfig, build_model, grid_values, load_config, matrix_from
from .hierarchy import AdoNotFound, HierarchyError, HierarchySpace, Parity, count_space
from .liouvillian import LiouvillianError, add_lindblad, build_heomls, export_coo
from .observables import conductance, current, dos, expectation, psd
from .solvers import AdosVector, SolverError, evolve_expm, evolve_ode, steadystate

__all__ = ["main", "Runner", "EXIT_OK", "EXIT_CONFIG", "EXIT_SOLVER"]

log = logging.getLogger("heom")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.exc = exc


def _exponents(baths):
    bos = [e for b in baths if b.flavor is Flavor.BOSONIC for e in b.exponents]
    fer = [e for b in baths if b.flavor is Flavor.FERMIONIC for e in b.exponents]
    return bos, fer


def count_ados(cfg: RunConfig) -> int:
    model = build_model(cfg, 0.0)
    bos, fer = _exponents(model.baths)
    tr = cfg.truncation
    return count_space(len(bos), len(fer), tr.m_max, tr.n_max, tr.I_th, (bos, fer))


class Runner:
    """Executes the tasks of a config, caching generators and steady states per bias."""

    def __init__(self, cfg: RunConfig, out_dir=None, threads=None):
        self.cfg = cfg
        self.out = Path(out_dir or cfg.output.directory)
        self.threads = threads or cfg.threads
        self.space = None
        self._cache = {}
        self.manifest = {"name": cfg.name, "threads": self.threads, "tasks": []}

    # -- cached building blocks ------------------------------------------------

    def _space(self):
        if self.space is None:
            model = build_model(self.cfg, 0.0)
            tr = self.cfg.truncation
            # importance depends on |coeff| and Re(rate) only, so the bias never changes the space
            self.space = HierarchySpace.from_baths(model.baths, tr.m_max, tr.n_max, tr.I_th,
                                                   max_ados=tr.max_ados)
            self.manifest["ado_count"] = len(self.space)
            self.manifest["dim"] = model.dim
            self.manifest["matrix_dim"] = len(self.space) * model.dim**2
        return self.space

    def model(self, phi):
        key = ("model", phi)
        if key not in self._cache:
            self._cache[key] = build_model(self.cfg, phi)
        return self._cache[key]

    def generator(self, phi, parity):
        key = ("M", phi, parity)
        if key not in self._cache:
            model = self.model(phi)
            M = build_heomls(model.H, model.baths, self._space(), parity, threads=self.threads)
            for F in model.jumps:
                M = add_lindblad(M, F)
            self._cache[key] = M
        return self._cache[key]

    def stationary(self, phi, method="direct"):
        key = ("ss", phi, method)
        if key not in self._cache:
            ss, report = steadystate(self.generator(phi, Parity.EVEN), method=method)
            self._cache[key] = (ss, report)
        return self._cache[key]

    # -- tasks -----------------------------------------------------------------

    def run(self) -> dict:
        start = time.perf_counter()
        self.out.mkdir(parents=True, exist_ok=True)
        try:
            try:
                self._space()
            except (HierarchyError, ConfigError) as exc:
                raise StageError("hierarchy", exc) from exc
            if "coo" in self.cfg.output.formats:
                export_coo(self.generator(self._first_phi(), Parity.EVEN), self.out / "heomls.coo")
            for task in self.cfg.tasks:
                entry = {"name": task.name, "type": task.type, "status": "running"}
                self.manifest["tasks"].append(entry)
                t0 = time.perf_counter()
                try:
                    getattr(self, f"_task_{task.type}")(task, entry)
                except (SolverError, LiouvillianError, ValueError, np.linalg.LinAlgError) as exc:
                    entry["status"] = "failed"
                    raise StageError(f"task {task.name!r}", exc) from exc
                finally:
                    entry["wall_time"] = time.perf_counter() - t0
                entry["status"] = "ok"
                log.info("task %s done in %.2fs", task.name, entry["wall_time"])
        finally:
            self.manifest["wall_time"] = time.perf_counter() - start
            self._write_manifest()
        return self.manifest

    def _first_phi(self):
        return float(grid_values(self.cfg.tasks[0].phi)[0])

    def _write_manifest(self):
        path = self.out / "manifest.json"
        tmp = heomio.partial_path(path)
        tmp.write_text(json.dumps(self.manifest, indent=2, default=float))
        os.replace(tmp, path)

    def _csv(self, task):
        return self.out / f"{task.name}.csv"

    def _scalar_phi(self, task):
        vals = grid_values(task.phi)
        if vals.size != 1:
            raise ConfigError(f"task {task.name!r} takes a single bias value")
        return float(vals[0])

    def _initial(self, task, model):
        if isinstance(task.initial, list):
            rho = matrix_from(task.initial)
        elif task.initial == "maximally_mixed":
            rho = np.eye(model.dim, dtype=complex) / model.dim
        else:
            w, U = np.linalg.eigh(model.H)
            rho = np.outer(U[:, 0], U[:, 0].conj())
        return AdosVector.from_density(rho, self._space())

    def _task_steadystate(self, task, entry):
        phi = self._scalar_phi(task)
        ss, report = self.stationary(phi, task.method if task.method == "gmres" else "direct")
        entry["residual"] = report.residual
        rho = ss.root
        rows = [(i, j, rho[i, j].real, rho[i, j].imag)
                for j in range(rho.shape[1]) for i in range(rho.shape[0])]
        heomio.write_csv(self._csv(task), ["row", "col", "re", "im"], rows)
        entry["output"] = self._csv(task).name
        if task.dump_ados:
            heomio.write_ados(self.out / f"{task.name}.ados", ss.data, ss.n_ados, ss.dim)

    def _task_evolve(self, task, entry):
        phi = self._scalar_phi(task)
        model = self.model(phi)
        M = self.generator(phi, Parity.EVEN)
        x0 = self._initial(task, model)
        times = grid_values(task.times)
        if task.method == "expm":
            states, report = evolve_expm(M, x0, times)
        else:
            states, report = evolve_ode(M, x0, times, rtol=task.rtol, atol=task.atol)
        entry["steps"] = report.steps
        names = task.observables or ["trace"]
        cols = {}
        for name in names:
            op = np.eye(model.dim) if name == "trace" else model.operator(name)
            cols[name] = [expectation(s, op) for s in states]
        heomio.write_trajectory(self._csv(task), times, cols)
        entry["output"] = self._csv(task).name
        if task.dump_ados:
            s = states[-1]
            heomio.write_ados(self.out / f"{task.name}.ados", s.data, s.n_ados, s.dim)

    def _spectrum(self, task, entry, kind):
        phi = self._scalar_phi(task)
        model = self.model(phi)
        op = model.operator(task.operator)
        ss, report = self.stationary(phi)
        entry["steady_residual"] = report.residual
        omega = grid_values(task.omega)
        method = "gmres" if task.method == "gmres" else "direct"
        if kind == "dos":
            res = dos(self.generator(phi, Parity.ODD), ss, op, omega, method=method,
                      threads=self.threads)
        else:
            res = psd(self.generator(phi, Parity.EVEN), ss, op, omega, method=method,
                      threads=self.threads)
        heomio.write_spectrum(self._csv(task), res.omega, res.values)
        entry["output"] = self._csv(task).name

    def _task_dos(self, task, entry):
        self._spectrum(task, entry, "dos")

    def _task_psd(self, task, entry):
        self._spectrum(task, entry, "psd")

    def _sweep(self, task, entry, with_conductance):
        phis = grid_values(task.phi)
        if with_conductance and phis.size < 3:
            raise ConfigError(f"task {task.name!r}: conductance needs at least 3 bias points")
        path = self._csv(task)
        partial = heomio.partial_path(path)
        currents, residuals = [], []
        # stream rows so an aborted sweep leaves its progress in the .partial file
        with open(partial, "w") as fh:
            fh.write("phi,current\n")
            for phi in phis:
                ss, report = self.stationary(float(phi))
                residuals.append(report.residual)
                val = current(ss, self.model(float(phi)).baths, task.bath, float(phi)).value
                currents.append(val)
                fh.write(heomio.CSV_FORMAT % phi + "," + heomio.CSV_FORMAT % val + "\n")
                fh.flush()
        if with_conductance:
            G = conductance(phis, currents)[:, 1]
            heomio.write_sweep(path, phis, currents, G)
        else:
            os.replace(partial, path)
        entry["residuals"] = residuals
        entry["output"] = path.name

    def _task_current(self, task, entry):
        self._sweep(task, entry, with_conductance=False)

    def _task_conductance(self, task, entry):
        self._sweep(task, entry, with_conductance=True)


# ---------------------------------------------------------------------------
# describe


def describe(cfg: RunConfig, index: str) -> str:
    model = build_model(cfg, 0.0)
    tr = cfg.truncation
    space = HierarchySpace.from_baths(model.baths, tr.m_max, tr.n_max, tr.I_th,
                                      max_ados=tr.max_ados)
    bos_meta = [(b, e) for b in model.baths if b.flavor is Flavor.BOSONIC for e in b.exponents]
    fer_meta = [(b, e) for b in model.baths if b.flavor is Flavor.FERMIONIC for e in b.exponents]
    text = index.strip()
    if text.lstrip("-").isdigit():
        flat = int(text)
        if not 0 <= flat < len(space):
            raise IndexError(f"index {flat} outside 0..{len(space) - 1}")
    else:
        try:
            j, q = json.loads(text)
        except (ValueError, TypeError):
            raise ConfigError("index must be a flat integer or a JSON pair [[j...], [q...]]") from None
        j, q = tuple(sorted(int(k) for k in j)), tuple(int(k) for k in q)
        try:
            flat = space.index_of((j, q))
        except AdoNotFound as exc:
            return f"label j={list(j)} q={list(q)}: {exc.reason}"
    ado = space.ado_at(flat)
    lines = [
        f"flat: {flat}",
        f"m: {ado.m}",
        f"n: {ado.n}",
        f"j: {list(ado.j)}",
        f"q: {list(ado.q)}",
        f"parity: {ado.parity.name}",
        f"importance: {space.importance(ado.j, ado.q):.6g}",
    ]
    for k in sorted(set(ado.j)):
        b, e = bos_meta[k]
        lines.append(f"  bosonic {k}: bath={e.bath_id} part={e.part.value} l={e.l} "
                     f"channel={e.channel} xi={e.coeff:.6g} chi={e.rate:.6g} "
                     f"multiplicity={ado.j.count(k)}")
    for k in ado.q:
        b, e = fer_meta[k]
        lines.append(f"  fermionic {k}: bath={e.bath_id} nu={e.nu:+d} h={e.h} "
                     f"channel={e.channel} eta={e.coeff:.6g} gamma={e.rate:.6g}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# entry point


def _parser():
    p = argparse.ArgumentParser(prog="heom", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the tasks of a config")
    r.add_argument("config")
    r.add_argument("--count-only", action="store_true", help="print the ADO count and exit")
    r.add_argument("--threads", type=int, default=None)
    r.add_argument("--out", default=None, help="output directory")
    d = sub.add_parser("describe", help="describe one ADO of the config's hierarchy")
    d.add_argument("config")
    d.add_argument("index", help="flat index or JSON label [[j...], [q...]]")
    o = sub.add_parser("oracle", help="run a named reference suite")
    o.add_argument("name")
    return p


def _threads(arg, cfg):
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("HEOM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"HEOM_THREADS={env!r} is not an integer") from None
    return cfg.threads


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "oracle":
            from .oracles import SUITES

            if args.name not in SUITES:
                print(f"unknown oracle {args.name!r}; choose from {', '.join(sorted(SUITES))}",
                      file=sys.stderr)
                return EXIT_CONFIG
            return EXIT_OK if SUITES[args.name](print) else EXIT_SOLVER
        cfg = load_config(args.config)
        log.info("config: %s", cfg.to_json())
        if args.command == "describe":
            print(describe(cfg, args.index))
            return EXIT_OK
        if args.count_only:
            print(count_ados(cfg))
            return EXIT_OK
        runner = Runner(cfg, args.out, _threads(args.threads, cfg))
        manifest = runner.run()
        print(f"{manifest['ado_count']} ADOs, matrix dimension {manifest['matrix_dim']}; "
              f"outputs in {runner.out}")
        return EXIT_OK
    except (ConfigError, IndexError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        code = EXIT_CONFIG if isinstance(exc.exc, ConfigError) else EXIT_SOLVER
        print(f"failed at {exc}", file=sys.stderr)
        return code
    except (HierarchyError, SolverError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
