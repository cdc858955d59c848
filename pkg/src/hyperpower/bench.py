"""Lid-driven cavity experiments: solves, spectra, matvec scaling and the cost-model contour.

Usable as a library (``run_solve``, ``run_spectra``, ``run_scaling``,
``contour_points``) or from the command line::

    python -m hyperpower solve --mesh 16 --degree 4 --updates 4
    python -m hyperpower spectra --out spectra.json
    python -m hyperpower scaling --meshes 16 24 32 --operator saddle
    python -m hyperpower contour --records records.csv

The forward operator timed as ``T_f`` is the Kronecker-assembled saddle
matvec, so ``T_sol`` ratios are trends for this implementation and not a
reproduction of a quadrature-based operator.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import sys
import time
import warnings
from dataclasses import asdict, dataclass, fields
from importlib import metadata

import numpy as np

from . import precond as pc
from .krylov import minres
from .linop import LinearOperator, materialize
from .spectral import sequence_reports, verify_theory
from .spline import default_penalty
from .stokes import assemble_stokes
from .tensorkron import KroneckerOp

SCHUR_MODES = ("hat", "fixed", "exact")
DESK_MAX_MESH = 32
DESK_MAX_DEGREE = 6
MAX_UPDATES = 4


def library_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    mesh: int = 8
    degree: int = 2
    updates: int = 4
    schur: str = "hat"
    nu: float = 1.0
    cpen: float | None = None
    tol: float = 1e-8
    maxit: int | None = None
    out: str | None = None
    seed: int = 0
    repeat: int = 1
    allow_large: bool = False

    def validate(self) -> "RunConfig":
        if self.mesh < 2:
            raise ConfigError(f"mesh must be >= 2, got {self.mesh}")
        if self.degree < 2:
            raise ConfigError(f"degree must be >= 2, got {self.degree}")
        if not self.allow_large and (self.mesh > DESK_MAX_MESH or self.degree > DESK_MAX_DEGREE):
            raise ConfigError(
                f"mesh {self.mesh} / degree {self.degree} exceeds the desk-scale limits "
                f"({DESK_MAX_MESH}, {DESK_MAX_DEGREE}); pass --allow-large")
        if not 0 <= self.updates <= MAX_UPDATES:
            raise ConfigError(f"updates must lie in 0..{MAX_UPDATES}, got {self.updates}")
        if self.schur not in SCHUR_MODES:
            raise ConfigError(f"schur must be one of {SCHUR_MODES}, got {self.schur!r}")
        if self.nu <= 0:
            raise ConfigError("nu must be positive")
        if self.cpen is not None and self.cpen <= 0:
            raise ConfigError("cpen must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.maxit is not None and self.maxit < 1:
            raise ConfigError("maxit must be positive")
        if self.repeat < 1:
            raise ConfigError("repeat must be positive")
        return self

    @property
    def penalty(self) -> float:
        return self.cpen if self.cpen is not None else default_penalty(self.degree)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cpen"] = self.penalty
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data).validate()


@dataclass
class BenchRecord:
    config: RunConfig
    level: int
    n_iter: int
    converged: bool
    t_sol: float
    t_sol_norm: float
    t_f: float
    t_p: float
    flops_forward: int
    flops_precond: int
    flops_pv0: int
    flops_a: int
    c_P: float
    c_A: float
    residual: float
    true_residual: float
    div_ratio: float
    div_l2_ratio: float
    pressure_shift: float
    n_V: int
    n_Q: int

    WALL_COLUMNS = ("t_sol", "t_sol_norm", "t_f", "t_p")

    def row(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "config"}
        d.update({"mesh": self.config.mesh, "degree": self.config.degree, "schur": self.config.schur,
                  "nu": self.config.nu, "cpen": self.config.penalty, "tol": self.config.tol,
                  "version": library_version(), "config": self.config.to_json()})
        return d


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(rows: list[dict], path_or_buffer=None) -> str:
    """Header plus one line per row, floats with 17 significant digits. Returns the text."""
    if not rows:
        raise ValueError("nothing to write")
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in r.items()})
    text = buf.getvalue()
    if isinstance(path_or_buffer, str):
        with open(path_or_buffer, "w", newline="") as fh:
            fh.write(text)
    elif path_or_buffer is not None:
        path_or_buffer.write(text)
    return text


def read_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@contextlib.contextmanager
def single_thread():
    """Pin BLAS pools to one thread while timing (no-op without threadpoolctl)."""
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        yield
        return
    with threadpool_limits(limits=1):
        yield


def time_apply(op: LinearOperator, reps: int = 5, seed: int = 0) -> float:
    """Median wall time of ``reps`` applies after one warm-up."""
    x = np.random.default_rng(seed).standard_normal(op.shape[1])
    op.apply(x)
    ts = []
    for _ in range(reps):
        t0 = time.perf_counter()
        op.apply(x)
        ts.append(time.perf_counter() - t0)
    return float(np.median(ts))


def _n43(n: int) -> float:
    return n ** (4.0 / 3.0)


def run_solve(config: RunConfig) -> list[BenchRecord]:
    """Solve the cavity with ``P_0 .. P_k`` and return one record per level.

    ``T_sol`` of each level is normalized by the level-0 solve of the same
    call; with ``repeat > 1`` each solve is timed that many times and the
    fastest run is kept.
    """
    config.validate()
    system = assemble_stokes(config.mesh, config.degree, nu=config.nu, c_pen=config.cpen)
    with warnings.catch_warnings():
        warnings.simplefilter("always", RuntimeWarning)
        seq = pc.preconditioner_sequence(system, config.updates, config.schur)
    b = system.full_rhs
    pv = pc.build_sequence_V(system, 0, check=False)[0]
    flops_pv0, flops_a = pv.flops, system.A.flops
    pq0 = pc.make_PQ0(system)
    records, t_ref = [], None
    with single_thread():
        t_f = time_apply(system.saddle, seed=config.seed)
        for k in range(config.updates + 1):
            best = None
            for _ in range(config.repeat):
                x, stats = minres(system.saddle, b, seq[k], tol=config.tol, maxit=config.maxit)
                if best is None or stats.wall_time < best[1].wall_time:
                    best = (x, stats)
            x, stats = best
            t_p = time_apply(seq[k], seed=config.seed)
            if k == 0:
                t_ref = stats.wall_time
            u, p = system.split(x)
            div = system.Bt.apply(u)
            u_norm = float(np.linalg.norm(u))
            energy = float(np.sqrt(max(u @ system.A.apply(u), 0.0)))
            div_l2 = float(np.sqrt(max(div @ pq0.apply(div), 0.0)) / system.nu)
            _, shift = system.normalize_pressure(p)
            records.append(BenchRecord(
                config=config, level=k, n_iter=stats.n_iter, converged=stats.converged,
                t_sol=stats.wall_time,
                t_sol_norm=stats.wall_time / t_ref,
                t_f=t_f, t_p=t_p, flops_forward=system.saddle.flops, flops_precond=seq[k].flops,
                flops_pv0=flops_pv0, flops_a=flops_a,
                c_P=flops_pv0 / _n43(system.n_V), c_A=flops_a / _n43(system.n_V),
                residual=stats.residuals[-1], true_residual=stats.true_residual,
                div_ratio=float(np.linalg.norm(div)) / u_norm if u_norm else 0.0,
                div_l2_ratio=div_l2 / energy if energy else 0.0,
                pressure_shift=shift, n_V=system.n_V, n_Q=system.n_Q,
            ))
    return records


def schur_reports(system, schur: str, k: int, seq_v=None):
    """Spectra of each ``P_{Q,j}^{-1} S`` against the exact Schur complement ``S``, kernel deflated."""
    s_dense = materialize(pc.exact_schur(system))
    if schur == "hat":
        seq_v = seq_v or pc.build_sequence_V(system, k, check=False)
        seq = pc.build_sequence_Q_hat(system, seq_v, k, check=False)
    elif schur == "fixed":
        seq = pc.build_sequence_Q_fixed(system, k, check=False)
    elif schur == "exact":
        seq = pc.build_sequence_Q_exact(system, k, check=False)
    else:
        raise ConfigError(f"unknown Schur variant {schur!r}")
    return sequence_reports(s_dense, seq, deflate=1)


def run_spectra(config: RunConfig, hat_tolerance: float = 0.05) -> dict:
    """All four preconditioner sequences at desk scale, with the theory checks.

    The velocity and exact-Schur sequences update against the operator the
    spectrum is taken of, so every check applies. The hat and fixed
    sequences update against an approximation of the Schur complement, so
    the bound and l-map checks are recorded but not required; the fixed
    sequence is instead expected to improve κ for the first three updates.
    """
    config.validate()
    system = assemble_stokes(config.mesh, config.degree, nu=config.nu, c_pen=config.cpen)
    k = config.updates
    seq_v = pc.build_sequence_V(system, k, check=False)
    out = {"config": config.to_dict(), "version": library_version(), "sequences": {}, "checks": {}}
    reports = {"velocity": sequence_reports(system.A, seq_v)}
    for mode in SCHUR_MODES:
        reports[mode] = schur_reports(system, mode, k, seq_v)
    exempt = {"velocity": (), "exact": (), "hat": ("spectrum-in-(0,1]", "l-map"),
              "fixed": ("spectrum-in-(0,1]", "l-map", "kappa-decreasing")}
    required_ok = True
    for name, reps in reports.items():
        led = verify_theory(reps, exempt=exempt[name])
        out["sequences"][name] = [r.to_dict() for r in reps]
        out["checks"][name] = led.to_dict()
        required_ok &= led.passed
    kap = [r.kappa for r in reports["fixed"]]
    fixed_ok = all(kap[j] < kap[j - 1] for j in range(1, min(4, len(kap))))
    out["checks"]["fixed-improves-first-three"] = {"passed": fixed_ok, "kappa": kap}
    dev = [float(np.max(np.abs(h.eigenvalues - e.eigenvalues) / np.abs(e.eigenvalues)))
           for h, e in zip(reports["hat"], reports["exact"])]
    hat_ok = max(dev) <= hat_tolerance
    out["checks"]["hat-vs-exact"] = {"passed": hat_ok, "max_rel_deviation": dev, "tolerance": hat_tolerance}
    out["passed"] = bool(required_ok and fixed_ok and hat_ok)
    return out


SCALING_OPERATORS = ("kron", "A", "PV0", "PV1", "PV2", "saddle")


def scaling_operator(name: str, mesh: int, degree: int, seed: int = 0):
    """``(operator, N)`` for the scaling study; ``kron`` is a single 3-factor product of equal sizes."""
    if name == "kron":
        n = mesh + degree - 1
        rng = np.random.default_rng(seed)
        op = KroneckerOp([rng.standard_normal((n, n)) for _ in range(3)], name="kron")
        return op, n ** 3
    system = assemble_stokes(mesh, degree)
    if name == "A":
        return system.A, system.n_V
    if name == "saddle":
        return system.saddle, system.size
    if name in ("PV0", "PV1", "PV2"):
        seq = pc.build_sequence_V(system, int(name[-1]), check=False)
        return seq[-1], system.n_V
    raise ConfigError(f"unknown operator {name!r}; choose from {SCALING_OPERATORS}")


def loglog_slope(n, y) -> float:
    return float(np.polyfit(np.log(np.asarray(n, float)), np.log(np.asarray(y, float)), 1)[0])


def run_scaling(meshes, degree: int = 4, operator: str = "kron", reps: int = 5, seed: int = 0) -> dict:
    meshes = list(meshes)
    if len(meshes) < 3:
        raise ConfigError("scaling needs at least three meshes")
    if reps < 5:
        raise ConfigError("scaling uses the median of at least five repetitions")
    rows = []
    with single_thread():
        for m in meshes:
            op, n = scaling_operator(operator, m, degree, seed)
            rows.append({"operator": operator, "mesh": m, "degree": degree, "N": n,
                         "time": time_apply(op, reps, seed), "flops": op.flops})
    ns = [r["N"] for r in rows]
    return {"rows": rows,
            "time_slope": loglog_slope(ns, [r["time"] for r in rows]),
            "flop_slope": loglog_slope(ns, [r["flops"] for r in rows])}


def model_ratio(n_ratio: float, tp_tf: float, tp_tf_ref: float = 0.0) -> float:
    """``(N/N_ref) (1 + T_p/T_f) / (1 + T_p,ref/T_f)``: predicted normalized solution time."""
    return n_ratio * (1.0 + tp_tf) / (1.0 + tp_tf_ref)


def contour_points(records: list[dict]) -> list[dict]:
    """Model ratio of each record against the level-0 record of the same mesh, degree and Schur mode."""
    def key(r):
        return (int(r["mesh"]), int(r["degree"]), r.get("schur", "hat"))

    refs = {key(r): r for r in records if int(r["level"]) == 0}
    out = []
    for r in records:
        ref = refs.get(key(r))
        if ref is None:
            raise ConfigError(f"no level-0 reference record for mesh={r['mesh']} degree={r['degree']}")
        n_ratio = float(r["n_iter"]) / float(ref["n_iter"])
        tp_tf = float(r["t_p"]) / float(r["t_f"])
        tp_tf_ref = float(ref["t_p"]) / float(ref["t_f"])
        out.append({"mesh": int(r["mesh"]), "degree": int(r["degree"]), "level": int(r["level"]),
                    "n_ratio": n_ratio, "tp_tf": tp_tf,
                    "model_ratio": model_ratio(n_ratio, tp_tf, tp_tf_ref),
                    "measured_ratio": float(r["t_sol_norm"])})
    return out


def contour_grid(tp_tf_ref: float = 0.0, n_points: int = 21, tp_tf_max: float = 10.0) -> list[dict]:
    """Model ratio on a grid of iteration ratios in (0, 1] and cost ratios in [0, tp_tf_max]."""
    grid = []
    for x in np.linspace(1.0 / n_points, 1.0, n_points):
        for y in np.linspace(0.0, tp_tf_max, n_points):
            grid.append({"n_ratio": x, "tp_tf": y, "model_ratio": model_ratio(x, y, tp_tf_ref)})
    return grid


# ---------------------------------------------------------------- CLI

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mesh", type=int)
    common.add_argument("--degree", type=int)
    common.add_argument("--updates", type=int)
    common.add_argument("--schur", choices=SCHUR_MODES)
    common.add_argument("--nu", type=float)
    common.add_argument("--cpen", type=float)
    common.add_argument("--tol", type=float)
    common.add_argument("--maxit", type=int)
    common.add_argument("--out")
    common.add_argument("--seed", type=int)
    common.add_argument("--repeat", type=int)
    common.add_argument("--allow-large", action="store_true", default=None)
    common.add_argument("--json-config", help="JSON file whose keys override the flags")

    ap = argparse.ArgumentParser(prog="hyperpower", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="MINRES solves for levels 0..k")
    sub.add_parser("spectra", parents=[common], help="dense spectra and theory checks (m=2)")
    sc = sub.add_parser("scaling", parents=[common], help="matvec timing versus problem size")
    sc.add_argument("--meshes", type=int, nargs="+", default=[16, 24, 32])
    sc.add_argument("--operator", choices=SCALING_OPERATORS, default="kron")
    sc.add_argument("--reps", type=int, default=5)
    co = sub.add_parser("contour", parents=[common], help="solution-time model at measured points")
    co.add_argument("--records", help="CSV written by 'solve'; runs a solve when omitted")
    co.add_argument("--grid", type=int, default=21, help="grid points per axis")
    return ap


def config_from_args(args, **defaults) -> RunConfig:
    base = {**asdict(RunConfig()), **defaults}
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            base[f.name] = v
    if args.json_config:
        with open(args.json_config) as fh:
            base.update(json.load(fh))
    return RunConfig.from_dict(base)


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "spectra":
            cfg = config_from_args(args, mesh=2, degree=4)
            res = run_spectra(cfg)
            _emit(json.dumps(res, indent=1) + "\n", cfg.out)
            for name, led in res["checks"].items():
                print(f"{'PASS' if led['passed'] else 'FAIL'} {name}", file=sys.stderr)
            return 0 if res["passed"] else 1
        cfg = config_from_args(args)
        if args.command == "solve":
            recs = run_solve(cfg)
            _emit(write_csv([r.row() for r in recs]), cfg.out)
            return 0 if all(r.converged for r in recs) else 1
        if args.command == "scaling":
            res = run_scaling(args.meshes, cfg.degree if args.degree else 4, args.operator, args.reps, cfg.seed)
            rows = [{**r, "time_slope": res["time_slope"], "flop_slope": res["flop_slope"],
                     "version": library_version(), "config": cfg.to_json()} for r in res["rows"]]
            _emit(write_csv(rows), cfg.out)
            return 0
        if args.command == "contour":
            if args.records:
                records = read_csv(args.records)
            else:
                records = [{k: _fmt(v) for k, v in r.row().items()} for r in run_solve(cfg)]
            pts = contour_points(records)
            ref = [p for p in pts if p["level"] == 0]
            grid = contour_grid(ref[0]["tp_tf"] if ref else 0.0, args.grid)
            rows = [{"kind": "point", **p} for p in pts]
            rows += [{"kind": "grid", "mesh": "", "degree": "", "level": "", **g, "measured_ratio": ""}
                     for g in grid]
            for r in rows:
                r["version"] = library_version()
                r["config"] = cfg.to_json()
            _emit(write_csv(rows), cfg.out)
            return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
