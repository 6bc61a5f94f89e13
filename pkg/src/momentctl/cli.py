"""Command-line runner: ``momentctl <subcommand> --config FILE --out DIR``.

Exit codes: 0 success, 2 contract error, 3 conditioning/numeric error,
4 loss of approximate controllability, 64 usage error.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, kernels
from .biortho import (PrimalFamily, WeightSpec, block_moment_solve, check_tPN, estimate_spectral_constant,
                      restrict_biortho)
from .classes import SpectralSequence, group_spectrum, merge_sequences, verify_class
from .config import load_config
from .control import (_spectral_gaps, coupled_T0_boundary, coupled_T0_internal, dolecki_T0,
                      heat_lr_cost_sweep, synthesize_control)
from .errors import ContractError, MomentError
from .io import write_csv, write_json
from .sim import simulate_forward
from .spectral1d import verify_asymptotics
from .systems import _coupled_sequences, build_system

EXIT_USAGE = 64
SUBCOMMANDS = ("spectrum", "classify", "group", "biortho", "tpn-check", "spectral-const",
               "t0", "control", "simulate", "lr-cost")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="INI configuration file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS,
                        help="worker threads for sweeps")
    common.add_argument("--precision", choices=("double", "extended"), default=argparse.SUPPRESS)
    p = _Parser(prog="momentctl", description="Moment-method null-control experiments.",
                parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=_HELP[name])
    return p


_HELP = {
    "spectrum": "1-D spectra (k, nu1, nu2, xi)",
    "classify": "class membership report of the 1-D sequence",
    "group": "grouping of the 1-D sequence",
    "biortho": "restricted biorthogonal family",
    "tpn-check": "random sweep of the weighted inequality",
    "spectral-const": "spectral-inequality constants on the window",
    "t0": "minimal-time surrogate",
    "control": "synthesize a control",
    "simulate": "synthesize a control and simulate the final state",
    "lr-cost": "heat control-cost sweep",
}


# --------------------------------------------------------------------------
# helpers

class Run:
    def __init__(self, cfg):
        self.cfg = cfg
        self.h = cfg.hash
        os.makedirs(cfg.out, exist_ok=True)
        self.prov = {"config_hash": self.h, "config_source": cfg.source, "version": __version__,
                     "kernel_backend": kernels.BACKEND, "precision": cfg.precision,
                     "seed": cfg.seed}

    def path(self, name):
        return os.path.join(self.cfg.out, name)

    def csv(self, name, header, rows):
        return write_csv(self.path(name), header, rows, self.h)

    def json(self, name, payload, **extra):
        return write_json(self.path(name), payload, self.h, {**self.prov, **extra})

    def system(self, N_max):
        return build_system(self.cfg.system, N_max, **self.cfg.system_kwargs())


def _y0(spec, seed):
    spec = spec.strip()
    if spec == "inverse_lambda":
        return lambda md: 1.0 / md.lam
    if spec == "ones":
        return lambda md: 1.0
    if spec == "zero":
        return lambda md: 0.0
    if spec.startswith("unit:"):
        key = tuple(int(x) for x in spec[5:].split(","))
        if len(key) != 3:
            raise ContractError("unit initial data needs m,k,j")
        return {key: 1.0}
    if spec == "random":
        rng = np.random.default_rng(seed)
        cache = {}

        def f(md):
            if md.key not in cache:
                cache[md.key] = float(rng.standard_normal()) / md.lam
            return cache[md.key]
        return f
    raise ContractError(f"unknown y0 spec {spec!r}")


def _sequence(cfg):
    """The 1-D sequence of the configured system and its shift."""
    K = cfg.K
    if cfg.system in ("dolecki", "heat"):
        k = np.arange(1, K + 1, dtype=float)
        return SpectralSequence(k * k, labels=[(1, i) for i in range(1, K + 1)]), 0.0
    _, _, _, nu1, nu2, shift = _coupled_sequences(cfg.potential, K, "l2", cfg.grid_size)
    s1 = SpectralSequence(nu1, labels=[(1, i) for i in range(1, K + 1)])
    s2 = SpectralSequence(nu2, labels=[(2, i) for i in range(1, K + 1)])
    return merge_sequences(s1, s2), shift


# --------------------------------------------------------------------------
# subcommands

def cmd_spectrum(run):
    cfg = run.cfg
    q, _, _, nu1, nu2, shift = _coupled_sequences(cfg.potential, cfg.K, "l2", cfg.grid_size)
    # same-grid differences cancel the k^6 h^4 error left by extrapolation
    gaps, _ = _spectral_gaps(q, cfg.K, cfg.grid_size)
    xi = gaps - q.mean
    rep = verify_asymptotics(nu1, nu1 + gaps, q.mean) if cfg.K >= 5 else None
    run.csv("spectrum.csv", ["k", "nu1", "nu2", "xi", "xi_direct"],
            [(i + 1, nu1[i], nu2[i], xi[i], nu2[i] - nu1[i] - q.mean) for i in range(cfg.K)])
    run.json("spectrum.json", {"potential": q.name, "qbar": q.mean, "K": cfg.K,
                               "eventually_decreasing": rep.eventually_decreasing if rep else None,
                               "decreasing_from": rep.decreasing_from if rep else None,
                               "tail_l2_head": rep.tail_l2[:10] if rep else None}, shift=shift)
    print(f"spectrum: {cfg.K} eigenvalues, qbar={q.mean:.6g}, shift={shift:.6g}")


def cmd_classify(run):
    cfg = run.cfg
    seq, shift = _sequence(cfg)
    p = 1 if cfg.system in ("dolecki", "heat") else cfg.class_p
    rep = verify_class(seq, p, cfg.class_rho, cfg.class_theta)
    run.json("classify.json", rep.to_dict(), shift=shift)
    print(f"classify: H3 {'ok' if rep.h3_ok else 'FAIL'} (max count {rep.h3_max_count}), "
          f"fitted kappa {rep.kappa_fitted:.4g}")


def cmd_group(run):
    cfg = run.cfg
    seq, shift = _sequence(cfg)
    p = 1 if cfg.system in ("dolecki", "heat") else cfg.class_p
    g = group_spectrum(seq, p, cfg.class_rho)
    run.json("groups.json", g.to_dict(), shift=shift)
    print(f"group: {len(g.groups)} groups, gap constant {g.gap_constant:.4g}")


def cmd_biortho(run):
    cfg = run.cfg
    sys_ = run.system(cfg.N)
    modes = sys_.modes(cfg.N)
    fam = restrict_biortho(PrimalFamily(modes, cfg.T, sys_.omega), cfg.precision, cfg.guard,
                           cfg.dps, cfg.tol_biortho)
    minv = fam.diagnostics["Minv_diag"]
    run.csv("biortho_norms.csv", ["m", "k", "j", "lambda", "norm2", "Minv_jj"],
            [(md.m, md.k, md.j, md.lam, n2, mi) for md, n2, mi in zip(fam.modes, fam.norms2, minv)])
    run.json("biortho.json", fam.to_dict(), shift=sys_.shift,
             fitted={"envelope_C": fam.diagnostics["envelope_C"]})
    print(f"biortho: {len(fam)} modes, residual {fam.residual:.3g}, cond {fam.cond:.3g}")
    if cfg.eps > 0 and sys_.grouped is not None:
        # block moment problem of transverse mode 1, controls vanishing on (0, eps)
        f = _y0(cfg.y0, cfg.seed)
        if isinstance(f, dict):
            f = (lambda d: lambda md: d.get(md.key, 0.0))(f)
        blk = block_moment_solve(1, sys_.grouped, f, cfg.eps, cfg.T,
                                 transverse=sys_.transverse, K_max=cfg.K_max or None,
                                 precision=cfg.precision, guard=cfg.guard, dps=cfg.dps,
                                 tol=cfg.tol_moment)
        run.json("block_moment.json", {"eps": cfg.eps, "T": cfg.T, "groups": blk.groups,
                                       "norms": blk.norms, "envelope_K": blk.envelope_K,
                                       "residual": blk.residual, "cond": blk.cond})
        print(f"block moments: {len(blk.groups)} groups, residual {blk.residual:.3g}")


def cmd_tpn(run):
    cfg = run.cfg
    Nmax = max(cfg.tpn_N)
    sys_ = run.system(Nmax)
    beta = cfg.tpn_beta
    if beta <= 0:
        beta = estimate_spectral_constant(sys_.omega, range(1, 9), precision="extended").slope
    w = WeightSpec(cfg.tpn_alpha, beta, sys_.modes(Nmax).b, sys_.omega)
    rng = np.random.default_rng(cfg.seed)
    Ns = rng.choice(np.array(cfg.tpn_N), size=cfg.tpn_samples)
    draws = {}
    for i, N in enumerate(Ns):
        n = len(sys_.modes(int(N)))
        draws.setdefault(int(N), []).append((i, rng.standard_normal(n)))

    def job(N):
        idx = [i for i, _ in draws[N]]
        X = np.array([x for _, x in draws[N]])
        r = check_tPN(X, sys_.modes(N), w, cfg.T)
        return [(i, N, a, b, c) for i, a, b, c in zip(idx, r.lhs, r.rhs, r.ratio)]

    with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
        parts = list(ex.map(job, sorted(draws)))
    rows = sorted((r for part in parts for r in part), key=lambda r: r[0])
    ratios = np.array([r[4] for r in rows])
    ok = bool(np.all([r[2] <= 6.0 * r[3] for r in rows]))
    run.csv("tpn.csv", ["sample", "N", "lhs", "rhs", "ratio"], rows)
    run.json("tpn.json", {"alpha": cfg.tpn_alpha, "beta": beta, "b": w.b, "T": cfg.T,
                          "samples": cfg.tpn_samples, "max_ratio": float(ratios.max()),
                          "bound": 6.0, "passed": ok}, fitted={"beta": beta})
    print(f"tpn-check: max ratio {ratios.max():.4g} over {len(rows)} samples -> "
          f"{'pass' if ok else 'FAIL'}")


def cmd_spectral_const(run):
    cfg = run.cfg
    rep = estimate_spectral_constant(cfg.omega, cfg.const_N, cfg.dim, cfg.precision,
                                     cfg.guard, cfg.dps)
    run.csv("spectral_const.csv", ["N", "n_modes", "constant", "log_over_N"],
            list(zip(rep.N, rep.n_modes, rep.constants, rep.log_over_N)))
    run.json("spectral_const.json", rep.to_dict(), fitted={"beta_hat": rep.slope, "r2": rep.r2})
    print(f"spectral-const: beta_hat {rep.slope:.5g} (R^2 {rep.r2:.4f})")


def cmd_t0(run):
    cfg = run.cfg
    if cfg.system == "dolecki":
        est = dolecki_T0(cfg.x0, cfg.K)
    elif cfg.system == "boundary":
        est = coupled_T0_boundary(cfg.potential, cfg.K, cfg.grid_size)
    elif cfg.system == "internal":
        est = coupled_T0_internal(cfg.potential, *cfg.window, cfg.K, cfg.grid_size)
    else:
        raise ContractError("t0 is defined for the dolecki, boundary and internal systems")
    run.csv("t0.csv", ["k", "numerator", "denominator", "ratio", "tail_max"], est.rows())
    run.json("t0.json", est.to_dict(), shift=est.meta.get("shift", 0.0))
    verdict = est.trend()
    print(f"t0: last-decade max {est.last_decade_max:.4g}, trend {verdict}")
    if est.last_decade_max > cfg.T:
        print(f"warning: surrogate exceeds T={cfg.T}; null controllability may fail",
              file=sys.stderr)


def _control(run, sys_):
    cfg = run.cfg
    return synthesize_control(sys_, _y0(cfg.y0, cfg.seed), cfg.T, cfg.N, None, cfg.precision,
                              cfg.guard, cfg.dps, cfg.tol_moment)


def cmd_control(run):
    cfg = run.cfg
    sys_ = run.system(cfg.N)
    ctrl = _control(run, sys_)
    run.json("control.json", ctrl.to_dict(), shift=sys_.shift)
    run.csv("control.csv", ["m", "k", "j", "lambda", "y0", "dual_coeff", "primal_coeff"],
            [(md.m, md.k, md.j, md.lam, y, c, p)
             for md, y, c, p in zip(ctrl.modes, ctrl.y0, ctrl.coeffs, ctrl.primal)])
    print(f"control: {len(ctrl.modes)} modes, moment residual {ctrl.moment_residual:.3g}, "
          f"||v||^2 {ctrl.norm2:.6g}")


def cmd_simulate(run):
    cfg = run.cfg
    sys_ = run.system(cfg.n_sim)
    ctrl = _control(run, sys_)
    y0 = _y0(cfg.y0, cfg.seed)
    res = simulate_forward(sys_, y0, ctrl, cfg.T, cfg.n_sim)
    run.csv("simulate.csv", ["m", "k", "j", "lambda", "final_coeff", "retained"], res.rows())
    summary = res.summary()
    summary["moment_residual"] = ctrl.moment_residual
    run.json("simulate.json", summary, shift=sys_.shift)
    print(f"simulate: retained residual {res.retained_residual:.3g}, tail norm "
          f"{res.tail_norm:.4g}, H^-1 norm {res.hminus1:.4g}")


def cmd_lr_cost(run):
    cfg = run.cfg
    beta = cfg.tpn_beta
    if beta <= 0:
        beta = estimate_spectral_constant(cfg.omega, range(1, int(cfg.N) + 1), cfg.dim,
                                          "extended", cfg.guard, cfg.dps).slope

    def one(T):
        return heat_lr_cost_sweep(cfg.omega, [T], cfg.N, beta, cfg.dim, cfg.precision,
                                  cfg.guard, cfg.dps)

    with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
        sweeps = list(ex.map(one, cfg.T_list))
    rows = [s.rows[0] for s in sweeps]
    beta_used = sweeps[0].beta
    run.csv("lr_cost.csv", ["T", "K", "TlnK", "alpha0", "eps0", "eps0_over_T"],
            [(r["T"], r.get("K"), r.get("TlnK"), r.get("alpha0"), r.get("eps0"),
              r.get("eps0_over_T")) for r in rows])
    run.json("lr_cost.json", {"omega": cfg.omega, "N": cfg.N, "rows": rows},
             fitted={"beta": beta_used})
    print(f"lr-cost: {len(rows)} horizons, beta {beta_used:.5g}")


COMMANDS = {"spectrum": cmd_spectrum, "classify": cmd_classify, "group": cmd_group,
            "biortho": cmd_biortho, "tpn-check": cmd_tpn, "spectral-const": cmd_spectral_const,
            "t0": cmd_t0, "control": cmd_control, "simulate": cmd_simulate,
            "lr-cost": cmd_lr_cost}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        sys.stderr.write("momentctl: error: a subcommand is required\n")
        return EXIT_USAGE
    try:
        overrides = {"out": getattr(args, "out", None), "workers": getattr(args, "workers", None),
                     "precision": getattr(args, "precision", None)}
        cfg = load_config(getattr(args, "config", None), overrides)
        run = Run(cfg)
        COMMANDS[args.command](run)
    except MomentError as exc:
        sys.stderr.write(f"momentctl {args.command}: {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
