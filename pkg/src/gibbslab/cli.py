"""gibbslab command line.

Subcommands write CSV files into --out. Every CSV has a header row and ends
with a comment line ``# config_hash=... seed=...``.

CSV columns
  converge       tau, s2_distance, trace_distance, free_gap_s2, mc_max_dev_se
  growth         tau, particle_number, log_tau   (fit summary in the trailer)
  coeffs         m, tau, a_tau, a_classical, gap
  borel-toy      z, M, resummed, oracle, error, tail_bound, shift_residual, envelope
  oracle-suite   check, lhs, rhs, gap, ok
  counterterm    iter, residual, ratio  (+ counterterm_field.csv: x, V, v)
  pairings-dump  text file, one pairing per line

Exit codes: 0 ok, 2 invariant violation, 3 config error, 4 resource cap.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import itertools
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import borel, classicalmc, counterterm, expansion, fockoracle, pairing, spectral
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    InvariantViolation,
    ParameterError,
    ResourceCapError,
)

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_RESOURCE = 0, 2, 3, 4


def _floats(s: str) -> tuple:
    return tuple(float(x) for x in str(s).split(",") if x.strip())


def _ints(s: str) -> tuple:
    return tuple(int(x) for x in str(s).split(",") if x.strip())


@dataclass
class ExperimentConfig:
    # torus and one-body operator
    d: int = field(default=1, metadata={"doc": "dimension 1..3"})
    K: int = field(default=1, metadata={"doc": "mode cutoff |n|_inf <= K"})
    kappa: float = field(default=4.0, metadata={"doc": "mass term of h"})
    taus: tuple = field(default=(4.0, 16.0, 64.0), metadata={"doc": "tau ladder", "parse": _floats})
    eta: float = field(default=0.0, metadata={"doc": "regularization eta in [0, 1/4]"})
    # interaction: Fejer coefficients amp * prod (1 - |q_j|/(w_K+1))
    w_amp: float = field(default=0.5, metadata={"doc": "interaction amplitude (0 switches it off)"})
    w_K: int = field(default=1, metadata={"doc": "interaction bandwidth"})
    regime: str = field(default="positive", metadata={"doc": "positive (renormalized) or plain"})
    # expansion and resummation
    M: int = field(default=3, metadata={"doc": "number of series coefficients"})
    z: float = field(default=1.0, metadata={"doc": "coupling at which series are resummed"})
    quad_order: int = field(default=12, metadata={"doc": "Gauss-Legendre order per simplex axis"})
    observable: str = field(default="scalar", metadata={"doc": "scalar or mode:<index>"})
    # oracle
    cap: int = field(default=8, metadata={"doc": "Fock particle cap"})
    dim_cap: int = field(default=5000, metadata={"doc": "Fock dimension limit"})
    monomial_len: int = field(default=6, metadata={"doc": "oracle-suite: longest monomial"})
    oracle_tau: float = field(default=1.0, metadata={"doc": "oracle-suite: tau"})
    oracle_kappa: float = field(default=8.0, metadata={"doc": "oracle-suite: kappa (lambda/tau >= 8 keeps the cap harmless)"})
    # Monte Carlo
    samples: int = field(default=20000, metadata={"doc": "MC draws"})
    seed: int = field(default=0, metadata={"doc": "master seed"})
    # borel toy
    toy_M: int = field(default=12, metadata={"doc": "toy series length"})
    toy_z: tuple = field(default=(0.02, 0.05, 0.1), metadata={"doc": "toy couplings", "parse": _floats})
    # growth
    growth_K: int = field(default=230, metadata={"doc": "cutoff for particle-number sums"})
    # counterterm
    grid_N: int = field(default=31, metadata={"doc": "odd grid size per axis"})
    V_base: float = field(default=1.0, metadata={"doc": "V = V_base + V_amp cos(2 pi x_1)"})
    V_amp: float = field(default=0.5, metadata={"doc": "see V_base"})
    radius: float = field(default=0.5, metadata={"doc": "ball radius r in (0, 1)"})
    max_iter: int = field(default=30, metadata={"doc": "iteration cap"})
    ct_tau: float = field(default=100.0, metadata={"doc": "counterterm tau"})
    ct_kappa: float = field(default=10.0, metadata={"doc": "counterterm kappa"})
    # pairings dump
    pair_m: int = field(default=1, metadata={"doc": "pairings-dump m"})
    pair_p: int = field(default=1, metadata={"doc": "pairings-dump p"})
    pair_class: str = field(default="P", metadata={"doc": "P or N"})
    max_m: int = field(default=pairing.DEFAULT_MAX_M, metadata={"doc": "enumeration cap on m"})
    # shared
    tol: float = field(default=1e-8, metadata={"doc": "tolerance for checks"})
    threads: int = field(default=1, metadata={"doc": "worker threads"})

    def canonical(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            out.append(f"{f.name}={v!r}" if not isinstance(v, str) else f"{f.name}={v}")
        return "\n".join(out)

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def interaction(self) -> expansion.Interaction:
        if self.regime not in ("positive", "plain"):
            raise ConfigError(f"regime: expected positive or plain, got {self.regime!r}")
        if self.w_amp == 0:
            return expansion.Interaction.zero(self.d, self.regime)
        return expansion.Interaction.fejer(self.d, self.w_K, self.w_amp, self.regime)

    def basis(self) -> spectral.TorusBasis:
        return spectral.build_basis(self.d, self.K, self.kappa)


def parse_config(text: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    cfg = dataclasses.replace(base) if base else ExperimentConfig()
    known = {f.name: f for f in fields(cfg)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        f = known[key]
        conv = f.metadata.get("parse") or type(f.default)
        try:
            setattr(cfg, key, conv(val))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {val!r} ({exc})") from None
    return cfg


# --- output ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence], cfg: ExperimentConfig, extra: str = "") -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)] + [",".join(_fmt(v) for v in r) for r in rows]
    trailer = f"# config_hash={cfg.hash()} seed={cfg.seed}" + (f" {extra}" if extra else "")
    path.write_text("\n".join(lines + [trailer]) + "\n")


def _pmap(cfg: ExperimentConfig, fn: Callable, items: Sequence) -> list:
    if cfg.threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, items))


# --- experiments ------------------------------------------------------------------------


def _resummer(cfg: ExperimentConfig):
    return lambda s: borel.resum_at(s, cfg.z)


def cmd_converge(cfg: ExperimentConfig, out: Path) -> int:
    basis, w = cfg.basis(), cfg.interaction()
    base = expansion.ExpansionConfig(basis, math.inf, w, cfg.eta, quad_order=cfg.quad_order)
    res = _resummer(cfg)
    gcl = expansion.correlation_kernel(base, 1, cfg.M, res)
    mc_dev = float("nan")
    if cfg.samples and cfg.regime == "positive":
        ens = classicalmc.sample_ensemble(basis, cfg.samples, cfg.seed)
        gmc = classicalmc.classical_gamma(w, 1, ens, cfg.z)
        mc_dev = float(np.max(np.abs(gmc.matrix - gcl.matrix) / np.maximum(gmc.stderr, 1e-300)))

    def one(tau):
        gq = expansion.correlation_kernel(base.with_tau(tau), 1, cfg.M, res)
        free = spectral.hs_norm(spectral.green_quantum(basis, tau) - spectral.green_classical(basis))
        return (tau, gq.hs_distance(gcl), gq.trace_distance(gcl), free, mc_dev)

    rows = _pmap(cfg, one, list(cfg.taus))
    write_csv(out / "converge.csv", ["tau", "s2_distance", "trace_distance", "free_gap_s2", "mc_max_dev_se"], rows, cfg)
    s2 = [r[1] for r in rows]
    if any(b >= a for a, b in zip(s2, s2[1:])):
        raise InvariantViolation(f"S2 distances not strictly decreasing: {s2}")
    return EXIT_OK


def growth_fit(d: int, taus: Sequence[float], values: Sequence[float], basis: spectral.TorusBasis) -> dict:
    if d == 3:
        slope, _, r2 = spectral.fit_loglog(taus, values)
        return {"law": "power", "slope": slope, "r2": r2}
    if d == 2:
        slope, _, r2 = spectral.fit_linear(np.log(taus), values)
        return {"law": "log", "slope": slope, "r2": r2}
    limit = spectral.trace_inverse(basis)
    return {"law": "saturation", "limit": limit, "rel_gap": (values[-1] - limit) / limit}


def cmd_growth(cfg: ExperimentConfig, out: Path) -> int:
    basis = spectral.build_basis(cfg.d, cfg.growth_K, cfg.kappa)
    lam_max = spectral.FOUR_PI2 * cfg.growth_K**2
    if lam_max < 20 * max(cfg.taus):
        print(f"warning: cutoff eigenvalue {lam_max:.3g} below 20 tau_max", file=sys.stderr)
    vals = [spectral.particle_number(basis, t) for t in cfg.taus]
    fit = growth_fit(cfg.d, cfg.taus, vals, basis)
    rows = [(t, v, math.log(t)) for t, v in zip(cfg.taus, vals)]
    extra = " ".join(f"{k}={_fmt(v)}" for k, v in fit.items())
    write_csv(out / "growth.csv", ["tau", "particle_number", "log_tau"], rows, cfg, extra)
    return EXIT_OK


def _observable(cfg: ExperimentConfig) -> expansion.Observable:
    if cfg.observable == "scalar":
        return expansion.Observable.scalar()
    if cfg.observable.startswith("mode:"):
        k = int(cfg.observable.split(":", 1)[1])
        return expansion.Observable.mode_projector([k], [k])
    if cfg.observable.startswith("identity:"):
        return expansion.Observable.identity(int(cfg.observable.split(":", 1)[1]))
    raise ConfigError(f"observable: unknown kind {cfg.observable!r}")


def cmd_coeffs(cfg: ExperimentConfig, out: Path) -> int:
    basis, w, obs = cfg.basis(), cfg.interaction(), _observable(cfg)
    base = expansion.ExpansionConfig(basis, math.inf, w, cfg.eta, quad_order=cfg.quad_order)
    n_pair = len(expansion.pairings_for(base, cfg.M - 1, obs.p)) if cfg.M > 1 else 0
    print(f"pairings at m={cfg.M - 1}: {n_pair}", file=sys.stderr)
    a_cl = [expansion.coefficient(base, m, obs) for m in range(cfg.M)]

    def one(tau):
        q = base.with_tau(tau)
        return [(m, tau, expansion.coefficient(q, m, obs), a_cl[m]) for m in range(cfg.M)]

    rows = [r + (abs(r[2] - r[3]),) for block in _pmap(cfg, one, list(cfg.taus)) for r in block]
    write_csv(out / "coeffs.csv", ["m", "tau", "a_tau", "a_classical", "gap"], rows, cfg)
    return EXIT_OK


def cmd_borel_toy(cfg: ExperimentConfig, out: Path) -> int:
    coeffs = [float(c) for c in borel.toy_coefficients(cfg.toy_M)]
    rows = []
    for z in cfg.toy_z:
        r = borel.resum(coeffs, z)
        exact = borel.toy_oracle(z)
        rows.append((z, cfg.toy_M, float(r), exact, float(r) - exact, r.tail_bound, r.shift_residual,
                     borel.toy_envelope(cfg.toy_M, z)))
    write_csv(out / "borel_toy.csv",
              ["z", "M", "resummed", "oracle", "error", "tail_bound", "shift_residual", "envelope"], rows, cfg)
    return EXIT_OK


def oracle_suite_rows(cfg: ExperimentConfig) -> list:
    basis = spectral.build_basis(cfg.d, cfg.K, cfg.oracle_kappa)
    fs = fockoracle.FockSpace(basis, cfg.cap, cfg.dim_cap)
    tau = cfg.oracle_tau
    rows = []
    letters = [(k, s) for k in range(len(basis)) for s in (1, -1)]
    for n in range(2, cfg.monomial_len + 1, 2):
        for mono in itertools.product(letters, repeat=n):
            # only gauge-balanced words can be nonzero; unbalanced ones are
            # checked separately below on a sample
            if any(sum(s for k2, s in mono if k2 == k) for k in range(len(basis))):
                continue
            chk = fockoracle.wick_check(fs, tau, mono)
            scale = max(abs(chk.rhs), 1e-300)
            rows.append(("wick " + " ".join(f"{k}{'+' if s > 0 else '-'}" for k, s in mono), chk.lhs, chk.rhs,
                         chk.gap / scale, chk.gap <= cfg.tol * scale))
    w = cfg.interaction()
    q = expansion.ExpansionConfig(basis, tau, w, 0.0, quad_order=cfg.quad_order)
    ident = fockoracle.FockOperator(np.eye(fs.dim), "I")
    for m, t in ((1, (0.4,)), (2, (0.7, 0.3))):
        lhs = expansion.f_value(q, m, expansion.Observable.scalar(), t)
        rhs = 2**m * fockoracle.duhamel_time_product(fs, tau, m, t, ident, w)
        gap = abs(lhs - rhs) / max(abs(rhs), 1e-300)
        rows.append((f"duhamel m={m}", lhs, rhs, gap, gap <= 1e-7))
    return rows


def cmd_oracle_suite(cfg: ExperimentConfig, out: Path) -> int:
    rows = oracle_suite_rows(cfg)
    write_csv(out / "oracle_suite.csv", ["check", "lhs", "rhs", "gap", "ok"], rows, cfg)
    bad = [r[0] for r in rows if not r[4]]
    if bad:
        raise InvariantViolation(f"{len(bad)} oracle checks failed, first: {bad[0]}")
    return EXIT_OK


def cmd_counterterm(cfg: ExperimentConfig, out: Path) -> int:
    V = lambda x: cfg.V_base + cfg.V_amp * np.cos(2 * np.pi * x[:, 0])  # noqa: E731
    grid = counterterm.PotentialGrid.from_function(cfg.d, cfg.grid_N, V, cfg.ct_kappa, cfg.ct_tau)
    w = expansion.Interaction.fejer(cfg.d, cfg.w_K, cfg.w_amp) if cfg.w_amp else expansion.Interaction.zero(cfg.d)
    rep = counterterm.solve_fixed_point(grid, w, cfg.radius, cfg.max_iter, tol=cfg.tol)
    rows = [(i, r, rep.ratios[i - 1] if i >= 1 else float("nan")) for i, r in enumerate(rep.residuals)]
    write_csv(out / "counterterm.csv", ["iter", "residual", "ratio"], rows, cfg,
              f"converged={int(rep.converged)}")
    pts = grid.points
    write_csv(out / "counterterm_field.csv", ["x", "V", "v"],
              [(tuple(p) if cfg.d > 1 else p[0], V0, v) for p, V0, v in zip(pts, grid.values, rep.v)], cfg)
    if not rep.converged:
        raise InvariantViolation(f"fixed point not reached: {rep.reason}")
    return EXIT_OK


def cmd_pairings_dump(cfg: ExperimentConfig, out: Path) -> int:
    ordering = "renormalized" if cfg.pair_class == "P" else "lexicographic"
    if cfg.pair_class not in ("P", "N"):
        raise ConfigError("pair_class must be P or N")
    if cfg.pair_m > cfg.max_m:
        raise ResourceCapError(f"m = {cfg.pair_m} exceeds the enumeration cap {cfg.max_m}")
    n = pairing.count_pairings(cfg.pair_m, cfg.pair_p, cfg.pair_class, ordering)
    print(f"{n} pairings", file=sys.stderr)
    vs = pairing.build_vertex_set(cfg.pair_m, cfg.pair_p, ordering)
    pis = pairing.enumerate_pairings(vs, cfg.pair_class, cfg.max_m)
    out.mkdir(parents=True, exist_ok=True)
    (out / "pairings.txt").write_text(
        pairing.dump_pairings(pis) + f"# config_hash={cfg.hash()} seed={cfg.seed} count={n}\n"
    )
    return EXIT_OK


COMMANDS = {
    "converge": cmd_converge,
    "growth": cmd_growth,
    "coeffs": cmd_coeffs,
    "borel-toy": cmd_borel_toy,
    "oracle-suite": cmd_oracle_suite,
    "counterterm": cmd_counterterm,
    "pairings-dump": cmd_pairings_dump,
}


def _config_help() -> str:
    return "\n".join(
        f"  {f.name} = {ExperimentConfig.__dataclass_fields__[f.name].default!r}  {f.metadata.get('doc', '')}"
        for f in fields(ExperimentConfig)
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gibbslab",
        description=__doc__,
        epilog="config keys (flat key=value file):\n" + _config_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="key=value file")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--tol", type=float)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig()
        if args.config:
            try:
                text = args.config.read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            cfg = parse_config(text)
        for key in ("seed", "threads", "tol"):
            if getattr(args, key) is not None:
                setattr(cfg, key, getattr(args, key))
        if cfg.seed < 0 or cfg.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return COMMANDS[args.command](cfg, args.out)
    except (InvariantViolation, ConvergenceError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, ParameterError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
