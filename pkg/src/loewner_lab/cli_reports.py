"""Batch experiment front end: JSON configs in, canonical JSON/CSV reports out.

Every run is driven by an explicit 64-bit seed and the emitted report is
byte-reproducible: floats are serialized with 17 significant digits, keys are
sorted, and volatile data (wall time) goes to the console only.

Exit codes: 0 pass, 1 bound violation / certificate failure, 2 usage error,
3 numerical instability.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import ball_geometry as bg
from . import carath
from . import disc_functions as df
from . import extremal_lab as el
from . import loewner_flow as lf
from .errors import LoewnerLabError, NumericalInstabilityError

EXPERIMENTS = (
    "d1_table", "a0_table", "certify", "flow_check", "scan", "gprime",
    "unbounded_growth", "shear_commute",
)

_DEFAULT_ALPHAS = [round(0.05 * k, 2) for k in range(1, 20)]


class UsageError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    g_spec: dict = field(default_factory=lambda: {"family": "moebius"})
    domain_spec: dict = field(default_factory=lambda: {"kind": "polydisc", "n": 2})
    i: int = 1
    j: int = 2
    N: int = 100
    pieces: int = 3
    seed: Optional[int] = None
    eps: float = 1e-9
    tolerance: float = 1e-6
    alphas: Optional[list] = None
    sign: int = 1
    coefficient_scale: float = 1.0
    out: Optional[str] = None

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise UsageError(f"experiment: unknown value {self.experiment!r}")
        if self.seed is None:
            raise UsageError("seed: required for reproducibility")
        if not 0 <= int(self.seed) < 2**64:
            raise UsageError("seed: must fit in 64 bits")
        try:
            if self.experiment in ("d1_table", "a0_table"):
                # tables sweep an alpha grid, so only a family name is needed
                family = self.g_spec.get("family", "moebius")
                if family not in df.CATALOG_FAMILIES:
                    raise UsageError(f"g_spec: family {family!r} is not in the catalog")
                g = None
            else:
                g = df.from_json(self.g_spec)
        except (KeyError, LoewnerLabError) as exc:
            raise UsageError(f"g_spec: {exc}") from exc
        try:
            dom = bg.from_json(self.domain_spec)
        except (KeyError, LoewnerLabError) as exc:
            raise UsageError(f"domain_spec: {exc}") from exc
        if self.experiment in ("certify", "scan", "shear_commute", "flow_check"):
            try:
                carath._check_pair(dom, self.i, self.j)
            except LoewnerLabError as exc:
                raise UsageError(f"indices: {exc}") from exc
        if self.N < 0:
            raise UsageError("N: must be nonnegative")
        if self.pieces < 1:
            raise UsageError("pieces: must be positive")
        return g, dom


@dataclass
class ReportEnvelope:
    config: dict
    version: str
    payload: dict
    passed: bool
    summary: str
    instability: bool = False
    wall_time_s: float = 0.0  # console only; excluded from the report file


# ---------------------------------------------------------------------------
# canonical JSON


def _canonical(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, (np.complexfloating, complex)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return [_canonical(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _dump(obj, pieces: list):
    if obj is None:
        pieces.append("null")
    elif obj is True:
        pieces.append("true")
    elif obj is False:
        pieces.append("false")
    elif isinstance(obj, int):
        pieces.append(repr(obj))
    elif isinstance(obj, float):
        if math.isnan(obj):
            pieces.append("NaN")
        elif math.isinf(obj):
            pieces.append("Infinity" if obj > 0 else "-Infinity")
        else:
            pieces.append(format(obj, ".17g"))
    elif isinstance(obj, str):
        pieces.append(json.dumps(obj))
    elif isinstance(obj, dict):
        pieces.append("{")
        for k, key in enumerate(sorted(obj)):
            if k:
                pieces.append(", ")
            pieces.append(json.dumps(key) + ": ")
            _dump(obj[key], pieces)
        pieces.append("}")
    elif isinstance(obj, list):
        pieces.append("[")
        for k, val in enumerate(obj):
            if k:
                pieces.append(", ")
            _dump(val, pieces)
        pieces.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps_canonical(obj) -> str:
    pieces: list = []
    _dump(_canonical(obj), pieces)
    return "".join(pieces) + "\n"


def parse_report(path) -> dict:
    with open(path, "r") as handle:
        return json.load(handle)


# ---------------------------------------------------------------------------
# experiment dispatch


def _alpha_grid(config: ExperimentConfig):
    return list(config.alphas) if config.alphas else list(_DEFAULT_ALPHAS)


def _family_grid(config: ExperimentConfig):
    family = config.g_spec.get("family", "moebius")
    if family == df.MOEBIUS:
        return [(None, df.moebius())]
    return [(a, df.DiscFunction(family, a)) for a in _alpha_grid(config)]


def _run_d1_table(config, g, dom, rng):
    rows = []
    worst = 0.0
    for alpha, gf in _family_grid(config):
        closed = df.d1(gf)
        numeric = df.d1_grid(gf)
        gap = abs(closed - numeric)
        worst = max(worst, gap)
        rows.append({"alpha": alpha, "closed_form": closed, "numeric": numeric, "gap": gap})
    passed = worst <= 1e-9
    return {"rows": rows, "max_gap": worst}, passed, f"max |closed - numeric| = {worst:.3e}"


def _run_a0_table(config, g, dom, rng):
    rows = []
    worst = -np.inf
    for alpha, gf in _family_grid(config):
        a0v = df.a0(gf)
        d1v = df.d1(gf)
        rows.append({"alpha": alpha, "a0": a0v, "d1": d1v, "slack": a0v - d1v})
        worst = max(worst, d1v - a0v)
    passed = worst <= 1e-9
    return {"rows": rows, "max_deficit": worst}, passed, f"max d1 - a0 = {worst:.3e}"


def _run_certify(config, g, dom, rng):
    h = carath.canonical_field(g, dom, config.i, config.j, config.sign)
    if config.coefficient_scale != 1.0:
        exps = tuple(2 if k == config.j - 1 else 0 for k in range(dom.n))
        h.terms[(config.i, exps)] *= config.coefficient_scale
        h.label += f"*scale{config.coefficient_scale:g}"
    cert = carath.certify_Mg(h, g, dom, config.N, eps=config.eps, rng=rng)
    return ({"map": h.describe(), "certificate": cert.to_json()}, cert.passed,
            f"{h.describe()}: worst margin {cert.worst_margin:.3e}")


def _run_flow_check(config, g, dom, rng):
    c = df.d1(g) * dom.shear_factor
    h = carath.canonical_field(g, dom, config.i, config.j, +1)
    schedule = lf.autonomous_field(h, g, dom)
    Z = np.stack([bg.sample_sphere(dom, rng) for _ in range(config.N)])
    Z *= rng.uniform(0.1, 0.9, config.N)[:, None]
    ii, jj = config.i - 1, config.j - 1
    worst_flow = 0.0
    for t in (0.5, 2.0, 10.0):
        got = lf.flow(schedule, Z, 0.0, t).endpoint
        expect = np.exp(-t) * Z.copy()
        expect[:, ii] += c * Z[:, jj] ** 2 * (np.exp(-2 * t) - np.exp(-t))
        worst_flow = max(worst_flow, float(np.max(np.abs(got - expect))))
    mid = lf.flow(schedule, Z, 0.0, 1.0).endpoint
    semigroup = float(np.max(np.abs(
        lf.flow(schedule, mid, 1.0, 3.0).endpoint - lf.flow(schedule, Z, 0.0, 3.0).endpoint)))
    Zs = Z * (0.7 / np.maximum(np.asarray(bg.norm(dom, Z)), 1e-12))[:, None] * 0.999
    limit = lf.parametric_map(schedule, Zs, tol=1e-8).endpoint
    expect = Zs.copy()
    expect[:, ii] -= c * Zs[:, jj] ** 2
    worst_param = float(np.max(np.abs(limit - expect)))
    payload = {"flow_residual": worst_flow, "semigroup_residual": semigroup,
               "parametric_residual": worst_param}
    passed = worst_flow < 1e-8 and semigroup < 1e-8 and worst_param < 1e-6
    return payload, passed, (f"flow {worst_flow:.2e}, semigroup {semigroup:.2e}, "
                             f"parametric {worst_param:.2e}")


def _run_scan(config, g, dom, rng):
    report = el.scan_support(g, dom, config.i, config.j, config.N, rng,
                             tolerance=config.tolerance, pieces=config.pieces)
    payload = report.to_json()
    payload["rows"] = [{
        "alpha": config.g_spec.get("alpha"),
        "bound": report.theoretical_bound,
        "empirical_max": report.empirical_max,
        "attained_by": report.attaining_map_id,
    }]
    return payload, report.passed, (
        f"bound {report.theoretical_bound:.9g}, empirical max {report.empirical_max:.9g}")


def _run_gprime(config, g, dom, rng):
    report = el.verify_gprime_bounds(g, dom, config.N, rng, tolerance=config.tolerance,
                                     pieces=config.pieces)
    return report.to_json(), report.passed, (
        f"bound {report.theoretical_bound:.9g}, empirical max {report.empirical_max:.9g}")


def _run_unbounded_growth(config, g, dom, rng):
    zeta = rng.uniform(0.05, 0.95, 64) * np.exp(2j * np.pi * rng.random(64))
    b = lf.koebe_transform(g, zeta, 128)
    bp = (lf.koebe_transform(g, zeta + 1e-5, 256) - lf.koebe_transform(g, zeta - 1e-5, 256)) / 2e-5
    ode_residual = float(np.max(np.abs(zeta * bp / b - 1.0 / df._eval_raw(g, zeta))))
    fmap = lf.unbounded_support_map(g, dom)
    C = lf.growth_constant(g)
    rows, growth_ok = [], True
    b_half = lf.koebe_transform(g, 0.5).real
    for rho in (0.9, 0.99, 0.999):
        z = np.zeros((1, dom.n), dtype=complex)
        z[0, 0] = rho
        grown = float(np.asarray(bg.norm(dom, fmap.values(z)))[0])
        floor = b_half * (2.0 * (1.0 - rho)) ** (-C)
        rows.append({"rho": rho, "norm": grown, "floor": floor})
        growth_ok = growth_ok and grown >= floor * (1.0 - 1e-9)
    diag = carath.second_coeff(fmap, 1, 1, carath.PURE)
    diag_gap = abs(diag - (-df.g_prime0(g)))
    payload = {"ode_residual": ode_residual, "growth_constant": C, "rows": rows,
               "diagonal_coefficient": diag, "diagonal_gap": diag_gap}
    passed = ode_residual < 1e-6 and growth_ok and diag_gap < 1e-6
    return payload, passed, (f"ode residual {ode_residual:.2e}, "
                             f"diag gap {diag_gap:.2e}, C = {C:.6g}")


def _run_shear_commute(config, g, dom, rng):
    worst = 0.0
    rows = []
    for k in range(config.N):
        maps = [carath.random_Mg_member(g, dom, rng, int(rng.integers(1, 4)))
                for _ in range(config.pieces)]
        schedule = lf.make_field(maps, g, dom, rng=rng)
        residual = el.verify_shear_commutes(g, dom, schedule, i=config.i, j=config.j)
        rows.append({"field": k, "residual": residual})
        worst = max(worst, residual)
    passed = worst < config.tolerance if config.tolerance < 1e-3 else worst < 1e-5
    return ({"rows": rows, "max_residual": worst}, passed,
            f"max commutation residual {worst:.3e}")


_RUNNERS = {
    "d1_table": _run_d1_table,
    "a0_table": _run_a0_table,
    "certify": _run_certify,
    "flow_check": _run_flow_check,
    "scan": _run_scan,
    "gprime": _run_gprime,
    "unbounded_growth": _run_unbounded_growth,
    "shear_commute": _run_shear_commute,
}


def run_experiment(config: ExperimentConfig) -> ReportEnvelope:
    """Dispatch one experiment; numerical-instability errors become a failed
    envelope instead of an exception."""
    g, dom = config.validate()
    rng = np.random.default_rng(int(config.seed))
    start = time.perf_counter()
    try:
        payload, passed, summary = _RUNNERS[config.experiment](config, g, dom, rng)
        instability = False
    except NumericalInstabilityError as exc:
        payload, passed, summary = {"error": str(exc)}, False, f"numerical instability: {exc}"
        instability = True
    wall = time.perf_counter() - start
    return ReportEnvelope(
        config=_canonical(asdict(config)),
        version=__version__,
        payload=_canonical(payload),
        passed=bool(passed),
        summary=("PASS: " if passed else "FAIL: ") + summary,
        instability=instability,
        wall_time_s=wall,
    )


def emit_report(env: ReportEnvelope, path) -> None:
    """Write the canonical JSON report (and a CSV companion for tabular
    payloads).  Wall time stays off the file so reruns are byte-identical."""
    path = Path(path)
    body = {
        "config": env.config,
        "version": env.version,
        "payload": env.payload,
        "pass": env.passed,
        "summary": env.summary,
        "instability": env.instability,
    }
    path.write_text(dumps_canonical(body))
    rows = env.payload.get("rows") if isinstance(env.payload, dict) else None
    if rows:
        csv_path = path.with_suffix(".csv")
        with open(csv_path, "w", newline="") as handle:
            writer = csv.writer(handle)
            keys = list(rows[0])
            writer.writerow(keys)
            for row in rows:
                writer.writerow([_csv_cell(row.get(k)) for k in keys])


def _csv_cell(value):
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, dict) and set(value) == {"re", "im"}:
        return f"{value['re']:.17g}{value['im']:+.17g}j"
    return value


# ---------------------------------------------------------------------------
# command line


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loewner-lab",
        description="bound-verification and support-point experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        cmd = sub.add_parser(name.replace("_", "-"))
        cmd.add_argument("--config", type=str, default=None)
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--out", type=str, default=None)
        cmd.add_argument("--family", type=str, default=None)
        cmd.add_argument("--alpha", type=float, default=None)
        cmd.add_argument("--domain", type=str, default=None)
        cmd.add_argument("--dim", type=int, default=None)
        cmd.add_argument("--i", type=int, default=None)
        cmd.add_argument("--j", type=int, default=None)
        cmd.add_argument("--n", dest="N", type=int, default=None)
        cmd.add_argument("--pieces", type=int, default=None)
        cmd.add_argument("--sign", type=int, default=None)
        cmd.add_argument("--coefficient-scale", type=float, default=None)
        cmd.add_argument("--eps", type=float, default=None)
        cmd.add_argument("--tolerance", type=float, default=None)
    return parser


def config_from_args(args) -> ExperimentConfig:
    base = {}
    if args.config:
        with open(args.config) as handle:
            base = json.load(handle)
    experiment = args.command.replace("-", "_")
    if base.get("experiment", experiment) != experiment:
        raise UsageError("experiment: config file disagrees with the subcommand")
    config = ExperimentConfig(
        experiment=experiment,
        g_spec=base.get("g", {"family": "moebius"}),
        domain_spec=base.get("domain", {"kind": "polydisc", "n": 2}),
        i=base.get("i", 1),
        j=base.get("j", 2),
        N=base.get("N", 100),
        pieces=base.get("pieces", 3),
        seed=base.get("seed"),
        eps=base.get("eps", 1e-9),
        tolerance=base.get("tolerance", 1e-6),
        alphas=base.get("alphas"),
        sign=base.get("sign", 1),
        coefficient_scale=base.get("coefficient_scale", 1.0),
        out=base.get("out"),
    )
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.out = args.out
    if args.family is not None:
        config.g_spec = {"family": args.family}
    if args.alpha is not None:
        config.g_spec = dict(config.g_spec, alpha=args.alpha)
    if args.domain is not None:
        config.domain_spec = dict(config.domain_spec, kind=args.domain)
        if args.domain == bg.SPECTRAL2:
            config.domain_spec["n"] = 4
    if args.dim is not None:
        config.domain_spec = dict(config.domain_spec, n=args.dim)
    for name in ("i", "j", "N", "pieces", "sign", "eps", "tolerance"):
        val = getattr(args, name)
        if val is not None:
            setattr(config, name, val)
    if args.coefficient_scale is not None:
        config.coefficient_scale = args.coefficient_scale
    return config


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        env = run_experiment(config)
    except (UsageError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    out = config.out or f"{config.experiment}_report.json"
    emit_report(env, out)
    print(f"{env.summary}  [{env.wall_time_s:.2f}s] -> {out}")
    if env.instability:
        return 3
    return 0 if env.passed else 1


if __name__ == "__main__":
    sys.exit(main())
