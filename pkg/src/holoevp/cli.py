"""Command-line front end: subcommand dispatch, CSV/JSON emission, manifests.

Exit codes: 0 success, 2 configuration error (including unknown flags),
3 numerical failure.  Every run that writes files also writes a JSON
manifest (config hash, seed, package versions, argv, outputs) next to the
first output; reruns with the same config and seed produce byte-identical
CSVs (no timestamps, shortest-roundtrip float formatting, seeded RNGs).

Every CSV row carries the configuration hash in its first column so merged
reports stay traceable.
"""

from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .certify import (
    GammaPolicy,
    HoloCertificate,
    build_certificate,
    validate_bounds,
    weights_from_certificate,
)
from .config import build_problem, config_hash, load_config
from .derivatives import (
    ContourSpec,
    DerivativeTable,
    deriv_chebyshev,
    deriv_contour,
    deriv_fd,
)
from .errors import (
    AssemblyError,
    AssumptionViolation,
    CertificateError,
    ConfigurationError,
    ContinuationError,
    ContourError,
    EstimateError,
    IterationError,
)
from .fem import hnorm
from .geometry import AdmissibleProfile, BernsteinEllipse, Stadium, inclusion_report, is_admissible
from .qmc import convergence_study
from .sequences import AlphaRule, alpha, epsilon_ratio

_NUMERICAL_ERRORS = (
    AssumptionViolation,
    AssemblyError,
    IterationError,
    ContinuationError,
    ContourError,
    CertificateError,
    EstimateError,
)


# ---------------------------------------------------------------------------
# Small IO helpers
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str | None, fieldnames, rows, append: bool = False) -> str | None:
    """Write rows deterministically; path None prints to stdout."""
    rows = [{k: _fmt(v) for k, v in row.items()} for row in rows]
    if path is None:
        writer = csv.DictWriter(sys.stdout, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return None
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    mode = "a" if append and target.exists() else "w"
    with open(target, mode, newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        if mode == "w":
            writer.writeheader()
        writer.writerows(rows)
    return str(target)


def _write_manifest(outputs: list, cfg_hash: str, seed: int, argv: list) -> None:
    outputs = [o for o in outputs if o]
    if not outputs:
        return
    first = Path(outputs[0])
    manifest = {
        "config_hash": cfg_hash,
        "seed": seed,
        "versions": {
            "holoevp": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "argv": list(argv),
        "outputs": [str(Path(o).name) for o in outputs],
    }
    path = first.with_name(first.stem + ".manifest.json")
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _parse_floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip() != ""])
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse float list {text!r}") from exc


def _parse_ints(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse integer list {text!r}") from exc


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_alpha(args, argv) -> int:
    rule = AlphaRule.QUAD if args.rule == "quad" else AlphaRule.FACTORIAL
    h = config_hash({"subcommand": "alpha", "rule": args.rule, "n_max": args.n_max})
    rows = []
    for n in range(1, args.n_max + 1):
        ratio = epsilon_ratio(n, rule)
        rows.append(
            {
                "config_hash": h,
                "n": n,
                "alpha_n": alpha(n, rule),
                "ratio": f"{ratio.numerator}/{ratio.denominator}",
            }
        )
    out = _write_csv(args.out, ["config_hash", "n", "alpha_n", "ratio"], rows)
    _write_manifest([out], h, 0, argv)
    return 0


def _cmd_geometry(args, argv) -> int:
    path = Path(args.profile)
    if not path.exists():
        raise ConfigurationError(f"profile file not found: {path}")
    try:
        raw = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"malformed TOML in {path}: {exc}") from exc
    body = raw.get("profile", raw)
    try:
        profile = AdmissibleProfile(
            b=tuple(body["b"]), eps=float(body["eps"]), p=float(body.get("p", 1.0))
        )
        rho = tuple(float(r) for r in body["rho"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigurationError(f"invalid profile: {exc}") from exc
    h = config_hash({"subcommand": "geometry", **body})
    admissible = is_admissible(rho, profile)
    rows = []
    for j, rho_j in enumerate(rho, start=1):
        ell = BernsteinEllipse(rho_j)
        st = Stadium(profile.stadium_radius(j))
        rep = inclusion_report(ell, st, samples=256)
        rows.append(
            {
                "config_hash": h,
                "j": j,
                "b_j": profile.b[j - 1],
                "rho_j": rho_j,
                "R_minor": rep.semi_minor,
                "R_major": ell.semi_major,
                "radius": st.radius,
                "included": rep.included,
                "admissible_profile": admissible,
            }
        )
    out = _write_csv(
        args.out,
        ["config_hash", "j", "b_j", "rho_j", "R_minor", "R_major", "radius", "included", "admissible_profile"],
        rows,
    )
    _write_manifest([out], h, 0, argv)
    return 0


def _cmd_solve(args, argv) -> int:
    cfg = load_config(args.config)
    if args.problem is not None and args.problem != cfg.kind:
        raise ConfigurationError(
            f"--problem {args.problem} conflicts with config kind {cfg.kind}"
        )
    problem = build_problem(cfg)
    problem.assumptions()  # raises AssumptionViolation with the offending node
    y = _parse_floats(args.y) if args.y else np.zeros(cfg.s)
    pair = problem.solve(y)
    h = cfg.hash
    rows = [
        {
            "config_hash": h,
            "lambda": float(np.real(pair.lam)),
            "residual": pair.residual,
            "hnorm_u": hnorm(pair.u, problem.mesh),
            "norm_check": pair.norm_check,
            "iterations": pair.iterations,
        }
    ]
    outputs = []
    out = _write_csv(
        args.out,
        ["config_hash", "lambda", "residual", "hnorm_u", "norm_check", "iterations"],
        rows,
    )
    outputs.append(out)
    if args.dump_u:
        full_nodes = problem.mesh.nodes
        full_u = np.zeros(len(full_nodes))
        full_u[1:-1] = np.real(pair.u)
        urows = [
            {"config_hash": h, "x": float(x), "u": float(v)}
            for x, v in zip(full_nodes, full_u)
        ]
        outputs.append(_write_csv(args.dump_u, ["config_hash", "x", "u"], urows))
    _write_manifest(outputs, h, cfg.seed, argv)
    return 0


def _cmd_derivs(args, argv) -> int:
    cfg = load_config(args.config)
    problem = build_problem(cfg)
    problem.assumptions()
    y = _parse_floats(args.y) if args.y else np.zeros(cfg.s)
    table = DerivativeTable(y=tuple(float(v) for v in y))
    j = args.j

    def dense_nu(n):
        nu = [0] * j
        nu[j - 1] = n
        return tuple(nu)

    if args.method == "fd":
        for n in range(1, args.n_max + 1):
            r = deriv_fd(problem, y, j, n)
            table.add(dense_nu(n), r.d_lambda, r.d_u_hnorm, "fd", max(r.est_lambda, r.est_u))
    elif args.method == "cheb":
        r = deriv_chebyshev(problem, y, j, args.n_max)
        for n in range(1, args.n_max + 1):
            table.add(dense_nu(n), r.d_lambda[n], r.d_u_hnorm[n], "chebyshev", r.est_lambda[n])
    else:
        spec = ContourSpec.for_problem(problem, j)
        r = deriv_contour(problem, y, spec, args.n_max)
        for n in range(1, args.n_max + 1):
            table.add(dense_nu(n), r.d_lambda[n], r.d_u_hnorm[n], "contour", r.est_error(n))
    h = cfg.hash
    rows = [{"config_hash": h, "j": j, **row} for row in table.rows()]
    out = _write_csv(
        args.out,
        ["config_hash", "j", "nu", "lambda_re", "lambda_im", "hnorm_du", "method", "est_error"],
        rows,
    )
    _write_manifest([out], h, cfg.seed, argv)
    return 0


def _gamma_policy(cfg) -> GammaPolicy:
    return GammaPolicy(
        kind=cfg.gamma_policy,
        r=cfg.gamma_r,
        sigma_g=cfg.gamma_sigma,
        fraction=cfg.gamma_fraction,
    )


def _cmd_certify(args, argv) -> int:
    cfg = load_config(args.config)
    problem = build_problem(cfg)
    cert = build_certificate(
        problem,
        gamma_policy=_gamma_policy(cfg),
        sample_budget=args.budget,
        seed=cfg.seed or 2024,
    )
    payload = cert.to_json_dict()
    payload["config_hash"] = cfg.hash
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    _write_manifest([str(out)], cfg.hash, cfg.seed, argv)
    print(f"certificate written to {out}")
    return 0


def _load_certificate(path) -> HoloCertificate:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"certificate file not found: {path}")
    try:
        return HoloCertificate.from_json_dict(json.loads(path.read_text()))
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ConfigurationError(f"invalid certificate {path}: {exc}") from exc


def _cmd_validate(args, argv) -> int:
    cfg = load_config(args.config)
    problem = build_problem(cfg)
    cert = _load_certificate(args.cert)
    nus = [tuple(_parse_ints(spec)) for spec in args.nu]
    rng = np.random.default_rng(cfg.seed or 0)
    samples = [np.zeros(problem.s), 0.75 * np.ones(problem.s), -0.75 * np.ones(problem.s)]
    while len(samples) < args.y_samples:
        samples.append(rng.uniform(-1.0, 1.0, problem.s))
    report = validate_bounds(cert, problem, samples[: args.y_samples], nus)
    rows = [{"config_hash": cfg.hash, **row} for row in report.csv_rows()]
    out = _write_csv(
        args.out,
        [
            "config_hash",
            "nu",
            "measured_lambda",
            "measured_u",
            "predicted_lambda",
            "predicted_u",
            "ratio_lambda",
            "ratio_u",
            "passed",
            "note",
        ],
        rows,
        append=True,
    )
    _write_manifest([out], cfg.hash, cfg.seed, argv)
    return 0 if report.all_pass else 3


def _cmd_qmc(args, argv) -> int:
    cfg = load_config(args.config)
    problem = build_problem(cfg)
    problem.assumptions()
    N_list = _parse_ints(args.N)
    s = args.s or cfg.s
    if args.cert:
        weights = weights_from_certificate(_load_certificate(args.cert), s)
    else:
        c = np.asarray(problem.c_values(), float)
        base = np.zeros(s)
        base[: min(s, len(c))] = c[:s]
        floor = max(base.max(), 1.0) * 1e-8
        weights = np.minimum.accumulate(np.maximum(base, floor)) ** 2
    study = convergence_study(
        problem,
        "lambda",
        N_list,
        s,
        weights,
        R=args.R,
        seed=cfg.seed,
        mode=args.mode,
    )
    rows = [{"config_hash": cfg.hash, **row} for row in study.csv_rows(s, args.R)]
    out = _write_csv(
        args.out,
        ["config_hash", "N", "s", "R", "estimate", "rms", "alpha_obs_partial"],
        rows,
    )
    _write_manifest([out], cfg.hash, cfg.seed, argv)
    return 0


def _cmd_report(args, argv) -> int:
    manifests = []
    for d in args.run_dirs:
        root = Path(d)
        if not root.exists():
            print(f"warning: run directory {root} not found, skipped", file=sys.stderr)
            continue
        for mpath in sorted(root.glob("*.manifest.json")):
            try:
                manifest = json.loads(mpath.read_text())
                manifest["_dir"] = str(root)
                manifest["_file"] = mpath.name
                manifests.append(manifest)
            except (json.JSONDecodeError, OSError) as exc:
                print(f"warning: corrupted manifest {mpath}: {exc}", file=sys.stderr)
    merged = []
    columns = ["config_hash", "source"]
    for manifest in manifests:
        root = Path(manifest["_dir"])
        for name in manifest.get("outputs", []):
            opath = root / name
            if opath.suffix != ".csv" or not opath.exists():
                continue
            with open(opath, newline="") as fh:
                for row in csv.DictReader(fh):
                    row.setdefault("config_hash", manifest.get("config_hash", ""))
                    row["source"] = name
                    merged.append(row)
                    for key in row:
                        if key not in columns:
                            columns.append(key)

    def sort_key(row):
        def num(key):
            try:
                return float(row.get(key, "") or "nan")
            except ValueError:
                return float("nan")

        s_val, n_val = num("s"), num("N")
        return (
            0 if s_val == s_val else 1,
            s_val if s_val == s_val else 0.0,
            n_val if n_val == n_val else 0.0,
            row.get("config_hash", ""),
            row.get("source", ""),
        )

    merged.sort(key=sort_key)
    rows = [{c: row.get(c, "") for c in columns} for row in merged]
    out = _write_csv(args.out, columns, rows)
    if out:
        summary = {
            "manifests": [
                {k: v for k, v in m.items() if not k.startswith("_")} for m in manifests
            ],
            "rows": len(rows),
        }
        Path(out).with_suffix(".json").write_text(
            json.dumps(summary, sort_keys=True, indent=2) + "\n"
        )
    return 0


# ---------------------------------------------------------------------------
# Parser and dispatch
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holoevp",
        description="Desk-scale parametric-holomorphy toolkit for elliptic ground eigenpairs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("alpha", help="growth-sequence table (n, alpha_n, ratio)")
    p.add_argument("--rule", choices=["quad", "factorial"], default="quad")
    p.add_argument("--n-max", type=int, default=8)
    p.add_argument("--out", default=None)

    p = sub.add_parser("geometry", help="ellipse-in-stadium inclusion diagnostics")
    p.add_argument("action", choices=["check"])
    p.add_argument("--profile", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("solve", help="ground eigenpair at one parameter point")
    p.add_argument("--config", required=True)
    p.add_argument("--problem", choices=["linear", "semilinear"], default=None)
    p.add_argument("--y", default="")
    p.add_argument("--dump-u", default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("derivs", help="parametric derivative table in one coordinate")
    p.add_argument("--config", required=True)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--n-max", type=int, default=4)
    p.add_argument("--method", choices=["contour", "fd", "cheb"], default="contour")
    p.add_argument("--y", default="")
    p.add_argument("--out", default=None)

    p = sub.add_parser("certify", help="fit and write a growth certificate")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=int, default=200)

    p = sub.add_parser("validate", help="mixed-derivative bound report for a certificate")
    p.add_argument("--cert", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--nu", action="append", required=True, help="dense multi-index, e.g. 2,1")
    p.add_argument("--y-samples", type=int, default=5)
    p.add_argument("--out", default=None)

    p = sub.add_parser("qmc", help="lattice-rule convergence study for E[lambda]")
    p.add_argument("--config", required=True)
    p.add_argument("--N", required=True, help="comma-separated prime moduli")
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--R", type=int, default=16)
    p.add_argument("--mode", choices=["seeded", "cold"], default="seeded")
    p.add_argument("--cert", default=None, help="take weights from this certificate")
    p.add_argument("--out", default=None)

    p = sub.add_parser("report", help="merge study outputs keyed by config hash")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out", default=None)

    return parser


_DISPATCH = {
    "alpha": _cmd_alpha,
    "geometry": _cmd_geometry,
    "solve": _cmd_solve,
    "derivs": _cmd_derivs,
    "certify": _cmd_certify,
    "validate": _cmd_validate,
    "qmc": _cmd_qmc,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _DISPATCH[args.command](args, argv)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
