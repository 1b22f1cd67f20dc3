"""Command-line front end.

Exit codes: 0 success, 1 semantic failure (mismatch, malformed input,
violated bound), 2 guard or validation error, 3 solver guard.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import compression, conversion, io
from .network import AffineUnit, ReluNetwork, region_count
from .seeding import rng_for
from .training import TrainConfig, run_experiment

MAX_WITNESS_N = 16


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _emit(doc) -> None:
    print(json.dumps(doc, indent=2))


def _load(path):
    try:
        return io.load_network(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read network {path}: {exc}", 1) from exc


def _first_layer_units(net):
    if isinstance(net, ReluNetwork):
        return list(net.units)
    first = net.layers[0]
    return [AffineUnit(w, b) for w, b in zip(first.weights, first.bias)]


def cmd_convert(args) -> int:
    net = _load(args.input)
    if not isinstance(net, ReluNetwork):
        raise CliError("convert expects a relu network", 1)
    fn = conversion.relu_to_threshold_dnf if args.form == "dnf" else conversion.relu_to_threshold_cnf
    try:
        out, report = fn(net, force=args.force)
    except conversion.SizeGuardError as exc:
        raise CliError(str(exc), 2) from exc
    io.save_network(args.out, out)
    _emit(report.to_dict())
    return 0


def boundary_points(net, count: int, rng) -> np.ndarray:
    """Points projected onto the first-layer hyperplanes of ``net``, cycling through units."""
    units = [u for u in _first_layer_units(net) if np.any(u.weights)]
    if not units or count <= 0:
        return np.zeros((0, net.dim))
    return np.array([
        conversion.on_hyperplane(units[i % len(units)], rng.normal(size=net.dim))
        for i in range(count)
    ])


def compare(a, b, X: np.ndarray) -> dict:
    ya, yb = a.predict(X), b.predict(X)
    bad = np.flatnonzero(ya != yb)
    return {
        "samples": int(len(X)),
        "disagreements": int(bad.size),
        "first_disagreement_point": X[bad[0]].tolist() if bad.size else None,
    }


def cmd_verify(args) -> int:
    a, b = _load(args.a), _load(args.b)
    if a.dim != b.dim:
        raise CliError(f"dimension mismatch: {a.dim} vs {b.dim}", 1)
    rng = rng_for(args.seed, 0)
    X = rng.normal(size=(args.dim_samples, a.dim))
    if args.boundary:
        X = np.vstack([X, boundary_points(a, args.boundary_samples, rng_for(args.seed, 1))])
    report = compare(a, b, X)
    _emit(report)
    return 0 if report["disagreements"] == 0 else 1


def cmd_approximate(args) -> int:
    net = _load(args.input)
    try:
        out = conversion.threshold2_to_relu(net, args.eps)
    except (conversion.ConversionError, AttributeError) as exc:
        raise CliError(f"cannot approximate: {exc}", 2) from exc
    io.save_network(args.out, out)
    _emit({"hidden_units": out.n, "positive": out.n1, "negative": out.n2, "eps": args.eps})
    return 0


def _read_matrix(path):
    try:
        return io.read_matrix(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read matrix {path}: {exc}", 1) from exc


def cmd_expand(args) -> int:
    U = _read_matrix(args.u)
    try:
        V = compression.expand(U)
    except ValueError as exc:
        raise CliError(str(exc), 2) from exc
    io.write_matrix(args.out, V)
    if args.network_out:
        io.save_network(args.network_out, compression.compressed_relu(U))
    _emit({"n": U.shape[1] - 1, "d": U.shape[0] - 1, "columns": V.shape[1]})
    return 0


def cmd_compress(args) -> int:
    V = _read_matrix(args.input)
    try:
        n = compression.n_from_columns(V.shape[1])
    except ValueError as exc:
        raise CliError(str(exc), 2) from exc
    summary = {"mode": args.mode, "n": n, "d": V.shape[0] - 1}
    if args.mode == "exact":
        try:
            U = compression.exact_factorize(V)
        except compression.NotFactorableError as exc:
            summary.update(factorable=False, violating_column=exc.column, reason=str(exc))
            _emit(summary)
            return 1
        summary.update(factorable=True, objective=0.0)
    else:
        try:
            res = compression.min_infnorm_factor(V, method=args.solver)
        except compression.SolverGuardError as exc:
            raise CliError(str(exc), 3) from exc
        U = res.U
        summary.update(objective=res.objective, duality_gap=res.duality_gap, solver=res.method)
    io.write_matrix(args.out, U)
    _emit(summary)
    return 0


def cmd_margin_audit(args) -> int:
    V, U = _read_matrix(args.v), _read_matrix(args.u)
    try:
        X = compression.augment(io.read_points(args.data))
        audit = compression.margin_audit(V, U, X, include_bias=not args.exclude_bias, strict=False)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc), 2) from exc
    text = io.audit_csv(audit)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    bad = audit.violations
    if bad.size:
        i = int(bad[0])
        row = dict(list(audit.rows())[i], index=i)
        print(f"bound met but argmax changed: {row}", file=sys.stderr)
        return 1
    return 0


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def cmd_experiment(args) -> int:
    base = TrainConfig(
        hidden_units=1,
        max_epochs=args.max_epochs,
        early_stop_patience=args.patience,
        seed=args.seed,
    )
    try:
        run = run_experiment(_ints(args.dims), _ints(args.ns), seed=args.seed,
                             total=args.total, test=args.test, base=base)
    except ValueError as exc:
        raise CliError(str(exc), 2) from exc
    text = io.report_csv(run.rows)
    out = Path(args.out)
    out.write_text(text)
    artifacts = Path(args.artifacts) if args.artifacts else out.with_name(out.stem + "_artifacts")
    artifacts.mkdir(parents=True, exist_ok=True)
    for (n, d), net in run.generators.items():
        io.save_network(artifacts / f"generator_n{n}_d{d}.json", net)
        io.write_dataset(artifacts / f"dataset_n{n}_d{d}.csv", run.datasets[(n, d)])
    sys.stdout.write(text)
    return 0


def witness_report(n: int, d: int) -> dict:
    net = conversion.make_tightness_network(n, d)
    subsets = conversion.nonempty_subsets(n)
    records = []
    for S in subsets:
        x = conversion.tightness_witness(n, d, S)
        positive = [list(T) for T in subsets if -1 + sum(x[i - 1] for i in T) >= 0]
        records.append({
            "subset": list(S),
            "point": x.tolist(),
            "positive_hyperplanes": positive,
            "network_output": int(net.predict(x)),
            "verified": positive == [list(S)] and net.predict(x) == 1,
        })
    return {
        "network": io.network_to_dict(net),
        "witnesses": records,
        "all_verified": all(r["verified"] for r in records),
    }


def cmd_witness(args) -> int:
    d = args.d if args.d is not None else args.n
    if args.any_nonnegative:
        try:
            net = conversion.make_any_nonnegative_network(args.n, d)
        except ValueError as exc:
            raise CliError(str(exc), 2) from exc
        _emit({"network": io.network_to_dict(net)})
        return 0
    if not 1 <= args.n <= MAX_WITNESS_N or d < args.n:
        raise CliError(f"need 1 <= n <= {MAX_WITNESS_N} and d >= n", 2)
    report = witness_report(args.n, d)
    _emit(report)
    return 0 if report["all_verified"] else 1


def cmd_regions(args) -> int:
    try:
        count = region_count(args.n, args.d)
    except ValueError as exc:
        raise CliError(str(exc), 2) from exc
    _emit({"n": args.n, "d": args.d, "regions": count})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rectex", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("convert", help="relu network -> 3-layer threshold network")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--form", choices=("dnf", "cnf"), default="dnf")
    s.add_argument("--out", required=True)
    s.add_argument("--force", action="store_true", help="ignore the size guard")
    s.set_defaults(func=cmd_convert)

    s = sub.add_parser("verify", help="sample-based equivalence check of two networks")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--dim-samples", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--boundary", action="store_true",
                   help="add points lying on the hidden hyperplanes of --a")
    s.add_argument("--boundary-samples", type=int, default=50)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("approximate", help="2-layer threshold network -> 2m-unit relu network")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--eps", type=float, default=1e-3)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_approximate)

    s = sub.add_parser("expand", help="U matrix -> V = U T")
    s.add_argument("--u", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--network-out", help="also write the compressed relu network")
    s.set_defaults(func=cmd_expand)

    s = sub.add_parser("compress", help="factor V as U T exactly or by infinity-norm LP")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--mode", choices=("exact", "lp"), default="exact")
    s.add_argument("--solver", choices=("highs", "simplex"), default="highs")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_compress)

    s = sub.add_parser("margin-audit", help="per-example margin bound audit")
    s.add_argument("--v", required=True)
    s.add_argument("--u", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out")
    s.add_argument("--exclude-bias", action="store_true",
                   help="leave the constant feature out of ||x||_inf")
    s.set_defaults(func=cmd_margin_audit)

    s = sub.add_parser("experiment", help="train relu / compressed-tanh learners on generated data")
    s.add_argument("--dims", default="3,10,50")
    s.add_argument("--ns", default="3,10")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--artifacts")
    s.add_argument("--total", type=int, default=10_000)
    s.add_argument("--test", type=int, default=1_500)
    s.add_argument("--max-epochs", type=int, default=1000)
    s.add_argument("--patience", type=int, default=50)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("witness", help="points showing every hyperplane is needed")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--d", type=int)
    s.add_argument("--any-nonnegative", action="store_true",
                   help="print the OR network that is positive unless every x_i < 0")
    s.set_defaults(func=cmd_witness)

    s = sub.add_parser("regions", help="regions of a generic hyperplane arrangement")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--d", type=int, required=True)
    s.set_defaults(func=cmd_regions)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
