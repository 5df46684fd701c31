"""Command-line interface: generate, distribution, verify, rank, simulate, loglik, classify.

Exit codes: 0 success, 1 verification failed, 2 generation failed, 3 internal
invariant violated, 64 usage error, 65 data format error.  All file outputs
are written atomically and are byte-identical across runs with equal flags.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import fileio
from .diagnostics import (
    counts_csv,
    counts_from_csv,
    identifiability_report,
    jacobian,
    log_likelihood,
    numerical_rank,
    simulate,
)
from .equivalence import (
    CaseLabel,
    bundle_tables,
    check_necessary_equalities,
    classify_case,
    generate_nonidentifiable,
    pair_to_obj,
    verify_pair,
)
from .errors import (
    DataFormatError,
    DimensionMismatchError,
    DomainError,
    GenerationError,
    InternalConsistencyError,
    NonCanonicalError,
)
from .fileio import fmt
from .forward import distribution_csv
from .params import (
    ModelDims,
    build_psi_table,
    canonicalize,
    param_count,
    params_from_obj,
    read_params,
    table_from_obj,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_GENERATION_FAILED = 2
EXIT_INTERNAL = 3
EXIT_USAGE = 64
EXIT_DATA_FORMAT = 65


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 64, not argparse's default 2
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_output(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        fileio.atomic_write_text(path, text)
        print(f"wrote {path}")


def _read_text(path: str) -> str:
    try:
        with open(path, "r") as fh:
            return fh.read()
    except OSError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def cmd_generate(args) -> int:
    dims = ModelDims(args.T, args.K)
    pair = generate_nonidentifiable(
        dims, CaseLabel(args.case), args.seed, eta_margin=args.eta_margin
    )
    obj = pair_to_obj(pair)
    print(f"case: {pair.case.value}")
    print(f"eta: {fmt(pair.transform.eta)}")
    xi = np.asarray(pair.transform.xi)
    if xi.ndim == 0:
        print(f"xi: {fmt(float(xi))}")
    else:
        print("xi_per_t: " + ", ".join(fmt(v) for v in xi))
    print(f"max_dist_distribution: {fmt(pair.verification.max_dist_distribution)}")
    print(f"max_dist_params: {fmt(pair.verification.max_dist_params)}")
    _write_output(args.output, fileio.to_json(obj))
    return EXIT_OK


def cmd_distribution(args) -> int:
    params = read_params(args.params)
    _write_output(args.output, distribution_csv(build_psi_table(params)))
    return EXIT_OK


def cmd_verify(args) -> int:
    obj = fileio.load_json(args.pair)
    table_a, table_b = bundle_tables(obj, context=args.pair)
    verification = verify_pair(table_a, table_b, tol=args.tol)
    equalities = check_necessary_equalities(table_a, table_b, tol=args.tol)
    print(f"max_dist_distribution: {fmt(verification.max_dist_distribution)}")
    print(f"max_dist_params: {fmt(verification.max_dist_params)}")
    print(f"tol: {fmt(args.tol)}")
    for name, value in equalities.discrepancies.items():
        status = "ok" if value <= args.tol else "FAIL"
        print(f"relation {name}: max discrepancy {fmt(value)} [{status}]")
    ok = verification.passed and equalities.passed
    print("verdict: " + ("equivalent" if ok else "NOT equivalent"))
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_rank(args) -> int:
    params = read_params(args.params)
    if not params.is_canonical():
        params = canonicalize(params)
    report = numerical_rank(jacobian(params, step=args.step), rel_cutoff=args.cutoff)
    spectrum = report.singular_values
    obj = {
        "rank": report.rank,
        "deficiency": report.deficiency,
        "param_count": param_count(params.dims()),
        "rows": report.rows,
        "rel_cutoff": report.rel_cutoff,
        "cutoff": report.cutoff,
        "spectrum_head": spectrum[:5],
        "spectrum_tail": spectrum[-5:],
    }
    sys.stdout.write(fileio.to_json(obj))
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = read_params(args.params)
    data = simulate(params, args.n, args.seed, workers=args.workers)
    _write_output(args.output, counts_csv(data))
    return EXIT_OK


def cmd_loglik(args) -> int:
    obj = fileio.load_json(args.model)
    if not isinstance(obj, dict):
        raise DataFormatError(f"{args.model}: expected a JSON object")
    if "omega" in obj:
        if args.member is None:
            raise DataFormatError(
                f"{args.model}: pair bundle given; choose --member omega|omega-prime"
            )
        table_a, table_b = bundle_tables(obj, context=args.model)
        table = table_a if args.member == "omega" else table_b
    elif "theta" in obj:
        table = build_psi_table(params_from_obj(obj, context=args.model))
    elif "psi1" in obj:
        table = table_from_obj(obj, context=args.model)
    else:
        raise DataFormatError(f"{args.model}: not a params, table, or pair bundle file")
    data = counts_from_csv(_read_text(args.counts), context=args.counts)
    print(f"{log_likelihood(table, data):.12f}")
    return EXIT_OK


def cmd_classify(args) -> int:
    params = read_params(args.params)
    if not params.is_canonical():
        params = canonicalize(params)
    print(classify_case(params, tol=args.tol_case).value)
    if args.report is not None:
        report = identifiability_report(
            params,
            case_tol=args.tol_case,
            step=args.step,
            rel_cutoff=args.cutoff,
            eta_margin=args.eta_margin,
            tol=args.tol,
        )
        fileio.atomic_write_text(args.report, fileio.to_json(report))
        print(report["summary"])
        print(f"wrote {args.report}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="irtmpt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[], help="construct a verified equivalent pair")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--case", required=True,
                   choices=[c.value for c in CaseLabel if c != CaseLabel.NEITHER])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--eta-margin", type=float, default=0.05, dest="eta_margin")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("distribution", help="per-cell category distribution CSV")
    p.add_argument("params")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_distribution)

    p = sub.add_parser("verify", help="check a pair bundle for observational equality")
    p.add_argument("pair")
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("rank", help="Jacobian numerical rank at a parameter point")
    p.add_argument("params")
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--cutoff", type=float, default=1e-7)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("simulate", help="seeded multinomial counts CSV")
    p.add_argument("params")
    p.add_argument("--n", type=int, required=True, help="draws per cell")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("loglik", help="multinomial log-likelihood of counts")
    p.add_argument("model", help="params JSON, psi-table JSON, or pair bundle")
    p.add_argument("counts", help="counts CSV")
    p.add_argument("--member", choices=["omega", "omega-prime"], default=None)
    p.set_defaults(func=cmd_loglik)

    p = sub.add_parser("classify", help="degeneracy case of the process-6 parameters")
    p.add_argument("params")
    p.add_argument("--tol-case", type=float, default=1e-8, dest="tol_case")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--cutoff", type=float, default=1e-7)
    p.add_argument("--eta-margin", type=float, default=0.05, dest="eta_margin")
    p.add_argument("--report", default=None, help="also write a full report JSON")
    p.set_defaults(func=cmd_classify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataFormatError, DimensionMismatchError) as exc:
        print(f"irtmpt: data error: {exc}", file=sys.stderr)
        return EXIT_DATA_FORMAT
    except GenerationError as exc:
        print(f"irtmpt: generation failed: {exc}", file=sys.stderr)
        return EXIT_GENERATION_FAILED
    except InternalConsistencyError as exc:
        print(f"irtmpt: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (DomainError, NonCanonicalError) as exc:
        print(f"irtmpt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
