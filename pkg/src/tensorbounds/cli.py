"""Command line entry point.

Exit codes: 0 success, 1 domain error (an error JSON is printed on stderr),
2 resource budget stop, 64 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from . import config
from .errors import ResourceBudgetExceeded, TensorBoundsError

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_BUDGET = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_atomic(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _file_hash(path: str) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _provenance(inputs: dict) -> dict:
    return {"tool": "tensorbounds", "version": config.VERSION, "inputs": inputs}


def default_budget() -> float:
    """Wall-clock budget in seconds: TENSORBOUNDS_BUDGET if set, else the built-in default."""
    return float(os.environ.get("TENSORBOUNDS_BUDGET", config.TIME_BUDGET))


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma separated integers, got {text!r}") from None


def _add_tensor_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tensor", help="tensor JSON file")
    p.add_argument("--family", help="build the tensor from a named family instead of a file")
    p.add_argument("--params", default="", help="comma separated family parameters")


def _load_tensor(args):
    from .tensor import Tensor3, build_family

    if args.tensor and args.family:
        raise UsageError("give either --tensor or --family, not both")
    if args.tensor:
        with open(args.tensor) as fh:
            T = Tensor3.from_json_obj(json.load(fh))
        return T, {"tensor": T.digest(), "tensor_file": os.path.basename(args.tensor)}
    if args.family:
        params = [p for p in args.params.split(",") if p.strip()]
        T = build_family(args.family, params)
        return T, {"tensor": T.digest(), "family": args.family, "params": params}
    raise UsageError("a tensor is required (--tensor FILE or --family NAME --params ...)")


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", "--output", help="write the artifact JSON here")
    p.add_argument(
        "--json", nargs="?", const="-", metavar="PATH",
        help="machine output: print the artifact JSON, or write it to PATH",
    )


class Result:
    """Artifact plus a one-line summary value (used for batch tables)."""

    def __init__(self, artifact: dict, summary, text: str, code: int = EXIT_OK):
        self.artifact = artifact
        self.summary = summary
        self.text = text
        self.code = code
        self.stdout_json = False


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_tensor_build(args) -> Result:
    T, inputs = _load_tensor(args)
    obj = T.to_json_obj()
    return Result(obj, len(T.sparse()), f"{T.dims} tensor with {len(T.sparse())} nonzero entries")


def cmd_tensor_info(args) -> Result:
    from .tensor import is_1generic, is_concise, multilinear_ranks

    T, inputs = _load_tensor(args)
    gen = {f: is_1generic(T, f, seed=args.seed).generic for f in "ABC"}
    info = {
        "dims": list(T.dims),
        "nonzero": len(T.sparse()),
        "multilinear_ranks": list(multilinear_ranks(T)),
        "concise": is_concise(T),
        "one_generic": gen,
        "provenance": _provenance(inputs),
    }
    return Result(info, info["multilinear_ranks"], f"ml ranks {info['multilinear_ranks']}, concise {info['concise']}, 1-generic {gen}")


def _cert_artifact(cert, T, inputs) -> dict:
    return {"certificate": cert.to_json_obj(), "tensor": T.to_json_obj(), "provenance": _provenance(inputs)}


def cmd_bounds(args) -> Result:
    from . import bounds

    T, inputs = _load_tensor(args)
    if args.method == "flattening":
        cert = bounds.flattening_bound(T)
    elif args.method == "commutator":
        cert = bounds.strassen_commutator_bound(T, trials=args.trials, seed=args.seed, factor=args.factor)
    elif args.method == "koszul":
        if args.p is None:
            raise UsageError("koszul needs --p")
        cert = bounds.koszul_bound(T, args.p, args.strategy, seed=args.seed, trials=args.trials, factor=args.factor)
    else:
        budget = default_budget() if args.budget is None else args.budget
        cert = bounds.best_bound(T, budget=budget, seed=args.seed)
    return Result(_cert_artifact(cert, T, inputs), cert.bound, f"{cert.method}: border rank >= {cert.bound}")


def cmd_bounds_verify(args) -> Result:
    from .bounds import BoundCertificate, verify_certificate
    from .tensor import Tensor3

    with open(args.cert) as fh:
        obj = json.load(fh)
    cert = BoundCertificate.from_json_obj(obj["certificate"])
    if args.tensor:
        with open(args.tensor) as fh:
            T = Tensor3.from_json_obj(json.load(fh))
    elif "tensor" in obj:
        T = Tensor3.from_json_obj(obj["tensor"])
    else:
        raise UsageError("certificate has no embedded tensor; pass --tensor")
    ok = verify_certificate(cert, T)
    out = {"valid": ok, "method": cert.method, "bound": cert.bound, "provenance": _provenance({"certificate": _file_hash(args.cert)})}
    return Result(out, ok, f"certificate {'valid' if ok else 'INVALID'}: {cert.method} bound {cert.bound}", EXIT_OK if ok else EXIT_DOMAIN)


def cmd_symmetry(args) -> Result:
    from .symmetry import structured_basis_report, symmetry_algebra

    T, inputs = _load_tensor(args)
    basis = structured_basis_report(T) if args.action == "report" else symmetry_algebra(T)
    obj = basis.to_json_obj()
    obj["provenance"] = _provenance(inputs)
    if args.basis:
        write_atomic(args.basis, _dump(obj))
    obj = {k: v for k, v in obj.items() if k != "triples"}
    text = f"dim g~ = {basis.dim_tilde}, dim g = {basis.dim_g}"
    if basis.blocks:
        text += f", blocks {basis.blocks}"
    return Result(obj, basis.dim_g, text)


def cmd_decompose_als(args) -> Result:
    from .decomposition import ALSOptions, als_search

    T, inputs = _load_tensor(args)
    opts = ALSOptions(
        seed=args.seed,
        max_iters=args.max_iters,
        restarts=args.restarts,
        residual_tol=args.residual_tol,
        blowup_threshold=args.blowup_threshold,
        regularization=args.regularization,
        line_search=not args.no_line_search,
    )
    res = als_search(T, args.r, opts)
    traces = [t.to_json_obj() for t in res.restarts]
    if not args.histories:
        for t in traces:
            t.pop("residual_history")
            t.pop("coeff_history")
    obj = {
        "r": args.r,
        "outcome": res.trace.outcome,
        "selected_restart": res.trace.restart,
        "final_residual": res.trace.final_residual,
        "final_coeff_norm": res.trace.final_coeff,
        "restarts": traces,
        "decomposition": res.decomposition.to_json_obj() if res.decomposition else None,
        "provenance": _provenance(inputs),
    }
    text = f"{res.trace.outcome}: residual {res.trace.final_residual:.3e}, coefficient max-norm {res.trace.final_coeff:.3e}"
    return Result(obj, res.trace.outcome, text)


def cmd_decompose_verify(args) -> Result:
    from .decomposition import BilinearDecomposition, verify_decomposition

    T, inputs = _load_tensor(args)
    with open(args.decomposition) as fh:
        D = BilinearDecomposition.from_json_obj(json.load(fh))
    v = verify_decomposition(T, D, tol=args.tol)
    residual = str(v.residual) if D.mode == "exact" else v.residual
    inputs["decomposition"] = _file_hash(args.decomposition)
    obj = {"ok": v.ok, "mode": D.mode, "r": D.r, "residual": residual, "provenance": _provenance(inputs)}
    return Result(obj, v.ok, f"{'verified' if v.ok else 'NOT verified'} (r={D.r}, residual {residual})", EXIT_OK if v.ok else EXIT_DOMAIN)


def _load_algorithm(choice: str):
    from .decomposition import BilinearDecomposition
    from .engine import named_algorithm

    if choice.startswith("file:"):
        path = choice[5:]
        with open(path) as fh:
            return BilinearDecomposition.from_json_obj(json.load(fh)), {"algorithm": _file_hash(path)}
    D, _ = named_algorithm(choice)
    return D, {"algorithm": choice}


def _series_fit(D, N: int, cutoff: int) -> float | None:
    # exponent fitted on the doubling series base^1 .. N (counts only)
    from .engine import estimate_exponent, infer_base_dims

    l, m, n = infer_base_dims(D)
    if not l == m == n:
        return None
    base = l
    sizes = []
    k = base
    while k <= N:
        sizes.append(k)
        k *= base
    if len(sizes) < 2:
        return None
    return round(estimate_exponent(D, sizes, cutoff=cutoff).fitted_exponent, 12)


def cmd_mm_run(args) -> Result:
    import numpy as np

    from .engine import check_bilinear_algorithm, count_operations, infer_base_dims, recursive_multiply

    D, inputs = _load_algorithm(args.alg)
    l, m, n = infer_base_dims(D)
    if not check_bilinear_algorithm(D, l, m, n):
        raise TensorBoundsError(f"algorithm does not verify against M<{l},{m},{n}>")
    N = args.size
    if args.count_only:
        cnt = count_operations(D, (N, N, N), args.cutoff)
        correct = None
    else:
        rng = np.random.default_rng(args.seed)
        A = rng.integers(-args.height, args.height + 1, size=(N, N))
        B = rng.integers(-args.height, args.height + 1, size=(N, N))
        Z, cnt = recursive_multiply(A, B, D, args.cutoff)
        ref = A.astype(object).dot(B.astype(object))
        correct = bool((np.asarray(Z, dtype=object) == ref).all())
    obj = cnt.to_json_obj()
    obj["exponent_fit"] = _series_fit(D, N, args.cutoff)
    obj.update({"size": N, "cutoff": args.cutoff, "r": D.r, "correct": correct, "provenance": _provenance(inputs)})
    code = EXIT_DOMAIN if correct is False else EXIT_OK
    return Result(obj, str(cnt.scalar_mults), f"mults {cnt.scalar_mults}, adds {cnt.scalar_adds}, depth {cnt.recursion_depth}", code)


def cmd_mm_exponent(args) -> Result:
    from .engine import check_bilinear_algorithm, estimate_exponent, infer_base_dims

    D, inputs = _load_algorithm(args.alg)
    if not check_bilinear_algorithm(D, *infer_base_dims(D)):
        raise TensorBoundsError("algorithm does not verify")
    est = estimate_exponent(D, _ints(args.sizes), execute=args.execute, cutoff=args.cutoff)
    obj = est.to_json_obj()
    obj["mults"] = str(est.samples[-1][1])
    obj["provenance"] = _provenance(inputs)
    return Result(obj, round(est.fitted_exponent, 6), f"fitted exponent {est.fitted_exponent:.6f} (reference {est.reference:.6f})")


def cmd_apolarity(args) -> Result:
    from .apolarity import apolarity_feasible

    T, inputs = _load_tensor(args)
    budget = default_budget() if args.budget is None else args.budget
    res = apolarity_feasible(T, args.r, D=args.max_degree, budget=budget, borel=args.borel)
    obj = res.to_json_obj()
    obj["provenance"] = _provenance(inputs)
    text = f"{res.status}" + (f" ({res.reason})" if res.reason else "") + f": {len(res.candidates)} candidates, {len(res.strata)} strata"
    code = EXIT_BUDGET if res.reason == "budget" else EXIT_OK
    return Result(obj, res.status, text, code)


# ---------------------------------------------------------------------------
# batch
# ---------------------------------------------------------------------------

def _run_job(job: dict, outdir: str, seed: int, base: str) -> dict:
    argv = list(job["argv"])
    if "--seed" not in argv and argv and argv[0] != "batch":
        argv += ["--seed", str(job.get("seed", seed))]
    cwd = os.getcwd()
    try:
        os.chdir(base)
        code, result, err = _execute(argv)
    finally:
        os.chdir(cwd)
    name = job["name"]
    row = {"name": name, "argv": argv, "exit": code}
    if result is not None:
        write_atomic(Path(outdir) / f"{name}.json", _dump(result.artifact))
        row["value"] = result.summary
    if err is not None:
        row["error"] = err
    if "expect" in job:
        row["expect"] = job["expect"]
        row["pass"] = row.get("value") == job["expect"]
    return row


def cmd_batch(args) -> Result:
    manifest_path = Path(args.manifest)
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    seed = args.seed if args.seed is not None else manifest.get("seed", 0)
    outdir = Path(args.out or manifest.get("output_dir", "batch_out"))
    if not outdir.is_absolute():
        outdir = Path.cwd() / outdir
    base = str(manifest_path.resolve().parent)
    jobs = manifest["jobs"]
    names = [j["name"] for j in jobs]
    if len(set(names)) != len(names):
        raise TensorBoundsError("job names in a manifest must be unique")
    # manifest budgets become the defaults for its jobs; explicit job flags still win
    budgets = manifest.get("budgets", {})
    if "time" in budgets:
        os.environ["TENSORBOUNDS_BUDGET"] = str(budgets["time"])
    if "entries" in budgets:
        config.ENTRY_BUDGET = int(budgets["entries"])
    workers = args.workers or manifest.get("workers", 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_job, jobs, [str(outdir)] * len(jobs), [seed] * len(jobs), [base] * len(jobs)))
    else:
        rows = [_run_job(j, str(outdir), seed, base) for j in jobs]
    summary = {"manifest": _file_hash(str(manifest_path)), "seed": seed, "version": config.VERSION, "jobs": rows}
    write_atomic(outdir / "summary.json", _dump(summary))
    lines = []
    for row in rows:
        mark = ""
        if "pass" in row:
            mark = "PASS" if row["pass"] else "FAIL"
        lines.append(f"{row['name']:<28} exit={row['exit']} value={row.get('value')!s:<14} {mark}")
    failed = [r for r in rows if r["exit"] not in (EXIT_OK,)]
    code = EXIT_OK if not failed else max(r["exit"] for r in failed)
    if code == EXIT_USAGE:
        code = EXIT_DOMAIN
    return Result(summary, len(rows), "\n".join(lines), code)


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tensorbounds", description="Border rank bounds, symmetry, decompositions and apolarity for 3-tensors.")
    p.add_argument("--version", action="version", version=config.VERSION)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    t = sub.add_parser("tensor", help="construct and inspect tensors")
    tsub = t.add_subparsers(dest="action", parser_class=_Parser)
    tb = tsub.add_parser("build")
    _add_tensor_args(tb)
    _add_output_args(tb)
    tb.add_argument("--seed", type=int, default=0)
    tb.set_defaults(func=cmd_tensor_build)
    ti = tsub.add_parser("info")
    _add_tensor_args(ti)
    _add_output_args(ti)
    ti.add_argument("--seed", type=int, default=0)
    ti.set_defaults(func=cmd_tensor_info)

    b = sub.add_parser("bounds", help="border rank lower bound certificates")
    bsub = b.add_subparsers(dest="method", parser_class=_Parser)
    for name in ("flattening", "commutator", "koszul", "best"):
        q = bsub.add_parser(name)
        _add_tensor_args(q)
        _add_output_args(q)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--trials", type=int, default=20)
        q.add_argument("--factor", default="A", choices=["A", "B", "C"])
        q.add_argument("--p", type=int)
        q.add_argument("--strategy", default="coordinate", choices=["coordinate", "coordinate_only", "random"])
        q.add_argument("--budget", type=float, help="seconds (default: TENSORBOUNDS_BUDGET or %g)" % config.TIME_BUDGET)
        q.set_defaults(func=cmd_bounds)
    bv = bsub.add_parser("verify")
    bv.add_argument("--cert", required=True)
    bv.add_argument("--tensor")
    _add_output_args(bv)
    bv.add_argument("--seed", type=int, default=0)
    bv.set_defaults(func=cmd_bounds_verify)

    s = sub.add_parser("symmetry", help="symmetry Lie algebra")
    ssub = s.add_subparsers(dest="action", parser_class=_Parser)
    for name in ("dim", "report"):
        q = ssub.add_parser(name, help="block report for skeletal tensors" if name == "report" else "dimensions")
        _add_tensor_args(q)
        _add_output_args(q)
        q.add_argument("--basis", metavar="PATH", help="write the basis triples here")
        q.add_argument("--seed", type=int, default=0)
        q.set_defaults(func=cmd_symmetry)

    d = sub.add_parser("decompose", help="rank decompositions")
    dsub = d.add_subparsers(dest="action", parser_class=_Parser)
    da = dsub.add_parser("als")
    _add_tensor_args(da)
    _add_output_args(da)
    da.add_argument("-r", type=int, required=True)
    da.add_argument("--seed", type=int, default=0)
    da.add_argument("--restarts", type=int, default=8)
    da.add_argument("--max-iters", type=int, default=5000)
    da.add_argument("--residual-tol", type=float, default=1e-8)
    da.add_argument("--blowup-threshold", type=float, default=1e3)
    da.add_argument("--regularization", type=float, default=0.0)
    da.add_argument("--no-line-search", action="store_true")
    da.add_argument("--histories", action="store_true", help="keep per-iteration histories in the artifact")
    da.set_defaults(func=cmd_decompose_als)
    dv = dsub.add_parser("verify")
    _add_tensor_args(dv)
    _add_output_args(dv)
    dv.add_argument("--decomposition", required=True)
    dv.add_argument("--tol", type=float, default=1e-8)
    dv.add_argument("--seed", type=int, default=0)
    dv.set_defaults(func=cmd_decompose_verify)

    m = sub.add_parser("mm", help="recursive matrix multiplication")
    msub = m.add_subparsers(dest="action", parser_class=_Parser)
    mr = msub.add_parser("run")
    _add_output_args(mr)
    mr.add_argument("--alg", default="strassen", help="strassen, classical or file:D.json")
    mr.add_argument("--size", type=int, required=True)
    mr.add_argument("--cutoff", type=int, default=1)
    mr.add_argument("--count-only", action="store_true")
    mr.add_argument("--seed", type=int, default=0)
    mr.add_argument("--height", type=int, default=9)
    mr.set_defaults(func=cmd_mm_run)
    me = msub.add_parser("exponent")
    _add_output_args(me)
    me.add_argument("--alg", default="strassen")
    me.add_argument("--sizes", default="2,4,8,16,32,64,128,256")
    me.add_argument("--cutoff", type=int, default=1)
    me.add_argument("--execute", action="store_true", help="run the products instead of counting")
    me.add_argument("--seed", type=int, default=0)
    me.set_defaults(func=cmd_mm_exponent)

    a = sub.add_parser("apolarity", help="border apolarity feasibility")
    asub = a.add_subparsers(dest="action", parser_class=_Parser)
    at = asub.add_parser("test")
    _add_tensor_args(at)
    _add_output_args(at)
    at.add_argument("-r", type=int, required=True)
    at.add_argument("--max-degree", type=int, default=3)
    at.add_argument("--borel", default="auto", choices=["auto", "generic", "symmetry", "matmul"])
    at.add_argument("--budget", type=float, help="seconds (default: TENSORBOUNDS_BUDGET or %g)" % config.TIME_BUDGET)
    at.add_argument("--seed", type=int, default=0)
    at.set_defaults(func=cmd_apolarity)

    bt = sub.add_parser("batch", help="run a manifest of jobs")
    bt.add_argument("--manifest", required=True)
    bt.add_argument("--out")
    bt.add_argument("--workers", type=int)
    bt.add_argument("--seed", type=int)
    _add_output_args(bt)
    bt.set_defaults(func=cmd_batch)
    return p


def _execute(argv: Sequence[str]):
    """Parse and run; returns (exit code, Result or None, error dict or None)."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
        if not hasattr(args, "func"):
            raise UsageError("missing subcommand; see --help")
        result = args.func(args)
        if getattr(args, "output", None):
            write_atomic(args.output, _dump(result.artifact))
        dest = getattr(args, "json", None)
        if dest not in (None, "-"):
            write_atomic(dest, _dump(result.artifact))
        result.stdout_json = dest == "-"
        return result.code, result, None
    except UsageError as exc:
        return EXIT_USAGE, None, {"error": "usage", "message": str(exc)}
    except ResourceBudgetExceeded as exc:
        return EXIT_BUDGET, None, {"error": "ResourceBudgetExceeded", "message": str(exc)}
    except (TensorBoundsError, ValueError, KeyError, ZeroDivisionError, OSError) as exc:
        return EXIT_DOMAIN, None, {"error": type(exc).__name__, "message": str(exc)}


def run(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if any(a in ("-h", "--help", "--version") for a in argv):
        try:
            build_parser().parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        except UsageError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_USAGE
    code, result, err = _execute(argv)
    if err is not None:
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return code
    if result.stdout_json:
        sys.stdout.write(_dump(result.artifact))
    else:
        print(result.text)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
