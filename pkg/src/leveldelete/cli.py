"""Command-line front end: ``leveldelete {build,verify,table}``.

Exit codes: 0 success, 1 a verification check failed, 2 inadmissible
deletion set without ``--force``, 3 invalid parameters or arguments,
4 a check was indeterminate.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
import tempfile
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np

from .family_catalog import (ConsistencyError, DomainError, Family, ParameterError, Poly, System,
                             energy, eta, make_system, sample_window)
from .krein_adler import (InadmissibleError, NonHermitianWarning, build_modified, dqm_modified_V,
                          modified_eigenfunction, modified_poly, modified_potential_U, validate_deletion,
                          weight_sq)
from .special_ell import xi_ell
from .verify import gram_matrix, run_suite

SCHEMA_VERSION = 1

EXIT_OK, EXIT_FAILED, EXIT_INADMISSIBLE, EXIT_PARAMS, EXIT_INDETERMINATE = 0, 1, 2, 3, 4

_NUM = r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX = re.compile(rf"^(?P<re>{_NUM})?(?P<im>[+-](?:\d+(?:\.\d*)?|\.\d+)?(?:[eE][+-]?\d+)?)[ij]$")


class ArgumentError(ValueError):
    """A command-line value could not be parsed."""


# ---------------------------------------------------------------------------
# Parsing and formatting
# ---------------------------------------------------------------------------

def parse_value(text: str):
    """Parse ``5/2``, ``1.5``, ``-3`` (exact) or ``a+bi`` (complex)."""
    t = text.strip().replace(" ", "")
    if not t:
        raise ArgumentError("empty value")
    if t[-1] in "ij":
        m = _COMPLEX.match(t)
        if m is None:
            raise ArgumentError(f"cannot parse complex literal {text!r}")
        im = m.group("im")
        im = float(im + "1") if im in "+-" else float(im)
        return complex(float(m.group("re") or 0.0), im)
    try:
        return Fraction(t)
    except (ValueError, ZeroDivisionError):
        raise ArgumentError(f"cannot parse number {text!r}") from None


def parse_params(text: str | None) -> dict:
    out: dict = {}
    if not text:
        return out
    for item in text.split(","):
        if "=" not in item:
            raise ArgumentError(f"--params: expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        k = k.strip()
        if k in out:
            raise ArgumentError(f"--params: {k} given twice")
        try:
            out[k] = parse_value(v)
        except ArgumentError as e:
            raise ArgumentError(f"--params {k}: {e}") from None
    return out


def parse_int_list(text: str | None, flag: str) -> list[int]:
    if not text:
        return []
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ArgumentError(f"{flag}: expected comma-separated integers, got {text!r}") from None


def format_value(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, complex):
        return f"{v.real!r}{'-' if v.imag < 0 else '+'}{abs(v.imag)!r}i"
    return repr(float(v))


def _json_number(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else int(v)
    if isinstance(v, (complex, np.complexfloating)):
        v = complex(v)
        return v.real if v.imag == 0 else [v.real, v.imag]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    return v


def _coeffs(p: Poly) -> list:
    return [_json_number(c) for c in p]


def describe_args(desc: System, deleted) -> str:
    """Arguments that rebuild the same system."""
    parts = [f"--family {desc.family.value}"]
    if desc.par:
        parts.append("--params " + ",".join(f"{k}={format_value(v)}" for k, v in desc.par.items()))
    if deleted:
        parts.append("--delete " + ",".join(str(d) for d in deleted))
    return " ".join(parts)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: Path, header: list[str], rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    _atomic_write(path, buf.getvalue())


def _write_json(path: Path, obj):
    _atomic_write(path, json.dumps(obj, indent=2, default=_json_number) + "\n")


def _save_figure(fig, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.stem}.", suffix=".png")
    os.close(fd)
    try:
        fig.savefig(tmp, dpi=120)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


# ---------------------------------------------------------------------------
# Job specification
# ---------------------------------------------------------------------------

def _job(args):
    params = parse_params(args.params)
    if args.ell is not None:
        if args.delete:
            raise ArgumentError("--ell and --delete are mutually exclusive")
        if args.ell < 0:
            raise ArgumentError("--ell must be non-negative")
        deleted = list(range(1, args.ell + 1))
    else:
        deleted = parse_int_list(args.delete, "--delete")
    levels = parse_int_list(args.levels, "--levels")
    desc = make_system(args.family, **params)
    try:
        deletion = validate_deletion(deleted)
    except ValueError as e:
        raise ArgumentError(f"--delete: {e}") from None
    return desc, deletion, levels


def _default_levels(deletion, count: int = 5) -> list[int]:
    out, n = [], 0
    while len(out) < count:
        if n not in deletion.levels:
            out.append(n)
        n += 1
    return out


def _build(desc, deletion, force):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonHermitianWarning)
        sysm = build_modified(desc, deletion, force=force)
    return sysm, [str(w.message) for w in caught]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_build(args) -> int:
    desc, deletion, levels = _job(args)
    print(f"family: {desc.family.value} ({desc.regime})")
    print(f"parameters: {', '.join(f'{k}={format_value(v)}' for k, v in desc.par.items()) or 'none'}")
    print(f"deleted levels: {list(deletion.levels)}")
    print(f"mu: {deletion.mu}")
    if not deletion.admissible:
        print(f"admissible: no (witness m={deletion.witness})")
        if not args.force:
            return EXIT_INADMISSIBLE
    else:
        print("admissible: yes")
    sysm, notes = _build(desc, deletion, args.force)
    for n in notes:
        print(f"warning: {n}")
    prefix = list(deletion.levels) == list(range(1, deletion.ell + 1))
    summary = {
        "schema_version": SCHEMA_VERSION, "family": desc.family.value,
        "params": {k: format_value(v) for k, v in desc.par.items()},
        "deleted": list(deletion.levels), "mu": deletion.mu, "admissible": deletion.admissible,
        "witness": deletion.witness, "hermitian": sysm.hermitian,
        "denominator": _coeffs(sysm.denominator),
    }
    if prefix and deletion.ell:
        xi = xi_ell(desc, deletion.ell)
        summary["xi"] = _coeffs(xi)
        print(f"xi coefficients (constant first): {_fmt_list(xi)}")
    print(f"determinant denominator (constant first): {_fmt_list(sysm.denominator)}")
    levels = levels or _default_levels(deletion)
    degs = {}
    for n in levels:
        p = modified_poly(sysm, n)
        degs[n] = None if p.is_zero() else int(p.degree)
    summary["degrees"] = {str(k): v for k, v in degs.items()}
    print("degrees: " + ", ".join(f"P[{n}]={'deleted' if d is None else d}" for n, d in degs.items()))
    print(f"reproduce: {describe_args(desc, deletion.levels)}")
    if args.out:
        _write_json(Path(args.out) / "build.json", summary)
    return EXIT_OK


def _fmt_list(p: Poly) -> str:
    return "[" + ", ".join(str(c) if isinstance(c, Fraction) else f"{complex(c).real:.12g}"
                           if complex(c).imag == 0 else f"{complex(c):.12g}" for c in p) + "]"


def cmd_verify(args) -> int:
    desc, deletion, levels = _job(args)
    if not deletion.admissible and not args.force:
        print(f"inadmissible deletion set {list(deletion.levels)} (witness m={deletion.witness})")
        return EXIT_INADMISSIBLE
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonHermitianWarning)
        reports = run_suite(desc, deletion.levels, levels, force=args.force,
                            gridsize=args.grid, tolerance=args.tolerance)
    width = max(len(r.check) for r in reports)
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        if r.indeterminate:
            status = "INDETERMINATE"
        print(f"{r.check:<{width}}  {r.max_residual:10.3e}  tol {r.tolerance:8.1e}  {status}")
    if args.out:
        doc = {"schema_version": SCHEMA_VERSION, "family": desc.family.value,
               "params": {k: format_value(v) for k, v in desc.par.items()},
               "deleted": list(deletion.levels), "reports": [r.to_dict() for r in reports]}
        _write_json(Path(args.out) / "report.json", doc)
    if any(r.indeterminate for r in reports):
        return EXIT_INDETERMINATE
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


def _window(args, desc) -> tuple[float, float]:
    if args.window:
        try:
            lo, hi = (float(v) for v in args.window.split(","))
        except ValueError:
            raise ArgumentError(f"--window: expected lo,hi, got {args.window!r}") from None
        if not lo < hi:
            raise ArgumentError("--window: need lo < hi")
        return lo, hi
    return sample_window(desc)


def cmd_table(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    desc, deletion, levels = _job(args)
    if not deletion.admissible and not args.force:
        print(f"inadmissible deletion set {list(deletion.levels)} (witness m={deletion.witness})")
        return EXIT_INADMISSIBLE
    sysm, notes = _build(desc, deletion, args.force)
    for n in notes:
        print(f"warning: {n}")
    out = Path(args.out or ".")
    lo, hi = _window(args, desc)
    # cell-centred grid: endpoints of the range can be poles
    x = lo + (np.arange(args.grid) + 0.5) * (hi - lo) / args.grid
    levels = levels or _default_levels(deletion, 4)
    bad = [n for n in levels if n in deletion.levels]
    if bad:
        raise ArgumentError(f"--levels: {bad} are deleted")

    fig, ax = plt.subplots(figsize=(6, 4))
    if desc.regime == "ordinary":
        u = modified_potential_U(sysm, x)
        _write_csv(out / "potential.csv", ["x", "U"], zip(x.tolist(), u.tolist()))
        ax.plot(x, u, lw=1.2)
        ax.set_ylabel("U(x)")
    else:
        v = dqm_modified_V(sysm, x)
        _write_csv(out / "potential.csv", ["x", "ReV", "ImV"],
                   zip(x.tolist(), np.real(v).tolist(), np.imag(v).tolist()))
        ax.plot(x, np.real(v), lw=1.2, label="Re V")
        ax.plot(x, np.imag(v), lw=1.2, ls="--", label="Im V")
        ax.legend(frameon=False)
    ax.set_xlabel("x")
    fig.tight_layout()
    _save_figure(fig, out / "potential.png")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    for n in levels:
        if desc.regime == "ordinary":
            phi = modified_eigenfunction(sysm, n, x)
        else:
            phi = np.sqrt(weight_sq(sysm, x)) * np.real(modified_poly(sysm, n)(eta(desc, x)))
        _write_csv(out / f"eigenfunction_{n}.csv", ["x", f"phi_{n}"], zip(x.tolist(), phi.tolist()))
        ax.plot(x, phi, lw=1.0, label=f"n={n}")
    ax.set_xlabel("x")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save_figure(fig, out / "eigenfunctions.png")
    plt.close(fig)

    rows = []
    for n in levels:
        for k, c in enumerate(modified_poly(sysm, n)):
            rows.append([n, k, float(complex(c).real)])
    _write_csv(out / "polynomials.csv", ["n", "power", "coefficient"], rows)

    norms = None
    if sysm.hermitian:
        norms = np.diag(gram_matrix(sysm, levels)).tolist()
    meta = {"schema_version": SCHEMA_VERSION, "family": desc.family.value,
            "params": {k: format_value(v) for k, v in desc.par.items()},
            "deleted": list(deletion.levels), "window": [lo, hi], "grid": args.grid,
            "levels": levels, "energies": [_json_number(energy(desc, n)) for n in levels],
            "norms": norms}
    _write_json(out / "metadata.json", meta)
    print(f"wrote tables for levels {levels} to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    # usage errors share the exit code of invalid parameters
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAMS, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="leveldelete",
                description="Delete energy levels from exactly solvable quantum systems.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--family", required=True, choices=[f.value for f in Family])
    common.add_argument("--params", help="comma-separated k=v; complex values as a+bi")
    grp = common.add_mutually_exclusive_group()
    grp.add_argument("--delete", help="comma-separated levels to delete")
    grp.add_argument("--ell", type=int, help="delete levels 1..N")
    common.add_argument("--levels", help="comma-separated levels to report")
    common.add_argument("--grid", type=int, default=400, help="grid points (default 400)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--force", action="store_true", help="proceed with inadmissible sets")
    common.add_argument("--tolerance", type=float, help="override every check tolerance")
    sub.add_parser("build", parents=[common], help="construct and summarise a deleted system")
    sub.add_parser("verify", parents=[common], help="run the verification suite")
    t = sub.add_parser("table", parents=[common], help="write CSV/JSON tables and PNG plots")
    t.add_argument("--window", help="x window lo,hi (default: the family's sample window)")
    return p


_COMMANDS = {"build": cmd_build, "verify": cmd_verify, "table": cmd_table}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.grid < 5:
        print("error: --grid must be at least 5", file=sys.stderr)
        return EXIT_PARAMS
    try:
        return _COMMANDS[args.command](args)
    except (ArgumentError, ParameterError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARAMS
    except InadmissibleError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except (DomainError, ConsistencyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
