"""Command-line front end for ``.br`` files.

Every subcommand collects :class:`CheckReport` objects and artifacts into a
run report.  Exit status is 0 when every requested check passes, 1 when a
check ran and failed, and the error's code (10 parse, 20 precondition,
30 refusal, 40 internal) when a module error escapes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import AvBracketError, InternalError, PreconditionError
from .report import CheckReport, jsonable

SCHEMA = "avbracket/1"


@dataclass
class RunReport:
    command: str
    digest: str
    checks: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    lines: list = field(default_factory=list)
    exit_status: int = 0
    error: str | None = None

    def add(self, report: CheckReport, formatter=str) -> None:
        self.checks.append((report, formatter))
        self.lines.append(report.summary())
        self.lines.extend("  " + t for t in report.residual_text(formatter))

    def say(self, text: str) -> None:
        self.lines.append(text)

    def finish(self) -> int:
        if self.error is None:
            self.exit_status = 0 if all(r.passed for r, _ in self.checks) else 1
        return self.exit_status

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "command": self.command,
            "inputs_digest": self.digest,
            "checks": [{"name": r.name, "status": r.status,
                        "residual": [[label, fmt(v)] for label, v in r.residual],
                        "details": jsonable(r.details)} for r, fmt in self.checks],
            "artifacts": jsonable(self.artifacts),
            "exit_status": self.exit_status,
            "error": self.error,
        }


def _digest(args: argparse.Namespace) -> str:
    h = hashlib.sha256()
    for key in sorted(vars(args)):
        if key in ("func", "json"):
            continue
        h.update(f"{key}={getattr(args, key)!r};".encode())
    path = getattr(args, "file", None)
    if path:
        with open(path, "rb") as fh:
            h.update(fh.read())
    return h.hexdigest()


def _load(args):
    from .dsl import load_spec
    try:
        return load_spec(args.file)
    except OSError as exc:
        raise PreconditionError(f"cannot read {args.file}: {exc.strerror}") from exc


def _density(spec, text: str):
    """A named density from the file, or an inline polynomial."""
    from .dsl import _Parser
    if text in spec.densities:
        return spec.densities[text]
    parser = _Parser(text)
    parser.fs = spec.fieldset
    poly = parser.poly(parser.jet)
    if parser.tok.kind != "eof":
        parser.fail(f"unexpected {parser.tok.text!r} after polynomial")
    return poly


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args, run: RunReport) -> None:
    from .locbracket import jacobi_check, skew_check
    spec = _load(args)
    B = spec.bracket(args.bracket)
    fmt = spec.fieldset.format
    skew = skew_check(B)
    run.add(skew, fmt)
    if skew.passed:
        run.add(jacobi_check(B), fmt)
    else:
        run.say("jacobi: skipped (bracket is not skew-symmetric)")


def cmd_flow(args, run: RunReport) -> None:
    from .locbracket import hamiltonian_flow
    spec = _load(args)
    B = spec.bracket(args.bracket)
    fs = spec.fieldset
    flow = hamiltonian_flow(B, _density(spec, args.ham))
    run.artifacts["flow"] = {}
    for name, f in zip(fs.names, flow):
        run.say(f"{name}_t = {fs.format(f)}")
        run.artifacts["flow"][name] = fs.format(f)


def cmd_average(args, run: RunReport) -> None:
    from .averaging import DensitySet, commuting_set_check, flux_extract, torus_average
    from .jetcalc import ZERO
    spec = _load(args)
    B = spec.bracket(args.bracket)
    fs = spec.fieldset
    names = [n.strip() for n in args.densities.split(",") if n.strip()]
    dens = DensitySet(tuple(_density(spec, n) for n in names))
    H = _density(spec, args.ham) if args.ham else ZERO
    rep = commuting_set_check(B, H, dens)
    run.add(rep, fs.format)
    if rep.passed:
        fluxes = flux_extract(B, dens, H if args.ham else None)
        out = {}
        for (g, r), fl in sorted(fluxes.pair_fluxes.items()):
            text = [fs.format(x) for x in fl]
            out[f"{names[g]},{names[r]}"] = text
            run.say(f"flux({names[g]},{names[r]}) = ({', '.join(text)})")
        for g, fl in sorted(fluxes.time_fluxes.items()):
            text = [fs.format(x) for x in fl]
            out[f"{names[g]},H"] = text
            run.say(f"time flux({names[g]}) = ({', '.join(text)})")
        run.artifacts["fluxes"] = out
    if args.family is not None:
        fam = spec.family(args.family or None)
        table = {}
        for pt in fam.grid:
            key = "(" + ", ".join(str(Fraction(x)) for x in pt) + ")"
            vals = [torus_average(fam, p, pt) for p in dens.densities]
            table[key] = [repr(v) for v in vals]
            run.say(f"<{', '.join(names)}> at {key} = " + ", ".join(f"{v:.15g}" for v in vals))
        run.artifacts["averages"] = table


def cmd_canonicalize(args, run: RunReport) -> None:
    from .canonform.admissible import AdmissibleBracket, canonicalize_thm21
    from .canonform.transform import transform_bracket
    spec = _load(args)
    B = spec.bracket(args.bracket)
    fs = spec.fieldset
    m = len(fs.by_role("phase"))
    if not m:
        raise PreconditionError("no phase fields declared")
    A = AdmissibleBracket.from_local(B, m)
    T = canonicalize_thm21(A)
    dens = list(range(m, 2 * m))
    shifts = {}
    for a in dens:
        qt = -T.shift(a)
        run.say(f"q~[{fs.names[a]}] = {fs.format(qt)}")
        run.say(f"{fs.names[a]} -> {fs.format(T.images[a])}")
        shifts[fs.names[a]] = fs.format(qt)
    run.artifacts["q_tilde"] = shifts
    Bn = transform_bracket(B, T)
    items = tuple((f"{{{fs.names[a]},{fs.names[b]}}}[{','.join(map(str, l))}]", c)
                  for a in dens for b in dens for l, c in sorted(Bn.entry(a, b).items()))
    run.add(CheckReport("canonical_verification", items), fs.format)


def cmd_pseudo(args, run: RunReport) -> None:
    from .canonform.sqn import (canonical_form_check, classify_annihilator_part,
                                pseudo_canonicalize_thm31, reduce_to_sqn)
    from .canonform.transform import transform_bracket
    spec = _load(args)
    B = spec.bracket(args.bracket)
    fs = spec.fieldset
    red = reduce_to_sqn(B)
    run.add(red.report, fs.format)
    if not red.report.passed:
        return
    Bq = red.bracket
    cls = classify_annihilator_part(Bq)
    run.say(f"annihilator part: {cls.describe()}")
    run.artifacts["classification"] = {"nondegenerate": cls.nondegenerate, "simple": cls.simple,
                                       "directions": [p + 1 for p in cls.directions]}
    T = pseudo_canonicalize_thm31(Bq)
    images = {}
    for i, name in enumerate(fs.names):
        images[name] = fs.format(T.images[i])
        run.say(f"{name} -> {images[name]}")
    run.artifacts["transform"] = images
    run.add(canonical_form_check(transform_bracket(B, T), Bq.m, Bq.s), fs.format)


def cmd_obstruct(args, run: RunReport) -> None:
    from .canonform.obstruction import decoupling_obstruction_search
    from .canonform.sqn import reduce_to_sqn
    spec = _load(args)
    B = spec.bracket(args.bracket)
    fs = spec.fieldset
    red = reduce_to_sqn(B)
    if not red.report.passed:
        raise PreconditionError("bracket is not in reduced (S, Q, N) form: "
                                + "; ".join(red.report.residual_text(fs.format)[:4]))
    verdict = decoupling_obstruction_search(red.bracket, args.deg,
                                            all_certificates=args.all, workers=args.workers)
    run.say(verdict.summary())
    for fact in verdict.ladder:
        run.say(f"  ladder: {fact}")
    for cert in verdict.certificates:
        run.say(f"  certificate: {cert.describe(fs)}")
    for note in verdict.notes:
        run.say(f"  note: {note}")
    run.artifacts["verdict"] = {
        "verdict": verdict.verdict,
        "summary": verdict.summary(),
        "degree_bound": verdict.degree_bound,
        "ladder": list(verdict.ladder),
        "certificates": [{"direction": c.direction + 1,
                          "variable": fs.var_name(_jet(fs, c.phase, c.slot)),
                          "support": [i + 1 for i in c.support],
                          "equations": list(c.equations),
                          "groebner": list(c.groebner)} for c in verdict.certificates],
    }
    if verdict.witness is not None:
        run.artifacts["witness"] = {n: fs.format(p) for n, p in zip(fs.names, verdict.witness.images)}


def _jet(fs, phase, slot):
    from .jetcalc import JetVar
    return JetVar.of(phase, tuple(int(k == slot) for k in range(fs.dim)))


def cmd_generators(args, run: RunReport) -> None:
    from .canonform.generators import (annihilator_metric_generators, canonical_generators,
                                       canonical_solution_space, metric_solution_space,
                                       span_compare)
    m, d = args.m, args.d
    kind = args.kind
    if kind == "shift":
        l_max = args.l if args.l is not None else min(m - 1, d)
        basis = canonical_generators(m, d, l_max)
    else:
        l_max = args.l if args.l is not None else min(m, d - 1)
        basis = annihilator_metric_generators(m, d, l_max)
    fs = basis.fieldset
    out = []
    for (rows, cols), vec in basis.generators:
        text = [fs.format(v) for v in vec]
        out.append({"rows": [r + 1 for r in rows], "cols": [c + 1 for c in cols], "vector": text})
        run.say(f"rows {[r + 1 for r in rows]} cols {[c + 1 for c in cols]}: ({', '.join(text)})")
    run.artifacts["generators"] = out
    if args.verify is not None:
        space = (canonical_solution_space if kind == "shift" else metric_solution_space)(
            m, d, args.verify)
        cmp = span_compare(basis.vectors(), space)
        items = []
        if not cmp["b_in_a"]:
            items.append(("solution space not spanned by generators", cmp["dim_b"]))
        if not cmp["a_in_b"]:
            items.append(("generator outside solution space", cmp["dim_a"]))
        run.add(CheckReport("generator_completeness", tuple(items), cmp))


def cmd_dnflat(args, run: RunReport) -> None:
    from .hydro1d import DN1DBracket, constant_form_verify, flatness_check
    from .locbracket import jacobi_check
    spec = _load(args)
    B = DN1DBracket.from_local(spec.bracket(args.bracket))
    fs = spec.fieldset
    report = flatness_check(B)
    for line in report.lines(fs):
        run.say(line)
    run.add(CheckReport("flatness", tuple(("R[" + ",".join(str(i + 1) for i in k) + "]", v)
                                              for k, v in sorted(report.riemann.items()))
                        + report.symmetry + report.torsion + report.compatibility), fs.format)
    if args.coords:
        coords = [_density(spec, c.strip()) for c in args.coords.split(",")]
        cf = constant_form_verify(B, coords)
        run.add(cf, fs.format)
        if cf.passed:
            run.say(f"signs: {cf.details['signs']}")


def cmd_lagrangian(args, run: RunReport) -> None:
    from .canonform.lagrangian import lagrangian_emit
    spec = _load(args)
    res = lagrangian_emit(spec.bracket(args.bracket), _density(spec, args.ham))
    run.say(f"L = {res.format()}")
    run.artifacts["lagrangian"] = res.format()
    if res.reduced is not None:
        run.say(f"reduced L = {res.format_reduced()}")
        run.artifacts["reduced"] = res.format_reduced()
    run.say(f"note: {res.note}")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avbracket",
                                     description="Exact checks and canonical forms for local brackets.")
    parser.add_argument("--json", metavar="OUT", help="write the run report as JSON ('-' for stdout)")
    parser.add_argument("--seed", type=int, default=0, help="seed for every sampling step")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, helptext, with_file=True):
        p = sub.add_parser(name, help=helptext)
        if with_file:
            p.add_argument("file")
            p.add_argument("--bracket", help="bracket block to use when the file has several")
        p.set_defaults(func=func)
        return p

    add("check", cmd_check, "skew-symmetry and Jacobi identity")
    p = add("flow", cmd_flow, "Hamiltonian flow of a density")
    p.add_argument("--ham", required=True, help="density name or inline polynomial")
    p = add("average", cmd_average, "commuting densities, fluxes and torus averages")
    p.add_argument("--densities", required=True, help="comma-separated density names")
    p.add_argument("--ham", help="Hamiltonian density")
    p.add_argument("--family", nargs="?", const="", default=None, help="family block to average over")
    add("canonicalize", cmd_canonicalize, "shift removing {Q,Q} from an admissible bracket")
    add("pseudo", cmd_pseudo, "pseudo-canonical form with annihilators")
    p = add("obstruct", cmd_obstruct, "bounded search for an annihilator-decoupling transform")
    p.add_argument("--deg", type=int, default=2, help="degree bound (default 2)")
    p.add_argument("--all", action="store_true", help="report every certificate")
    p.add_argument("--workers", type=int, default=1, help="threads for independent blocks")
    p = add("generators", cmd_generators, "minor-determinant generator bases", with_file=False)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--l", type=int, default=None, help="largest minor size (default: maximal)")
    p.add_argument("--kind", choices=("shift", "metric"), default="shift")
    p.add_argument("--verify", type=int, default=None, metavar="DEG",
                   help="compare with the exact solution space up to this degree")
    p = add("dnflat", cmd_dnflat, "curvature and constant form of a 1D hydrodynamic bracket")
    p.add_argument("--coords", help="comma-separated flat coordinates (density names or polynomials)")
    p = add("lagrangian", cmd_lagrangian, "space-time Lagrangian of a canonical bracket")
    p.add_argument("--ham", required=True)
    return parser


def run_command(argv) -> RunReport:
    args = build_parser().parse_args(argv)
    run = RunReport(args.command, "")
    try:
        run.digest = _digest(args)
        args.func(args, run)
        run.finish()
    except AvBracketError as exc:
        run.error = f"{type(exc).__name__}: {exc}"
        run.exit_status = exc.exit_code
    except RecursionError as exc:
        err = InternalError(str(exc))
        run.error = f"InternalError: {err}"
        run.exit_status = err.exit_code
    except OSError as exc:
        run.error = f"PreconditionError: {exc}"
        run.exit_status = PreconditionError.exit_code
    run.args = args
    return run


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    run = run_command(argv)
    for line in run.lines:
        print(line)
    if run.error:
        print(f"error: {run.error}", file=sys.stderr)
    target = getattr(run, "args", None) and run.args.json
    if target:
        text = json.dumps(run.to_json(), indent=2, sort_keys=True) + "\n"
        if target == "-":
            sys.stdout.write(text)
        else:
            with open(target, "w", encoding="utf-8") as fh:
                fh.write(text)
    return run.exit_status


if __name__ == "__main__":
    sys.exit(main())
