"""``chorcc``: parse, check, project and run choreographies.

Exit codes: 0 pass, 1 check failure, 2 deadlock, 3 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import serial
from .chorproj import project_chor
from .corpus import default_params
from .diagnostics import ChorError, ParseError, SchemaError, Severity, SourceFile
from .epproj import EndpointProgram, build_channel_table, pretty_ep, project_all, project_ep
from .parser import parse
from .pretty import pretty
from .runtime import (RANDOM, ROUND_ROBIN, RuntimeFault, heap_json, merge_and_compare, parse_params,
                      run_choreography, run_endpoints, run_verification_ir)
from .vir import pretty_vir
from .wellformed import check_wellformed

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_DEADLOCK = 2
EXIT_USAGE = 3

SCHEMA_VERSION = 1


class Usage(Exception):
    """Bad invocation or unreadable input; exits with EXIT_USAGE."""


@dataclass
class Outcome:
    code: int = EXIT_PASS
    summary: list[str] = field(default_factory=list)
    result: dict[str, Any] = field(default_factory=dict)
    diagnostics: list[dict] = field(default_factory=list)


# ----------------------------------------------------------------------------
# Helpers

def _load(path: str):
    try:
        src = SourceFile.read(path)
    except OSError as exc:
        raise Usage(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse(src, path)


def _checked(path: str, out: Outcome):
    program = _load(path)
    diags = check_wellformed(program)
    out.diagnostics += [d.to_json() for d in diags]
    for d in diags:
        print(f"{path}:{d}", file=sys.stderr)
    if any(d.severity == Severity.ERROR for d in diags):
        out.code = EXIT_FAIL
        return None
    return program


def _write(out_dir: Path, name: str, text: str, written: list[str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text, encoding="utf-8")
    written.append(str(path))


def _config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise Usage(f"cannot read config {path}: {exc.strerror or exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise Usage(f"invalid config {path}: {exc}") from None


# ----------------------------------------------------------------------------
# Subcommands

def cmd_parse(args, out: Outcome) -> None:
    program = _load(args.input)
    text = pretty(program)
    out.summary.append(text.rstrip("\n"))
    out.result = {"decls": len(program.decls), "ast": serial.encode(program)}
    if args.out:
        written: list[str] = []
        stem = Path(args.input).stem
        _write(Path(args.out), f"{stem}.chor", text, written)
        _write(Path(args.out), f"{stem}.ast.json", serial.to_json(program), written)
        out.result["files"] = written


def cmd_check(args, out: Outcome) -> None:
    program = _checked(args.input, out)
    errors = sum(1 for d in out.diagnostics if d["severity"] == "error")
    warnings = len(out.diagnostics) - errors
    out.result = {"errors": errors, "warnings": warnings}
    out.summary.append("OK" if program is not None else f"{errors} error(s)")
    if warnings:
        out.summary.append(f"{warnings} warning(s)")


def cmd_project_chor(args, out: Outcome) -> None:
    program = _checked(args.input, out)
    if program is None:
        return
    v = project_chor(program)
    text = pretty_vir(v)
    out.result = {"rules": sorted(set(v.rules)), "program": serial.encode(v)}
    if args.out:
        written: list[str] = []
        _write(Path(args.out), f"{v.name}.vir.txt", text, written)
        _write(Path(args.out), f"{v.name}.vir.json", serial.to_json(v), written)
        out.result["files"] = written
        out.summary += written
    else:
        out.summary.append(text.rstrip("\n"))


def cmd_project_ep(args, out: Outcome) -> None:
    program = _checked(args.input, out)
    if program is None:
        return
    if args.all:
        programs = project_all(program)
    else:
        program.choreography.endpoint(args.sort)
        programs = {args.sort: project_ep(program, args.sort)}
    written: list[str] = []
    out_dir = Path(args.out)
    for name, ep in programs.items():
        _write(out_dir, f"{name}.ep.json", serial.to_json(ep), written)
        _write(out_dir, f"{name}.ep.txt", pretty_ep(ep), written)
    if args.all:
        table = build_channel_table(program.choreography)
        _write(out_dir, "channels.json", json.dumps(table.to_dict(), indent=2, sort_keys=True) + "\n", written)
    out.result = {"files": written, "rules": sorted({r for ep in programs.values() for r in ep.rules})}
    out.summary += written


def _load_programs(directory: str, program) -> dict[str, EndpointProgram]:
    programs = {}
    for ep in program.choreography.endpoints:
        path = Path(directory) / f"{ep.name}.ep.json"
        try:
            node = serial.from_json(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise Usage(f"cannot read {path}: {exc.strerror or exc}") from None
        if not isinstance(node, EndpointProgram):
            raise SchemaError(str(path), "expected an endpoint program")
        programs[ep.name] = node
    return programs


def cmd_run(args, out: Outcome) -> None:
    config = _config(args.config)
    program = _checked(args.input, out)
    if program is None:
        return
    params = {**default_params(program), **config.get("params", {})}
    if args.params:
        try:
            params.update(parse_params(args.params))
        except ValueError as exc:
            raise Usage(str(exc)) from None
    seeds = args.seeds if args.seeds is not None else int(config.get("seeds", 1))
    schedule = args.schedule or config.get("schedule", ROUND_ROBIN)
    if schedule not in (ROUND_ROBIN, RANDOM):
        raise Usage(f"unknown schedule {schedule!r}")
    mode = args.mode
    out.result = {"mode": mode, "params": params}

    reference = None
    if mode in ("chor", "equiv"):
        reference = run_choreography(program, params).snapshot()
        out.result["reference"] = reference
        out.summary.append("chor: PASS")
    if mode in ("ir", "equiv"):
        report = run_verification_ir(project_chor(program), params)
        out.result["ir"] = report.to_json()
        out.summary.append(f"ir: {report.verdict}")
        out.summary += [f"  {f}" for f in report.failures]
        if report.failures:
            out.code = EXIT_FAIL
    if mode in ("endpoints", "equiv"):
        programs = _load_programs(args.programs, program) if args.programs else project_all(program)
        seed_list = [None] if schedule == ROUND_ROBIN else list(range(args.seed, args.seed + seeds))
        runs = []
        heaps = set()
        for seed in seed_list:
            fragments, report = run_endpoints(program, programs, params, schedule, seed)
            run_json = report.to_json()
            heaps.add(heap_json(report.heap))
            if reference is not None:
                verdict = merge_and_compare(fragments, reference)
                run_json["compare"] = str(verdict).split("\n")[0]
                run_json["diffs"] = [str(d) for d in verdict.diffs]
                if not verdict.equal:
                    out.code = max(out.code, EXIT_FAIL)
                    out.summary.append(str(verdict))
            runs.append(run_json)
            if report.deadlock:
                out.code = EXIT_DEADLOCK
                out.summary.append(f"endpoints (seed {seed}): DEADLOCK")
                out.summary += [f"  {b}" for b in report.blocked]
            elif report.failures:
                out.code = max(out.code, EXIT_FAIL)
                out.summary.append(f"endpoints (seed {seed}): FAIL")
                out.summary += [f"  {f}" for f in report.failures]
        out.result["endpoints"] = runs
        out.result["distinct_heaps"] = len(heaps)
        if out.code == EXIT_PASS:
            out.summary.append(f"endpoints: PASS ({len(seed_list)} schedule(s), {len(heaps)} distinct heap(s))")
            if reference is not None:
                out.summary.append("EQUAL")
    out.summary.append({EXIT_PASS: "PASS", EXIT_FAIL: "FAIL", EXIT_DEADLOCK: "DEADLOCK"}[out.code])


# ----------------------------------------------------------------------------
# Entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chorcc", description="Compile and run parameterized choreographies.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("input", help="choreography source file")
        p.add_argument("--json", action="store_true", help="print a machine-readable result")

    p = sub.add_parser("parse", help="parse and pretty-print")
    common(p)
    p.add_argument("--out", help="write the pretty text and JSON AST here")
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("check", help="check well-formedness")
    common(p)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("project-chor", help="emit the verification program")
    common(p)
    p.add_argument("--out", help="output directory")
    p.set_defaults(fn=cmd_project_chor)

    p = sub.add_parser("project-ep", help="emit endpoint programs")
    common(p)
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--sort", help="project a single endpoint or family")
    which.add_argument("--all", action="store_true", help="project every endpoint and write channels.json")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.set_defaults(fn=cmd_project_ep)

    p = sub.add_parser("run", help="execute and check")
    common(p)
    p.add_argument("--mode", choices=("chor", "ir", "endpoints", "equiv"), default="equiv")
    p.add_argument("--params", help="parameter values as k=v,...")
    p.add_argument("--seeds", type=int, help="number of random schedules")
    p.add_argument("--seed", type=int, default=0, help="first random seed")
    p.add_argument("--schedule", choices=(ROUND_ROBIN, RANDOM))
    p.add_argument("--programs", help="directory of <sort>.ep.json files to run instead of projecting")
    p.add_argument("--config", help="TOML file with [params], seeds and schedule defaults")
    p.set_defaults(fn=cmd_run)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE
    out = Outcome()
    error = None
    try:
        args.fn(args, out)
    except ParseError as exc:
        out.code = EXIT_USAGE
        out.diagnostics += [d.to_json() for d in exc.diagnostics]
        error = str(exc)
    except (Usage, SchemaError) as exc:
        out.code = EXIT_USAGE
        error = str(exc)
    except (RuntimeFault, ChorError) as exc:
        out.code = EXIT_FAIL
        error = str(exc)
    if error:
        print(f"chorcc: {error}", file=sys.stderr)
    if args.json:
        doc = {
            "schema": SCHEMA_VERSION,
            "command": args.command,
            "input": args.input,
            "exit_code": out.code,
            "status": "ok" if out.code == EXIT_PASS else "error",
            "error": error,
            "diagnostics": out.diagnostics,
            "result": out.result,
        }
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        for line in out.summary:
            print(line)
    return out.code


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
