"""Command-line interface: ``effham derive | simulate | catalog | sweep``.

Exit codes: 0 success, 2 parse/usage error, 3 invariant violation or failed
check, 4 numerical guard (step size, ill-conditioning).
"""
from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import itertools
import json
import logging
import math
import random
import sys
from pathlib import Path

import numpy as np

from . import catalog as cat
from .averaging import IllConditionedAverageError, Kernel, auto_kernel, heff_general_static, kernel_feasibility
from .effective import EffectiveHamiltonian, compact_effective, secular_filter, static_part
from .model import bandwidth_report
from .modelfile import InvariantError, ModelError, load_model
from .opalg import HilbertSpace, Operator, is_hermitian
from .propagate import (
    StepSizeError,
    fidelity,
    phase_accumulation,
    propagate,
    state_populations,
)

log = logging.getLogger("effham")

EXIT_OK, EXIT_PARSE, EXIT_INVARIANT, EXIT_NUMERIC = 0, 2, 3, 4
MAX_ROWS = 2000


class CheckFailed(RuntimeError):
    pass


# ---------------------------------------------------------------- output formats


def fmt(x) -> str:
    """17 significant digits, lowercase exponent; round-trips every double."""
    return format(float(x), ".17g")


def dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON with fixed float formatting."""
    pad, inner = " " * indent, " " * (indent + 2)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return json.dumps(str(obj))
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent + 2)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 2) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path: Path, obj) -> None:
    path.write_text(dumps(obj) + "\n", encoding="utf-8")


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(v if isinstance(v, str) else fmt(v) for v in row) for row in rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def matrix_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def heff_to_json(E: EffectiveHamiltonian) -> dict:
    return {
        "space": [{"kind": f.kind, "dim": f.dim} for f in E.space.factors],
        "terms": [{"freq": t.freq, "matrix": matrix_to_json(t.coeff.matrix)} for t in E.terms],
    }


def heff_from_json(doc: dict) -> EffectiveHamiltonian:
    """Inverse of :func:`heff_to_json` (used for round-trip checks)."""
    space = HilbertSpace.of(*((f["kind"], f["dim"]) for f in doc["space"]))
    terms = []
    for t in doc["terms"]:
        m = np.array([[complex(re, im) for re, im in row] for row in t["matrix"]])
        terms.append((Operator(space, m), float(t["freq"])))
    return EffectiveHamiltonian.from_terms(space, terms)


def _store_every(steps: int) -> int:
    return max(1, math.ceil(steps / MAX_ROWS))


def _population_rows(pops):
    return [[t, *row] for t, row in zip(pops.times, pops.values)]


# ---------------------------------------------------------------- commands


def _effective(model, cutoff):
    if not model.interaction.terms:
        raise InvariantError("no harmonic terms")
    E = compact_effective(model.interaction)
    if cutoff is not None:
        E = secular_filter(E, cutoff)
    return E


def _check_hermitian(E: EffectiveHamiltonian) -> None:
    times = np.linspace(0.0, 10.0, 7)
    if not all(is_hermitian(m, 1e-12) for m in E.evaluate_many(times)):
        raise InvariantError("effective Hamiltonian is not Hermitian")


def _resolve_cutoff(flag, model_value):
    if flag is None:
        return model_value
    return None if flag == "off" else float(flag)


def derive(model, out: Path, cutoff=None) -> dict:
    E = _effective(model, cutoff)
    _check_hermitian(E)
    warnings = []
    bw = bandwidth_report(model.interaction)
    if not bw.ok:
        warnings.append(f"frequency spread/floor ratio {bw.ratio:.3g} exceeds 1/3")
    kernel = Kernel(model.kernel_tau) if model.kernel_tau else auto_kernel(model.interaction)
    feas = kernel_feasibility(model.interaction, kernel)
    kernel_route = None
    if feas.ok:
        jj = static_part(compact_effective(model.interaction)).matrix
        kr = heff_general_static(model.interaction, kernel).matrix
        kernel_route = float(np.linalg.norm(kr - jj) / max(np.linalg.norm(jj), 1e-300))
        if kernel_route > 0.05:
            warnings.append(f"kernel route differs from the compact formula by {kernel_route:.3g} (relative)")
    else:
        warnings.append(f"kernel tau={kernel.tau:.6g} infeasible; kernel-route comparison skipped")
    report = {
        "name": model.name,
        "digest": model.digest,
        "secular_cutoff": "off" if cutoff is None else cutoff,
        **heff_to_json(E),
        "bandwidth": {"spread": bw.spread, "floor": bw.floor, "ratio": bw.ratio, "ok": bw.ok},
        "kernel": {
            "tau": kernel.tau,
            "max_carrier": feas.max_carrier,
            "max_sum": feas.max_sum,
            "min_beat": feas.min_beat,
            "ok": feas.ok,
            "kernel_route_rel_diff": kernel_route,
        },
        "warnings": warnings,
    }
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "heff.json", report)
    lines = [f"model: {model.name}", f"terms: {len(model.interaction)} harmonic, {len(E.terms)} effective"]
    for t in E.terms:
        lines.append(f"  beat {fmt(t.freq)}: |coeff|_F = {fmt(np.linalg.norm(t.coeff.matrix))}")
    lines += [f"warning: {w}" for w in warnings]
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return report


def run_both(model, *, t1=None, dt=None, cutoff=None, method=None, which="both", store_every=None):
    """Propagate the exact and/or effective dynamics on a shared grid."""
    sim = model.simulation
    t0 = sim.get("t0", 0.0)
    t1 = t1 if t1 is not None else sim.get("t1")
    if t1 is None:
        raise ModelError("simulation.t1", "missing (give it in the model or with --t1)")
    H = model.interaction
    E = _effective(model, cutoff)
    w_max = max(H.max_frequency(), E.max_frequency())
    dt = dt if dt is not None else sim.get("dt", 0.02 / w_max)
    method = method or sim.get("method", "auto")
    burn_in = sim.get("burn_in", 0.0)
    steps = math.ceil((t1 - t0) / dt - 1e-9)
    every = store_every or sim.get("store_every") or _store_every(steps)
    exact = eff = None
    if which in ("exact", "both"):
        exact = propagate(H, t0, t1, dt, store_every=every, method=method, burn_in=burn_in)
        t1, dt = exact.t1, exact.dt
    if which in ("effective", "both"):
        eff = propagate(E, t0, t1, dt, store_every=every, burn_in=burn_in)
    return exact, eff


def simulate(model, out: Path, which="both", **kw) -> dict:
    exact, eff = run_both(model, which=which, **kw)
    out.mkdir(parents=True, exist_ok=True)
    psi0 = model.simulation.get("psi0", 0)
    labels = model.space.basis_labels()
    header = ["t"] + [f"p_{lbl}" for lbl in labels]
    main = exact if exact is not None else eff
    write_csv(out / "populations.csv", header, _population_rows(state_populations(main, psi0, labels)))
    result = {"t1": main.t1, "steps": main.steps}
    if exact is not None and eff is not None:
        write_csv(out / "populations_effective.csv", header, _population_rows(state_populations(eff, psi0, labels)))
        times, ue = exact.stored()
        _, uf = eff.stored()
        fids = [fidelity(a, b) for a, b in zip(ue, uf)]
        write_csv(out / "fidelity.csv", ["t", "fidelity"], zip(times, fids))
        result["final_fidelity"] = fids[-1]
    return result


def _check(checks: list, name: str, value: float, ok: bool, detail: str = "") -> None:
    checks.append({"check": name, "value": value, "pass": bool(ok), "detail": detail})


def run_catalog(name: str, out: Path, overrides: dict | None = None) -> dict:
    entry = cat.build(name, **(overrides or {}))
    sim = entry.simulation
    E_raw = compact_effective(entry.interaction)
    E = cat.engine_effective(entry)
    checks: list = []
    mismatch = cat.compare_to_expected(entry, E)
    _check(checks, "engine_matches_expected", mismatch, mismatch <= 1e-12, "relative Frobenius, validity sector")
    herm = all(is_hermitian(m, 1e-12) for m in E_raw.evaluate_many(np.linspace(0, 10, 7)))
    _check(checks, "engine_hermitian", float(herm), herm)
    herm_exp = all(is_hermitian(m, 1e-14) for m in entry.expected_effective.evaluate_many(np.linspace(0, 10, 7)))
    _check(checks, "expected_hermitian", float(herm_exp), herm_exp)

    t1, dt = sim["t1"], sim["dt"]
    steps = math.ceil(t1 / dt)
    every = _store_every(steps)
    method = sim.get("method", "auto")
    exact = propagate(entry.interaction, 0.0, t1, dt, store_every=every, method=method, burn_in=sim.get("burn_in", 0.0))
    eff = propagate(E, 0.0, exact.t1, exact.dt, store_every=every, burn_in=sim.get("burn_in", 0.0))
    times, ue = exact.stored()
    _, uf = eff.stored()
    fids = [fidelity(a, b) for a, b in zip(ue, uf)]
    min_fid = sim.get("min_fidelity", 0.98)
    _check(checks, "exact_vs_effective_fidelity", fids[-1], fids[-1] >= min_fid, f"at t={fmt(exact.t1)}, threshold {min_fid}")

    if "phase_levels" in sim:
        i, j = sim["phase_levels"]
        diag = cat.static_diagonal(entry)
        want = (diag[j] - diag[i]) * (exact.t1 - exact.t0)
        got = phase_accumulation(exact, i, j)
        rel = abs(got - want) / abs(want) if want else abs(got)
        tol = sim.get("phase_tol", 0.02)
        _check(checks, "differential_phase", got, rel <= tol, f"expected {fmt(want)}, tolerance {tol} relative")

    labels = entry.space.basis_labels()
    pops = state_populations(exact, sim.get("psi0", 0), labels)
    if name == "raman" and entry.params["Omega1"] == entry.params["Omega2"] and entry.params["Delta1"] == entry.params["Delta2"]:
        p2 = pops.values[-1, 1]
        _check(checks, "raman_transfer", p2, p2 >= 0.99, "population of |2> at pi/(2 kappa)")
        bound = 1.5 * (entry.params["Omega1"] / (2 * entry.params["Delta1"])) ** 2
        p3 = pops.values[:, 2].max()
        _check(checks, "raman_intermediate", p3, p3 <= bound, f"max population of |3>, bound {fmt(bound)}")
    if name == "ms_gate":
        target = cat.ms_target_state(entry, eff.t1)
        psi = eff.final.matrix[:, sim.get("psi0", 0)]
        ent = float(abs(np.vdot(target, psi)) ** 2)
        _check(checks, "entangled_state_fidelity", ent, ent >= 0.999, "effective evolution vs chi*Jy^2 target")

    out.mkdir(parents=True, exist_ok=True)
    heff = heff_to_json(E)
    write_json(out / "heff.json", heff)
    header = ["t"] + [f"p_{lbl}" for lbl in labels]
    write_csv(out / "populations.csv", header, _population_rows(pops))
    write_csv(out / "fidelity.csv", ["t", "fidelity"], zip(times, fids))
    report = {
        "name": name,
        "params": entry.params,
        "digest": hashlib.sha256(dumps(entry.params).encode()).hexdigest(),
        "secular_cutoff": entry.secular_cutoff,
        "notes": entry.notes,
        "checks": checks,
        "pass": all(c["pass"] for c in checks),
    }
    write_json(out / "report.json", report)
    lines = [f"catalog {name}"] + [
        f"{'PASS' if c['pass'] else 'FAIL'} {c['check']}: {fmt(c['value'])} {c['detail']}".rstrip() for c in checks
    ]
    lines.append("PASS" if report["pass"] else "FAIL")
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return report


def parse_grid(spec: str) -> tuple[str, list[float]]:
    """``name=v1,v2,...`` or ``name=start:stop:num`` (inclusive linspace)."""
    if "=" not in spec:
        raise ModelError("--param", f"expected name=values, got {spec!r}")
    name, values = spec.split("=", 1)
    values = values.strip()
    try:
        if not values:
            return name, []
        if ":" in values:
            a, b, n = values.split(":")
            return name, [float(v) for v in np.linspace(float(a), float(b), int(n))]
        return name, [float(v) for v in values.split(",")]
    except ValueError:
        raise ModelError("--param", f"cannot parse grid {spec!r}") from None


def _sweep_point(args):
    path, overrides, kw = args
    model = load_model(path, overrides)
    exact, eff = run_both(model, which="both", **kw)
    _, ue = exact.stored()
    _, uf = eff.stored()
    psi0 = model.simulation.get("psi0", 0)
    pe = state_populations(exact, psi0).values
    pf = state_populations(eff, psi0).values
    leakage = float(np.max(0.5 * np.abs(pe - pf).sum(axis=1)))
    return fidelity(ue[-1], uf[-1]), leakage


def sweep(path, grids: list[tuple[str, list[float]]], out: Path, jobs: int = 1, seed: int = 0, **kw) -> list:
    names = [g[0] for g in grids]
    points = list(itertools.product(*(g[1] for g in grids))) if grids and all(g[1] for g in grids) else []
    load_model(path, {n: v for n, v in zip(names, points[0])} if points else None)  # fail early on bad input
    tasks = [(str(path), dict(zip(names, p)), kw) for p in points]
    order = list(range(len(tasks)))
    random.Random(seed).shuffle(order)
    results: dict[int, tuple] = {}
    if jobs > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_sweep_point, tasks[i]): i for i in order}
            for fut in concurrent.futures.as_completed(futures):
                results[futures[fut]] = fut.result()
    else:
        for i in order:
            results[i] = _sweep_point(tasks[i])
    rows = [[*points[i], *results[i]] for i in range(len(tasks))]
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep.csv", names + ["fidelity", "max_leakage"], rows)
    return rows


# ---------------------------------------------------------------- argument parsing


def _kv(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ModelError("--set", f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = int(v) if k == "fock_dim" else float(v)
        except ValueError:
            raise ModelError(f"--set {k}", f"not a number: {v!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="effham", description="Time-averaged effective Hamiltonians of harmonic interactions")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        if model:
            p.add_argument("model", help="model JSON file")
        p.add_argument("--out", default="./out", help="output directory (default ./out)")
        p.add_argument("--secular-cutoff", default=None, help="beat cutoff (angular frequency) or 'off'")

    def sim_flags(p):
        p.add_argument("--dt", type=float)
        p.add_argument("--t1", type=float)
        p.add_argument("--method", choices=["auto", "step", "static", "periodic"])
        p.add_argument("--store-every", type=int)

    p = sub.add_parser("derive", help="compute the effective Hamiltonian")
    common(p)
    p = sub.add_parser("simulate", help="propagate exact and/or effective dynamics")
    common(p)
    sim_flags(p)
    p.add_argument("--which", choices=["exact", "effective", "both"], default="both")
    p = sub.add_parser("catalog", help="run a worked example end to end")
    p.add_argument("name")
    p.add_argument("--out", default="./out")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a builder parameter")
    p = sub.add_parser("sweep", help="scan model parameters")
    common(p)
    sim_flags(p)
    p.add_argument("--param", action="append", default=[], metavar="NAME=GRID", help="v1,v2,... or start:stop:num")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="shuffles execution order only")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if not exc.code else EXIT_PARSE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    out = Path(args.out)
    try:
        if args.command == "catalog":
            if args.name not in cat.ENTRIES:
                print(f"error: unknown catalog entry {args.name!r}; valid names: {', '.join(cat.ENTRIES)}", file=sys.stderr)
                return EXIT_PARSE
            report = run_catalog(args.name, out / args.name, _kv(args.set))
            print((out / args.name / "summary.txt").read_text(), end="")
            return EXIT_OK if report["pass"] else EXIT_INVARIANT
        model = load_model(args.model) if args.command != "sweep" else None
        if args.command == "derive":
            report = derive(model, out, _resolve_cutoff(args.secular_cutoff, model.secular_cutoff))
            print((out / "summary.txt").read_text(), end="")
            return EXIT_OK
        kw = dict(
            t1=args.t1,
            dt=args.dt,
            method=args.method,
            store_every=args.store_every,
        )
        if args.command == "simulate":
            kw["cutoff"] = _resolve_cutoff(args.secular_cutoff, model.secular_cutoff)
            result = simulate(model, out, which=args.which, **kw)
            print(dumps(result))
            return EXIT_OK
        if args.command == "sweep":
            if args.secular_cutoff is not None:
                kw["cutoff"] = _resolve_cutoff(args.secular_cutoff, None)
            else:
                kw["cutoff"] = load_model(args.model).secular_cutoff
            grids = [parse_grid(s) for s in args.param]
            rows = sweep(args.model, grids, out, jobs=args.jobs, seed=args.seed, **kw)
            print(f"{len(rows)} sweep points written to {out / 'sweep.csv'}")
            return EXIT_OK
    except ModelError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (StepSizeError, IllConditionedAverageError) as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
