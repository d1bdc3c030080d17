"""Command-line front end: ``antagonet analyze|certify|simulate <scenario.json>``.

Exit codes: 0 when the run completed (whatever the verdicts), 2 for input
errors, 3 for internal numerical failures.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .altafini import (
    altafini_gauge,
    altafini_limit,
    euler_matrix,
    gauge_model,
    interval_bipartite_embed,
    signed_laplacian,
)
from .error_system import build_A, eigen_correspondence
from .errors import (
    DegenerateSpectrumError,
    HypothesisError,
    NotCertifiableError,
    NumericalError,
)
from .gains import (
    Strategy,
    SystemConfig,
    epsilon_bound,
    pair_feasibility,
    sample_feasible_region,
    search_gains,
    verify_gains,
)
from .graph import (
    decompose,
    find_roots,
    has_spanning_forest,
    has_spanning_tree,
    is_strongly_connected,
    jointly_connected,
    union_graph,
)
from .scenario import Scenario, ScenarioError, load
from .simulation import (
    check_coordination,
    containment_limit,
    fixed_topology_report,
    simulate,
)
from .spectral import spectral_report
from .switching import (
    SwitchingCertificate,
    audit_csv,
    certify_switching,
    check_subspace_structure,
    follower_matrices,
    invariant_subspaces,
    rate_products,
    tdadt_audit,
    tightest_uniform_decay,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class Context:
    """Scenario plus the run options shared by all commands."""

    def __init__(self, scn: Scenario, out: Path, seed: int | None, tol: float, horizon: int | None):
        self.scn = scn
        self.out = out
        self.seed = scn.seed if seed is None else seed
        self.tol = tol
        self.horizon = scn.horizon if horizon is None else horizon

    def write(self, name: str, text: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        p = self.out / name
        p.write_text(text)
        return p

    def write_json(self, name: str, obj) -> Path:
        return self.write(name, json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _finite(x):
    return None if x is None or not math.isfinite(x) else x


# -- shared construction ---------------------------------------------------


def rooted_set(scn: Scenario) -> list[int]:
    leaders = scn.leader_indices()
    if leaders is not None:
        return leaders
    roots = find_roots(union_graph(scn.graphs()))
    if not roots:
        raise HypothesisError("no node reaches every other node in the union graph; give 'leaders'")
    return sorted(roots)


def build_blocks(scn: Scenario):
    leaders = rooted_set(scn)
    return [decompose(g, leaders) for g in scn.graphs()]


def _labels(scn: Scenario, idx) -> list[str]:
    return [scn.labels[i] for i in idx]


# -- analyze ---------------------------------------------------------------


def _topology_report(scn: Scenario, name: str, g, blocks, cfg: SystemConfig | None, tol: float) -> dict:
    rep = {
        "name": name,
        "roots": _labels(scn, sorted(find_roots(g))),
        "spanning_tree": has_spanning_tree(g),
        "strongly_connected": is_strongly_connected(g),
        "spanning_forest_from_rooted": has_spanning_forest(g, blocks.permutation[: blocks.M]),
        "L1": blocks.L1.tolist(),
        "L2": blocks.L2.tolist(),
        "L3": blocks.L3.tolist(),
        "hypothesis_violations": [],
    }
    if cfg is None:
        return rep
    try:
        rep["gain"] = verify_gains(blocks.L1, cfg, tol=tol).to_dict()
    except HypothesisError as exc:
        rep["gain"] = None
        rep["hypothesis_violations"].append(str(exc))
    es = build_A(blocks, cfg)
    rep["rooted_block_spectrum"] = spectral_report(
        np.asarray(cfg.rho)[:, None] * blocks.L1 * np.asarray(cfg.delta)
    ).to_dict()
    rep["coupling_spectrum"] = spectral_report(es.coupling).to_dict()
    try:
        bound = epsilon_bound(es.coupling)
        rep["epsilon_bound"] = _finite(bound)
        rep["epsilon_admissible"] = bool(cfg.epsilon < bound)
    except DegenerateSpectrumError as exc:
        rep["epsilon_bound"] = None
        rep["epsilon_admissible"] = None
        rep["hypothesis_violations"].append(f"step-size bound undefined: {exc}")
    rep["error_system"] = es.to_dict()
    rep["eigen_correspondence"] = eigen_correspondence(es.update, es.A)
    return rep


def cmd_analyze(ctx: Context) -> dict:
    scn = ctx.scn
    report: dict = {"command": "analyze", "scenario": scn.name}
    if scn.signed_edges is not None:
        report["signed"] = _signed_analysis(scn)
    if not scn.graph_edges:
        ctx.write_json("report.json", report)
        return report
    graphs = scn.graphs()
    blocks = build_blocks(scn)
    cfg = scn.config() if scn.delta is not None else None
    perm = blocks[0].permutation
    report["block_order"] = _labels(scn, perm)
    report["rooted"] = _labels(scn, perm[: blocks[0].M])
    report["topologies"] = [
        _topology_report(scn, nm, g, b, cfg, ctx.tol) for nm, g, b in zip(scn.graph_names, graphs, blocks)
    ]
    report["union"] = {
        "spanning_tree": has_spanning_tree(union_graph(graphs)),
        "jointly_connected": jointly_connected(graphs),
    }
    if cfg is not None:
        report["config"] = {"delta": list(cfg.delta), "rho": list(cfg.rho), "epsilon": cfg.epsilon}
        report["gain_passed_all"] = all(
            t.get("gain") is not None and t["gain"]["passed"] for t in report["topologies"]
        )
    opts = scn.analysis
    if cfg is not None and opts.get("search"):
        strat = Strategy[str(opts["search"]).upper()]
        free = [int(i) for i in opts.get("search_free", [0])]
        found = search_gains(blocks[0].L1, cfg.delta, strat, free=free)
        report["gain_search"] = {
            "strategy": strat.name,
            "free": free,
            "rho": None if found is None else list(found),
            "single_flip_feasible": {
                str(i + 1): ok for i, ok in pair_feasibility(blocks[0].L1, cfg.delta).items()
            },
        }
    if opts.get("region"):
        reg = opts["region"]
        delta = scn.delta if scn.delta is not None else [1.0] * blocks[0].M
        sample = sample_feasible_region(
            blocks[0].L1, delta, reg["free"], reg["box"], int(reg.get("resolution", 21)), reg.get("base")
        )
        ctx.write("region.csv", sample.to_csv())
        report["region"] = {
            "points": int(len(sample.points)),
            "feasible": int(sample.feasible.sum()),
            "file": "region.csv",
        }
    ctx.write_json("report.json", report)
    return report


def _signed_analysis(scn: Scenario) -> dict:
    lap = signed_laplacian(scn.signed_adjacency())
    d, balanced = altafini_gauge(lap)
    out = {"balanced": balanced, "gauge": None if d is None else np.diag(d).tolist()}
    out["laplacian_spectrum"] = spectral_report(lap).to_dict()
    return out


# -- certify ---------------------------------------------------------------


def _error_matrices(scn: Scenario, cfg: SystemConfig):
    blocks = build_blocks(scn)
    if scn.analysis.get("followers_only"):
        return follower_matrices([b.L3 for b in blocks], cfg.epsilon), "follower"
    return [build_A(b, cfg).A for b in blocks], "error"


def _envelope(mats, sigma, constant: float, decay: float, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(mats[0].shape[0])
    z0 = np.linalg.norm(z)
    worst, norms = 0.0, [float(z0)]
    for k, s in enumerate(sigma, start=1):
        z = mats[s] @ z
        nrm = float(np.linalg.norm(z))
        norms.append(nrm)
        worst = max(worst, nrm / (constant * decay**k * z0))
    return {"holds": worst <= 1 + 1e-9, "max_ratio": worst, "final_norm": norms[-1], "initial_norm": float(z0)}


def cmd_certify(ctx: Context) -> dict:
    scn = ctx.scn
    spec = scn.tdadt_spec()
    if spec is None or scn.certificate is None:
        raise ScenarioError("tdadt", "certify needs 'tdadt' and 'certificate'")
    cfg = scn.config()
    mats, kind = _error_matrices(scn, cfg)
    report: dict = {"command": "certify", "scenario": scn.name, "matrices": kind}
    c = scn.certificate
    sigma = scn.sigma(ctx.horizon)
    audit = tdadt_audit(sigma, spec)
    ctx.write("audit.csv", audit_csv(audit))
    report["audit"] = [
        {"topology": r.topology, "activations": r.activations, "active_instants": r.active_instants,
         "bound": r.bound, "passed": r.passed}
        for r in audit
    ]
    try:
        pairs = [invariant_subspaces(a) for a in mats]
    except NotCertifiableError as exc:
        report["certified"] = False
        report["failure"] = str(exc)
        ctx.write_json("report.json", report)
        return report
    report["subspaces"] = [
        {k: v for k, v in p.to_dict().items() if k not in ("H_unit", "H_contractive")} for p in pairs
    ]
    report["rate_products"] = rate_products(pairs, c["gamma"], spec.dwell)
    structure = check_subspace_structure(pairs, c["S1"], c["S2"])
    report["structure"] = structure.to_dict()
    active = [r.active_instants for r in audit]
    if c.get("decay") is not None:
        decay = list(c["decay"])
    else:
        d = tightest_uniform_decay(c["omega"], c["gamma"], c["S1"], c["S2"], active)
        report["tightest_decay"] = d
        if not 0 < d < 1:
            report["certified"] = False
            report["failure"] = f"horizon products admit no decay bound below 1 (tightest {d:.6g})"
            ctx.write_json("report.json", report)
            return report
        decay = [d] * len(mats)
    cert = SwitchingCertificate(c["omega"], c["gamma"], decay, c["S1"], c["S2"])
    res = certify_switching(pairs, cert, spec.dwell, audit, spec.chatter, structure)
    report.update(res.to_dict())
    report["envelope_check"] = _envelope(mats, sigma, res.envelope_constant, res.decay, ctx.seed)
    ctx.write_json("report.json", report)
    return report


# -- simulate --------------------------------------------------------------


def cmd_simulate(ctx: Context) -> dict:
    scn = ctx.scn
    report: dict = {"command": "simulate", "scenario": scn.name, "seed": ctx.seed}
    if not scn.graph_edges:
        report.update(_simulate_signed(ctx))
        ctx.write_json("report.json", report)
        return report
    cfg = scn.config()
    blocks = build_blocks(scn)
    sigma = scn.sigma(ctx.horizon)
    perm = list(blocks[0].permutation)
    xi0 = ctx.scn.initial_state(ctx.seed)[perm]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        traj = simulate(blocks, cfg, sigma, xi0, ctx.horizon)
    report["warnings"] = [str(w.message) for w in caught]
    fixed = len(set(sigma)) == 1
    rate = None
    if fixed:
        b = blocks[sigma[0]]
        try:
            ftr = fixed_topology_report(b, cfg)
            rate = _finite(ftr.rate)
            report["fixed_topology"] = {
                **ftr.to_dict(),
                "rate": rate,
                "predicted_limit": ftr.limit(xi0).tolist(),
                "predicted_value": ftr.limit_value(xi0),
            }
        except (HypothesisError, DegenerateSpectrumError) as exc:
            report["fixed_topology"] = {"unavailable": str(exc)}
    verdict = check_coordination(traj, tol=ctx.tol, window=min(50, traj.steps + 1), rate=rate)
    report["verdict"] = verdict.to_dict()
    report["steps"] = traj.steps
    report["diverged"] = traj.truncated
    norms = np.linalg.norm(traj.errors, axis=1)
    report["residuals_decaying"] = bool(norms[-1] < norms[0] and verdict.trending_down)
    report["final_state"] = dict(zip(_labels(scn, perm), traj.states[-1].tolist()))
    if scn.analysis.get("containment"):
        b = blocks[sigma[-1]]
        pred = containment_limit(b, cfg.delta, traj.states[0][: b.M])
        sim = traj.states[-1][b.M :]
        report["containment"] = {
            "predicted": pred.tolist(),
            "simulated": sim.tolist(),
            "max_error": float(np.max(np.abs(pred - sim), initial=0.0)),
        }
    ctx.write("trajectory.csv", traj.to_csv(scn.labels))
    ctx.write("plot_data.csv", traj.plot_csv(scn.labels))
    ctx.write_json("report.json", report)
    return report


def _simulate_signed(ctx: Context) -> dict:
    scn = ctx.scn
    lap = signed_laplacian(scn.signed_adjacency())
    xi0 = scn.initial_state(ctx.seed)
    out: dict = {"signed": _signed_analysis(scn)}
    target = altafini_limit(lap, xi0)
    out["altafini_limit"] = target.tolist()
    if out["signed"]["balanced"]:
        blocks, cfg = gauge_model(lap)
        eps = scn.epsilon if scn.epsilon is not None else 0.5 * epsilon_bound(lap)
        cfg = cfg.with_epsilon(eps)
        steps = ctx.horizon
        euler = np.empty((steps + 1, scn.n))
        euler[0] = xi0
        step = euler_matrix(lap, eps)
        for k in range(steps):
            euler[k + 1] = step @ euler[k]
        traj = simulate([blocks], cfg, [0] * steps, xi0[list(blocks.permutation)])
        back = np.empty_like(traj.states)
        back[:, list(blocks.permutation)] = traj.states
        out["epsilon"] = eps
        out["gauge_match"] = float(np.max(np.abs(back - euler)))
        out["final_state"] = back[-1].tolist()
        out["limit_error"] = float(np.max(np.abs(back[-1] - target)))
        ctx.write("trajectory.csv", traj.to_csv(scn.labels))
        ctx.write("plot_data.csv", traj.plot_csv(scn.labels))
    if scn.analysis.get("embed"):
        try:
            emb = interval_bipartite_embed(lap, target)
        except DegenerateSpectrumError as exc:
            out["embedding"] = {"unavailable": str(exc)}
        else:
            k = ctx.horizon
            tr = simulate([emb.blocks], emb.cfg, [0] * k, emb.initial_state()[list(emb.blocks.permutation)])
            final = np.empty(tr.states.shape[1])
            final[list(emb.blocks.permutation)] = tr.states[-1]
            kept = [int(i) for i in emb.kept]
            out["embedding"] = {
                "kept": _labels(scn, kept),
                "epsilon": emb.cfg.epsilon,
                "delta": list(emb.cfg.delta),
                "final": final[1:].tolist(),
                "max_error": float(np.max(np.abs(final[1:] - target[kept]))),
            }
    return out


# -- entry point -----------------------------------------------------------

COMMANDS = {"analyze": cmd_analyze, "certify": cmd_certify, "simulate": cmd_simulate}


def run_one(command: str, path, out: Path, seed, tol, horizon) -> tuple[int, dict | str]:
    try:
        scn = load(path)
        if horizon is not None and horizon < 1:
            raise ScenarioError("--horizon", "must be >= 1")
        ctx = Context(scn, out, seed, tol, horizon)
        return EXIT_OK, COMMANDS[command](ctx)
    except NumericalError as exc:
        return EXIT_NUMERIC, f"numerical failure: {exc}"
    except (ValueError, OSError) as exc:
        return EXIT_INPUT, f"input error: {exc}"
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        return EXIT_NUMERIC, f"numerical failure: {exc}"


def _summary(command: str, rep: dict) -> str:
    name = rep.get("scenario", "?")
    if command == "analyze":
        if "gain_passed_all" in rep:
            msgs = [t["gain"]["message"] if t.get("gain") else "; ".join(t["hypothesis_violations"])
                    for t in rep["topologies"]]
            return f"{name}: " + " | ".join(msgs)
        return f"{name}: structural analysis written"
    if command == "certify":
        if rep.get("certified"):
            return f"{name}: certified, decay {rep['decay']:.6g}"
        return f"{name}: not certified: {rep.get('failure')}"
    if "verdict" in rep:
        v = rep["verdict"]
        line = f"{name}: coordination {'achieved' if v['achieved'] else 'not achieved'}"
        if rep.get("diverged"):
            line += f" (diverged, truncated after {rep['steps']} steps)"
        elif not rep.get("residuals_decaying"):
            line += " (residuals not decaying)"
        if v.get("rate") is not None:
            line += f", rate -ln(lambda) = {v['rate']:.6g}"
        return line
    return f"{name}: signed network simulated"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="antagonet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("scenario", nargs="?", help="scenario JSON file")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default ./out)")
    p.add_argument("--seed", type=int, default=None, help="seed for random initial states (default: scenario seed, 42)")
    p.add_argument("--tol", type=float, default=1e-6, help="coordination residual tolerance (default 1e-6)")
    p.add_argument("--horizon", type=int, default=None, help="override the scenario horizon")
    p.add_argument("--batch", type=Path, default=None, help="file listing scenario paths, run concurrently")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("input error: --seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_INPUT
    if (args.scenario is None) == (args.batch is None):
        print("input error: give exactly one of a scenario file or --batch", file=sys.stderr)
        return EXIT_INPUT
    if args.batch is None:
        jobs = [(Path(args.scenario), args.out)]
    else:
        try:
            lines = args.batch.read_text().splitlines()
        except OSError as exc:
            print(f"input error: {args.batch}: {exc.strerror}", file=sys.stderr)
            return EXIT_INPUT
        base = args.batch.parent
        paths = [base / s.strip() for s in lines if s.strip() and not s.lstrip().startswith("#")]
        jobs = [(p, args.out / p.stem) for p in paths]

    def job(item):
        path, out = item
        return run_one(args.command, path, out, args.seed, args.tol, args.horizon)

    if len(jobs) == 1:
        results = [job(jobs[0])]
    else:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(job, jobs))
    code = EXIT_OK
    for (path, _), (rc, payload) in zip(jobs, results):
        if rc == EXIT_OK:
            print(_summary(args.command, payload))
        else:
            print(f"{path}: {payload}", file=sys.stderr)
        code = max(code, rc)
    return code


if __name__ == "__main__":
    sys.exit(main())
