from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from . import reports
from .approx import certify_R_membership, construct_mu_k, convergence_probe
from .approx import tangent_probe
from .blowup import WeightVector, blowup, weighted_duplication
from .geometry import standard_box
from .limsup import bc_lower_bound, cube_event_system, doubling_scan
from .limsup import non_doubling_witness, periodic_limsup_prob, random_event_system
from .measures import Box, DomainError, add_background
from .measures import discretize_lebesgue, remove_ball, sample_S
from .metric import d_metric, f_a
from .settings import Settings
from .sharpness import SharpnessConfig, find_sharpness_point
from .trees import TreeState, construct_tree_approximant, empirical_distribution
from .trees import micromeasure_distribution_matrix, micromeasure_orbit, pi_metric
from .trees import pi_metric_lp
from .workers import resolve_workers

log = logging.getLogger(__name__)

Runner = Callable[[Settings, argparse.Namespace], str]


# ------------------------ logging setup ------------------------


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


# ------------------------ argument helpers ------------------------


def floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise DomainError(f"expected comma-separated numbers, got {text!r}") from e


def ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise DomainError(f"expected comma-separated integers, got {text!r}") from e


def _window(settings: Settings, ns: argparse.Namespace, dim: int) -> Box:
    bounds = getattr(ns, "bounds", None)
    if bounds:
        lo, hi = floats(bounds)
        return Box([lo] * dim, [hi] * dim)
    level = getattr(ns, "window", None) or settings.app.window_level
    return standard_box(level, dim)


def _out(settings: Settings, ns: argparse.Namespace, default_name: str) -> Path:
    out = getattr(ns, "out", None)
    return Path(out) if out else settings.paths.output_dir / default_name


def _seed(settings: Settings, ns: argparse.Namespace) -> int:
    seed = getattr(ns, "seed", None)
    return settings.app.seed if seed is None else seed


def _workers(settings: Settings) -> int:
    return resolve_workers(settings.app.workers)


def _lp(settings: Settings) -> Dict[str, Any]:
    lp = settings.app.lp
    return {"max_atoms": lp.max_atoms, "tolerance": lp.tolerance}


# ------------------------ bl-metric ------------------------


def run_metric(settings: Settings, ns: argparse.Namespace) -> str:
    mu, nu = reports.load_measure(ns.lhs), reports.load_measure(ns.rhs)
    value = f_a(mu, nu, ns.a, **_lp(settings))
    log.info("F_%d computed on %d + %d atoms", ns.a, mu.size, nu.size)
    return settings.fmt(value)


def run_metric_d(settings: Settings, ns: argparse.Namespace) -> str:
    mu, nu = reports.load_measure(ns.lhs), reports.load_measure(ns.rhs)
    a_max = ns.amax or settings.app.a_max
    res = d_metric(mu, nu, a_max=a_max, **_lp(settings))
    return f"{settings.fmt(res.value)} {settings.fmt(res.certified_error)}"


# ------------------------ blowup-ops ------------------------


def run_blowup(settings: Settings, ns: argparse.Namespace) -> str:
    mu = reports.load_measure(ns.input)
    out = blowup(mu, floats(ns.x), ns.r, ns.c)
    path = _out(settings, ns, "blowup.json")
    reports.save_measure(out, path)
    mass = settings.fmt(out.total)
    return f"blow-up with {out.size} atom(s), mass {mass} -> {path}"


def run_dup(settings: Settings, ns: argparse.Namespace) -> str:
    nu = reports.load_measure(ns.nu)
    if ns.weights:
        w = WeightVector.parse(nu.dim, ns.weights)
    else:
        w = WeightVector.ones(nu.dim)
    out = weighted_duplication(nu, ns.a, w)
    path = _out(settings, ns, "duplication.json")
    reports.save_measure(out, path)
    mass = settings.fmt(out.total)
    return f"duplication with {out.size} atom(s), mass {mass} -> {path}"


# ------------------------ typical-approx ------------------------


def run_construct(settings: Settings, ns: argparse.Namespace) -> str:
    mu, nu = reports.load_measure(ns.mu), reports.load_measure(ns.nu)
    window = _window(settings, ns, mu.dim)
    if ns.background:
        mu = add_background(mu, ns.a, ns.k, window, ns.background)
    mu_k = construct_mu_k(mu, nu, ns.a, ns.k, window)
    path = _out(settings, ns, f"mu_a{ns.a}_k{ns.k}.json")
    reports.save_measure(mu_k, path)
    return f"mu_k with {mu_k.size} atom(s) -> {path}"


def run_certify(settings: Settings, ns: argparse.Namespace) -> str:
    mu, nu = reports.load_measure(ns.mu), reports.load_measure(ns.nu)
    window = _window(settings, ns, mu.dim)
    res = certify_R_membership(
        mu, nu, ns.a, ns.n, ns.kmax, window, workers=_workers(settings), beta=ns.beta
    )
    path = _out(settings, ns, f"certify_a{ns.a}.json")
    reports.write_json(
        path,
        {
            "a": ns.a,
            "n": ns.n,
            "k_max": ns.kmax,
            "certified_k": res.k,
            "summary": res.summary,
            "certificates": [c.to_dict() for c in res.certificates],
        },
    )
    if res.certified:
        return f"certified at k={res.k} ({len(res.certificates)} cubes) -> {path}"
    return f"not certified for k in {ns.n}..{ns.kmax} -> {path}"


def run_probe(settings: Settings, ns: argparse.Namespace) -> str:
    mu, nu = reports.load_measure(ns.mu), reports.load_measure(ns.nu)
    prec = settings.app.precision
    if ns.x is not None:
        rows = tangent_probe(mu, floats(ns.x), nu, ints(ns.alist), b=ns.b, k=ns.k)
        path = _out(settings, ns, "tangent_probe.csv")
        reports.write_csv(
            path,
            [
                ("a", "zoom level"),
                ("k", "cube generation"),
                ("cube", "cube of Q_a^k containing x"),
                ("r", "blow-up radius 3^-(k+1)a"),
                ("c", "normalization constant"),
                ("normalization", "candidate c(Q) or best constant"),
                ("z", "|x - x(Q)| / r"),
                ("distance", "F_b(c T_{x,r} mu, nu)"),
                ("bound", "threshold + |z| nu(I_{b+1})"),
                ("generic_bound", "threshold + 2 3^-a nu(I_{b+1})"),
            ],
            (
                [row.a, row.k, row.cube, row.r, row.c, row.normalization, row.z]
                + [row.distance, row.bound, row.generic_bound]
                for row in rows
            ),
            title="tangent probe",
            precision=prec,
        )
        return f"{len(rows)} tangent row(s) -> {path}"
    if ns.a is None or ns.klist is None:
        raise DomainError("probe needs --x (tangent probe) or --a and --klist")
    window = _window(settings, ns, mu.dim)
    rows_c = convergence_probe(mu, nu, ns.a, ints(ns.klist), ns.b, window)
    path = _out(settings, ns, "convergence_probe.csv")
    reports.write_csv(
        path,
        [
            ("k", "generation"),
            ("distance", "F_b(mu_k, mu)"),
            ("bound", "2 sqrt(d) 3^-ak mu(I_{b+1})"),
            ("within_bound", "distance <= bound"),
        ],
        ([r.k, r.distance, r.bound, r.within_bound] for r in rows_c),
        title="convergence probe",
        precision=prec,
    )
    ok = sum(1 for r in rows_c if r.within_bound)
    return f"{ok}/{len(rows_c)} generation(s) within the bound -> {path}"


# ------------------------ limsup-lab ------------------------


def run_bc(settings: Settings, ns: argparse.Namespace) -> str:
    if ns.events:
        space, seq = reports.load_events(ns.events)
        bound = bc_lower_bound(space, seq, ns.N)
        union = periodic_limsup_prob(space, seq)
        return f"{settings.fmt(float(bound))} {settings.fmt(float(union))}"
    if not ns.sweep:
        raise DomainError("bc needs --events FILE or --sweep COUNT")
    seed0 = _seed(settings, ns)
    rows = []
    for seed in range(seed0, seed0 + ns.sweep):
        space, seq = random_event_system(seed, outcomes=ns.outcomes, N=ns.N or 12)
        bound = float(bc_lower_bound(space, seq))
        union = float(periodic_limsup_prob(space, seq))
        rows.append([seed, len(seq), bound, union, bound <= union + 1e-12])
    path = _out(settings, ns, "bc_sweep.csv")
    reports.write_csv(
        path,
        [
            ("seed", "event system seed"),
            ("N", "number of events"),
            ("bound", "second-moment lower bound"),
            ("limsup", "P(limsup A_n) for the periodic extension"),
            ("ok", "bound <= limsup + 1e-12"),
        ],
        rows,
        title="Borel-Cantelli sweep",
        seed=seed0,
        precision=settings.app.precision,
    )
    ok = sum(1 for r in rows if r[-1])
    return f"{ok}/{len(rows)} system(s) satisfy the bound -> {path}"


def run_cube_events(settings: Settings, ns: argparse.Namespace) -> str:
    mu, nu = reports.load_measure(ns.mu), reports.load_measure(ns.nu)
    window = _window(settings, ns, mu.dim) if (ns.window or ns.bounds) else None
    _, _, report = cube_event_system(
        mu, nu, ns.a, ns.b, ints(ns.klist), window=window, exact=ns.exact
    )
    path = _out(settings, ns, f"cube_events_a{ns.a}_b{ns.b}.json")
    reports.write_json(path, report.to_dict())
    ok = all(report.per_event_ok()) and report.pairwise_ok()
    return (
        f"bound {settings.fmt(float(report.bc_bound or 0.0))} "
        f"(target {settings.fmt(report.finite_target or 0.0)}), "
        f"event bounds {'hold' if ok else 'FAIL'} -> {path}"
    )


def run_doubling(settings: Settings, ns: argparse.Namespace) -> str:
    x = floats(ns.x)
    if ns.mu:
        mu = reports.load_measure(ns.mu)
    else:
        if ns.witness is None:
            raise DomainError("doubling needs --mu FILE or --witness N")
        mu = non_doubling_witness(ns.witness, _window(settings, ns, len(x)), ns.h)
    rows = doubling_scan(mu, x, ns.r0, ns.factor, ns.count)
    path = _out(settings, ns, "doubling.csv")
    reports.write_csv(
        path,
        [
            ("r", "radius"),
            ("inner", "mu(B(x, r))"),
            ("outer", "mu(B(x, 2r))"),
            ("ratio", "outer / inner (empty when inner = 0)"),
            ("infinite", "inner = 0 < outer"),
        ],
        ([r.r, r.inner, r.outer, r.ratio, r.infinite_candidate] for r in rows),
        title="doubling scan",
        precision=settings.app.precision,
    )
    flagged = sum(1 for r in rows if r.infinite_candidate)
    return f"{len(rows)} radius/radii, {flagged} with infinite ratio -> {path}"


# ------------------------ sharpness-line ------------------------


def run_sharpness(settings: Settings, ns: argparse.Namespace) -> str:
    mu = reports.load_measure(ns.mu)
    overrides = {"eps": ns.eps, "i_max": ns.imax, "y0": ns.y0, "h": ns.h}
    updates = {k: v for k, v in overrides.items() if v is not None}
    cfg = SharpnessConfig(**{**settings.app.sharpness.model_dump(), **updates})
    window = _window(settings, ns, 1)
    res = find_sharpness_point(
        mu, cfg, window, workers=_workers(settings), max_atoms=settings.app.lp.max_atoms
    )
    path = _out(settings, ns, "sharpness.json")
    reports.write_json(path, res.to_dict())
    reports.write_csv(
        path.with_suffix(".csv"),
        [
            ("r", "scale"),
            ("distance", "F_2(c T_{x,r} mu, reference) minimized over c"),
            ("slack", "discretization slack"),
            ("threshold", "min(eps'/52, eps^2)"),
            ("normalization", "how c was chosen"),
            ("pass", "distance - slack >= threshold"),
        ],
        (
            [r.r, r.distance, r.slack, r.threshold, r.normalization, r.passed]
            for r in res.certificate
        ),
        title=f"sharpness certificate ({res.case}, reference {res.reference})",
        precision=settings.app.precision,
    )
    x = "none" if res.x is None else settings.fmt(res.x)
    verdict = "passed" if res.passed else "not certified"
    return f"case {res.case}: x={x}, {verdict} -> {path}"


# ------------------------ tree-micro ------------------------


def _tree_pi(settings: Settings, ns: argparse.Namespace) -> str:
    mu, nu = reports.load_tree(ns.lhs), reports.load_tree(ns.rhs)
    value = pi_metric_lp(mu, nu) if ns.lp else pi_metric(mu, nu)
    return settings.fmt(float(value))


def _tree_zoom(settings: Settings, ns: argparse.Namespace) -> str:
    mu = reports.load_tree(ns.mu)
    x = reports.parse_word(ns.x, mu.b)
    orbit = micromeasure_orbit(mu, x, range(ns.N + 1))
    path = _out(settings, ns, "zoom.json")
    payload: Dict[str, object] = {
        "x": list(x),
        "orbit": [reports.tree_to_dict(m) for m in orbit],
    }
    if ns.nu:
        nu = reports.load_tree(ns.nu)
        payload["pi_to_nu"] = [float(pi_metric(m, nu)) for m in orbit]
    reports.write_json(path, payload)
    return f"{len(orbit)} micromeasure(s) along x -> {path}"


def _tree_construct(settings: Settings, ns: argparse.Namespace) -> str:
    mu, nu = reports.load_tree(ns.mu), reports.load_tree(ns.nu)
    mu_k = construct_tree_approximant(mu, nu, ns.k)
    path = _out(settings, ns, f"tree_k{ns.k}.json")
    reports.save_tree(mu_k, path)
    gap = float(pi_metric(mu_k, mu))
    return f"pi(mu_k, mu) = {settings.fmt(gap)} -> {path}"


def _tree_microdist(settings: Settings, ns: argparse.Namespace) -> str:
    mu = reports.load_tree(ns.mu)
    x = reports.parse_word(ns.x, mu.b)
    dist = empirical_distribution(mu, x, ns.N)
    states: Sequence[TreeState] = [s for s, _ in dist]
    matrix = micromeasure_distribution_matrix(states)
    path = _out(settings, ns, "microdist.csv")
    columns = [("n", "zoom depth"), ("word", "remaining word"), ("weight", "1/N")]
    columns += [(f"d{j}", f"d_Xi to state {j}") for j in range(len(states))]
    reports.write_csv(
        path,
        columns,
        (
            [i, "".join(str(s) for s in st.word), w] + list(np.asarray(matrix[i]))
            for i, (st, w) in enumerate(dist)
        ),
        title="micromeasure distribution",
        precision=settings.app.precision,
    )
    return f"{len(states)} state(s) -> {path}"


TREE_COMMANDS: Dict[str, Runner] = {
    "pi": _tree_pi,
    "zoom": _tree_zoom,
    "construct": _tree_construct,
    "microdist": _tree_microdist,
}


def run_tree(settings: Settings, ns: argparse.Namespace) -> str:
    return TREE_COMMANDS[ns.tree_command](settings, ns)


# ------------------------ measure builders ------------------------


def run_lebesgue(settings: Settings, ns: argparse.Namespace) -> str:
    box = Box(floats(ns.lo), floats(ns.hi))
    mu = discretize_lebesgue(box, ns.h)
    if ns.remove_ball is not None:
        mu = remove_ball(mu, np.zeros(box.dim), ns.remove_ball)
    path = _out(settings, ns, "lebesgue.json")
    reports.save_measure(mu, path)
    return f"{mu.size} atom(s), mass {settings.fmt(mu.total)} -> {path}"


def run_sample(settings: Settings, ns: argparse.Namespace) -> str:
    seed = _seed(settings, ns)
    window = _window(settings, ns, ns.dim)
    mu = sample_S(
        ns.n,
        window,
        ns.h,
        seed,
        generation=ns.generation,
        boundary_depth=settings.app.boundary_depth,
    )
    path = _out(settings, ns, f"sample_n{ns.n}_seed{seed}.json")
    reports.write_json(path, {**reports.measure_to_dict(mu), "seed": seed})
    return f"sample with {mu.size} atom(s), seed {seed} -> {path}"


# ------------------------ registry / public entrypoint ------------------------

COMMANDS: Dict[str, Runner] = {
    "metric": run_metric,
    "metric-d": run_metric_d,
    "blowup": run_blowup,
    "dup": run_dup,
    "construct": run_construct,
    "certify": run_certify,
    "probe": run_probe,
    "bc": run_bc,
    "cube-events": run_cube_events,
    "doubling": run_doubling,
    "sharpness": run_sharpness,
    "tree": run_tree,
    "lebesgue": run_lebesgue,
    "sample": run_sample,
}


def run(settings: Settings, ns: argparse.Namespace) -> str:
    """Execute one subcommand and return its one-line summary."""
    _setup_logging(settings.app.log_level)
    runner: Optional[Runner] = COMMANDS.get(ns.command)
    if runner is None:
        raise DomainError(f"unknown command {ns.command!r}")
    log.info("Running %s", ns.command)
    return runner(settings, ns)
