"""Command-line entry point: ``chainlab <subcommand> ...``."""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import checks, oracle, spectral
from .integrator import simulate, write_trajectory_csv
from .metrics import gap_extrema, mean_length_series, ray_samples
from .model import (ConstantVelocity, Explicit, ModelError, SingleVelocityKick,
                    equilibrium_spacing, sector_classify)
from .scenario import DEFAULT_SEED, ConfigError, build_params, build_scenario, describe_keys, load
from .sweep import Grid, Template, Thresholds, agreement, run_sweep, sweep_csv

EXIT_OK, EXIT_CHECK, EXIT_PARSE, EXIT_DOMAIN = 0, 1, 2, 3

EPILOG = f"""\
config keys (one 'key = value' per line, '#' starts a comment):
{describe_keys()}

exit codes:
  0  success (verify: every check passed)
  1  verify: at least one check failed
  2  config parse error (reported with its line number) or unknown suite
  3  invalid parameter combination (the message names the violated condition)
"""


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_suffix(suffix)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _rows(header: str, columns) -> str:
    lines = [header]
    for row in zip(*columns):
        lines.append(",".join(f"{x:.17g}" if isinstance(x, float) else str(x) for x in row))
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    sc = build_scenario(load(args.config))
    rec = simulate(sc.ic, sc.params, sc.leader, sc.horizon, sc.dt, sc.stride)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(rec, out)
    report = gap_extrema(rec)
    _write(_sibling(out, ".json"), report.to_json() + "\n")
    if not args.no_plot:
        from .plotting import plot_trajectory
        plot_trajectory(rec, _sibling(out, ".png"))
    print(f"I_hat={report.I_hat:.10g} S_hat={report.S_hat:.10g} horizon={report.horizon:g} N={report.n_cars}")
    if report.first_collision is not None:
        t, k = report.first_collision
        print(f"first negative gap: car {k} at t={t:.6g}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite not in checks.SUITES:
        print(f"unknown suite {args.suite!r}; known: {', '.join(checks.SUITES)}", file=sys.stderr)
        return EXIT_PARSE
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    if args.suite == "oracle":
        print(f"seed = {seed}")
    results = checks.run_suite(args.suite, seed)
    for c in results:
        print(c.line())
    failed = sum(not c.passed for c in results)
    print(f"{args.suite}: {len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK


def cmd_spectrum(args) -> int:
    values = load(args.config)
    params = build_params(values)
    box = values.get("spectrum.box", 2.0 * params.omega)
    res = values.get("spectrum.resolution", 0.01)
    if box <= 0 or res <= 0 or res > box:
        raise ModelError("need 0 < spectrum.resolution <= spectrum.box")
    re, im, mask = spectral.spectrum_grid(params, box, res)
    R, I = np.meshgrid(re, im)
    out = Path(args.out)
    _write(out, _rows("re,im,inside", [R.ravel().tolist(), I.ravel().tolist(),
                                       mask.ravel().astype(int).tolist()]))
    if not args.no_plot:
        from .plotting import plot_spectrum
        plot_spectrum(re, im, mask, params, _sibling(out, ".png"))
    wit = spectral.spectrum_positive_real_witness(params)
    print(f"sector={sector_classify(params)} points inside={int(mask.sum())}")
    print("Re z > 0 witness: " + ("none" if wit is None else f"{wit.real:.6g}{wit.imag:+.6g}i"))
    return EXIT_OK


def cmd_saddle(args) -> int:
    values = load(args.config)
    sc = build_scenario(values, need_horizon=False)
    if not isinstance(sc.ic, SingleVelocityKick):
        raise ModelError("saddle needs ic.kind = kick (the asymptotics assume a single velocity kick)")
    if not isinstance(sc.leader, ConstantVelocity):
        raise ModelError("saddle needs leader.kind = constant")
    params = sc.params
    mu = sc.extra.get("saddle.mu", spectral.fastest_ray(params))
    n = sc.ic.n_cars
    k_min = sc.extra.get("saddle.k_min", 1)
    k_max = sc.extra.get("saddle.k_max", n - 1)
    if not 1 <= k_min < k_max <= n - 1:
        raise ModelError(f"need 1 <= saddle.k_min < saddle.k_max <= n_cars - 1 = {n - 1}")
    data = spectral.saddle_analysis(mu, params, sc.ic.epsilon)
    horizon = max(sc.horizon, mu * k_max)
    rec = simulate(sc.ic, params, sc.leader, horizon, sc.dt, sc.stride)
    ks = np.arange(k_min, k_max + 1)
    predicted = spectral.asymptotic_envelope(ks, data)
    simulated = ray_samples(rec, mu, ks)
    out = Path(args.out)
    _write(out, _rows("k,predicted,simulated", [ks.tolist(), predicted.tolist(), simulated.tolist()]))
    if not args.no_plot:
        from .plotting import plot_saddle
        plot_saddle(ks, predicted, simulated, _sibling(out, ".png"),
                    refined=spectral.leading_term(ks, data))
    print(f"mu={mu:.10g} f(mu)={data.f:.10g} Omega(mu)={data.Omega:.10g}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    values = load(args.config) if args.config else {}
    unknown = [k for k in values if k.split(".")[0] not in ("sweep", "d", "seed")]
    if unknown:
        raise ConfigError("sweep config accepts only sweep.* keys and d: " + ", ".join(unknown))
    g = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("sweep.")}
    grid = Grid.linear(g.get("alpha_min", 0.2), g.get("alpha_max", 4.0), g.get("n_alpha", 20),
                       g.get("omega_min", 0.2), g.get("omega_max", 2.0), g.get("n_omega", 20))
    template = Template(d=values.get("d", 1.0), k_min=g.get("k_min", 10), k_max=g.get("k_max", 60))
    if not 2 <= template.k_min < template.k_max < template.ic.n_cars:
        raise ModelError(f"need 2 <= sweep.k_min < sweep.k_max < {template.ic.n_cars}")
    thresholds = Thresholds(g.get("slope_pos", 0.02), g.get("slope_neg", -0.02))
    cells = run_sweep(grid, template, thresholds, workers=max(1, args.workers))
    out = Path(args.out)
    _write(out, sweep_csv(cells))
    if not args.no_plot:
        from .plotting import plot_phase_diagram
        plot_phase_diagram(cells, _sibling(out, ".png"))
    stats = agreement(cells)
    print(f"cells={len(cells)} unstable_in_stable={stats['unstable_labels_in_stable']} "
          f"inner_unstable_fraction={stats['inner_unstable_fraction']:.4f} "
          f"unstable_sector_fraction={stats['unstable_sector_fraction']:.4f}")
    return EXIT_OK


def cmd_density(args) -> int:
    values = load(args.config)
    sc = build_scenario(values)
    ic = sc.ic
    if "density.l0dot" in sc.extra:
        v = sc.leader.v
        a = equilibrium_spacing(sc.params, v)
        k = np.arange(getattr(ic, "n_cars", 0) + 1)
        if k.size < 2:
            raise ModelError("density.l0dot needs n_cars")
        ic = Explicit(tuple(-k * a), tuple(v - sc.extra["density.l0dot"] * k))
    rec = simulate(ic, sc.params, sc.leader, sc.horizon, sc.dt, sc.stride)
    series = mean_length_series(rec)
    n = rec.n_cars
    l0dot = float(rec.velocities[0, 0] - rec.velocities[0, -1]) / n
    law = oracle.mean_length_law(series[0], l0dot, sc.params.alpha, rec.times)
    out = Path(args.out)
    _write(out, _rows("t,L_N,L", [rec.times.tolist(), series.tolist(), np.asarray(law).tolist()]))
    if not args.no_plot:
        from .plotting import plot_density
        plot_density(rec.times, [series], law, _sibling(out, ".png"), [f"N={n}"])
    a = equilibrium_spacing(sc.params, sc.v_ref) if sc.v_ref is not None else math.nan
    print(f"N={n} max|L_N - L|={np.max(np.abs(series - law)):.6g} "
          f"max|L_N - L_N(0)|={np.max(np.abs(series - series[0])):.6g} 5a/N={5 * a / n:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chainlab", description="Follow-the-leader chain simulator and checks.",
                                epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_, config="required", out=True):
        sp = sub.add_parser(name, help=help_, description=help_, epilog=EPILOG,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        if config:
            sp.add_argument("--config", required=config == "required", help="scenario file")
        if out:
            sp.add_argument("--out", required=True, help="output CSV; figures and reports go next to it")
            sp.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
        sp.add_argument("--seed", type=int, default=None, help=f"seed for randomised suites (default {DEFAULT_SEED})")
        sp.set_defaults(func=func)
        return sp

    add("simulate", cmd_simulate, "integrate a scenario; writes t,k,r,v,q CSV, a JSON report and a figure")
    v = add("verify", cmd_verify, "run a named check suite", config=None, out=False)
    v.add_argument("suite", help="one of: " + ", ".join(checks.SUITES))
    add("spectrum", cmd_spectrum, "complex grid of the spectrum; writes re,im,inside")
    add("saddle", cmd_saddle, "ray asymptotics vs simulation; writes k,predicted,simulated")
    s = add("sweep", cmd_sweep, "(alpha, omega) grid sweep; writes the phase-diagram CSV", config="optional")
    s.add_argument("--workers", type=int, default=1, help="worker processes (output does not depend on it)")
    add("density", cmd_density, "mean car length L_N(t) against the infinite-chain law; writes t,L_N,L")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"cannot read/write: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ModelError, oracle.ResonanceError) as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
