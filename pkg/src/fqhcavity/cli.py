"""Command-line runner: ``fqhcavity run|validate|list-presets``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
from dataclasses import replace
from pathlib import Path

THREAD_ENV = "FQHCAVITY_THREADS"
_BLAS_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

PRESET_DIR = Path(__file__).with_name("presets")


def _set_threads(n) -> None:
    # must run before numpy is imported to take effect
    if n:
        for var in _BLAS_VARS:
            os.environ[var] = str(int(n))


def list_presets() -> dict[str, str]:
    from .config import load_config

    out = {}
    for path in sorted(PRESET_DIR.glob("*.ini")):
        out[path.stem] = load_config(path).description
    return out


def resolve_config(name_or_path: str):
    from .config import load_config

    path = Path(name_or_path)
    if path.exists():
        return load_config(path)
    preset = PRESET_DIR / f"{name_or_path}.ini"
    if preset.exists():
        return load_config(preset)
    from .errors import ConfigError

    raise ConfigError(f"no config file or preset named {name_or_path!r}")


def _run_dir(base: Path, name: str) -> Path:
    out = base / name
    i = 1
    while out.exists():
        out = base / f"{name}-{i}"
        i += 1
    out.mkdir(parents=True)
    return out


def _cavity_params(m):
    from .hamiltonians import CavityParams

    if m.g > 0 and m.Delta > 0:
        return CavityParams.symmetric(m.g, m.Delta, m.Omega, m.J)
    return CavityParams.from_ratios(m.delta_over_J, m.J_over_omega, m.J)


def execute(cfg, out: Path) -> tuple[dict, list[str]]:
    """Run the configured task, write its artifacts into ``out``, return (results, summary lines)."""
    from . import experiments as ex
    from .eigensolver import lowest_eigenpairs
    from .hamiltonians import PinningPotential, build_cavity_model, build_hardcore_fqh
    from .hilbert import CavityBasis, HardCoreBasis
    from .observables import write_json, write_site_csv

    task, model = cfg.task, cfg.model
    system = ex.System(cfg.lattice.spec(), cfg.gauge.alpha, model.N, cfg.gauge.solenoids)
    csv_on = "csv" in cfg.output.formats
    lines: list[str] = []
    seed = cfg.seed

    if task.kind == "spectrum":
        L = system.lattice
        pin = PinningPotential(tuple((L.site(p, q), model.eps * model.t) for p, q in model.pinned))
        if model.kind == "hardcore":
            basis = HardCoreBasis(L, model.N)
            H = build_hardcore_fqh(basis, system.pattern, model.t, pin)
            scale = model.t
        else:
            basis = CavityBasis(L, model.N)
            params = _cavity_params(model)
            H = build_cavity_model(basis, system.pattern, params, pin)
            scale = params.t
        spec = lowest_eigenpairs(H, task.k, task.tol, seed=seed, cluster_tol=1e-8 * scale)
        result = spec.to_json()
        result["eigenvalues_over_scale"] = (spec.eigenvalues / scale).tolist()
        if "bin" in cfg.output.formats:
            spec.save(out / "spectrum")
        lines.append(f"dimension {basis.dim}; lowest {task.k} eigenvalues / scale:")
        lines += [f"  {e:.12f}" for e in spec.eigenvalues / scale]
        lines.append(f"clusters: {spec.clusters}")
    elif task.kind == "fidelity":
        if model.kind == "hardcore":
            result, spec = ex.run_ideal_fidelity(system, task.m, model.t, max(task.k, 2), seed)
        else:
            result, spec = ex.run_cavity_fidelity(system, _cavity_params(model), task.m, max(task.k, 2), seed)
            lines.append(f"photon-free weight of ground states: {result['photon_free_weight']}")
        f = result["fidelity"]
        lines.insert(0, f"projector fidelity {f['projector']:.6f}")
        lines.insert(1, f"best-sector fidelity {f['best_sector']:.6f}")
        lines.append(f"unrenormalized projector fidelity {f['raw_projector']:.6f}")
        lines.append(f"ground manifold size {result['ground_manifold_size']}")
    elif task.kind == "convergence":
        result = ex.run_convergence(task.scales, system, seed)
        for r in result["rows"]:
            lines.append(f"delta/J = J/omega = {r['delta_over_J']:g}: projector fidelity {r['projector']:.6f}")
        lines.append(f"ideal-model value {result['ideal_projector']:.6f}; monotone: {result['monotone']}")
    elif task.kind == "gap-curve":
        pinned = model.pinned or ex.DEFAULT_PINNED
        result, curve = ex.run_gap_curve(task.epsilons, system, pinned, model.t, max(task.k, 3), seed)
        if csv_on:
            curve.to_csv(out / "gap_curve.csv")
        lines.append(f"splitting at eps=0: {result['splitting_at_zero']}")
        lines.append(f"smallest first gap for eps>0: {result['min_first_gap_positive_eps']}")
        lines.append(f"product-state overlap at largest eps: {result['overlap_at_max_eps']:.6f}")
        lines.append(f"min over grid of E2-E0: {result['min_path_gap_E2_minus_E0']:.6f}")
    elif task.kind == "preparation":
        pinned = model.pinned or ex.DEFAULT_PINNED
        result, _ = ex.run_preparation(task.durations, system, pinned, task.eps0, model.t, task.dt, task.shape, seed)
        for r in result["rows"]:
            lines.append(f"T = {r['T']:g}/t: ground-manifold fidelity {r['fidelity']:.8f}")
        lines.append(f"static overlap (sudden quench) {result['static_overlap']:.6f}; monotone: {result['monotone']}")
    elif task.kind == "flux-insertion":
        result = ex.run_flux_insertion(
            task.durations, system, tuple(task.plaquette), task.orientation, model.t, task.dt, task.shape, seed
        )
        for r in result["rows"]:
            lines.append(
                f"T = {r['T']:g}/t: depletion near solenoid {r['depletion_region']:.4f}, "
                f"round-trip fidelity {r['round_trip_fidelity']:.6f}"
            )
        if csv_on:
            last = result["rows"][-1]
            write_site_csv(out / "depletion_map.csv", system.lattice, {"depletion_map": last["depletion_map"]})
    elif task.kind == "oracle":
        result = ex.run_oracle(system, _cavity_params(model), seed)
        lines += [f"{k}: {v:.3e}" for k, v in result.items()]
    elif task.kind == "regime":
        result = ex.run_regime(_cavity_params(model), task.gamma, task.Nb, task.factor)
        lines += [f"{k}: {'pass' if v else 'FAIL'}" for k, v in result["checks"].items()]
        d = result["decay"]
        lines.append(f"decay rate {d['effective_rate']:.3e} vs t {d['t']:.3e}: ratio {d['ratio']:.4f}")
    else:  # pragma: no cover - validate() rejects unknown kinds
        raise AssertionError(task.kind)
    write_json(out / "results.json", result)
    return result, lines


def _metadata(cfg) -> dict:
    import numpy
    import scipy

    from . import __version__

    return {
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "seed": cfg.seed,
        "solver": {"eigensolver": "thick-restart block Lanczos", "tol": cfg.task.tol, "propagator": "Lanczos exp, midpoint", "dt": cfg.task.dt},
        "gauge": {"alpha": str(cfg.gauge.alpha), "convention": "landau A=(-alpha*y,0), theta_x=-2*pi*alpha*p*q"},
        "units": "energies in units of t (hard-core) or J (cavity); times in 1/t",
    }


def _error(exc, code: int, out: Path | None = None) -> int:
    report = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(report), file=sys.stderr)
    if out is not None:
        (out / "error.json").write_text(json.dumps(report, indent=2))
    return code


def _exit_code(exc) -> int:
    from .errors import ConfigError, DimensionTooLarge, NumericalError, QuadratureFailure

    if isinstance(exc, (NumericalError, QuadratureFailure, DimensionTooLarge)):
        return 2
    if isinstance(exc, ConfigError):
        return 1
    from .errors import FQHError

    return 1 if isinstance(exc, FQHError) else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fqhcavity", description="Lattice FQH / cavity-array experiments")
    parser.add_argument("--threads", type=int, default=None, help=f"BLAS threads (default: ${THREAD_ENV})")
    sub = parser.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run a config file or bundled preset")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config")
    sub.add_parser("list-presets", help="list bundled configs")
    args = parser.parse_args(argv)

    _set_threads(args.threads or os.environ.get(THREAD_ENV))
    from .errors import FQHError

    if args.cmd == "list-presets":
        for name, desc in list_presets().items():
            print(f"{name}\t{desc}")
        return 0
    try:
        cfg = resolve_config(args.config)
    except FQHError as exc:
        return _error(exc, _exit_code(exc))
    if args.cmd == "validate":
        print(f"{cfg.name}: ok ({cfg.task.kind}, {cfg.model.kind})")
        return 0

    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    base = Path(args.output_dir or cfg.output.directory)
    out = _run_dir(base, cfg.name)
    (out / "config.ini").write_text(cfg.to_ini())
    (out / "metadata.json").write_text(json.dumps(_metadata(cfg), indent=2))
    try:
        _, lines = execute(cfg, out)
    except Exception as exc:  # structured report for any failure inside a run
        return _error(exc, _exit_code(exc), out)
    text = f"{cfg.name}: {cfg.description}\n" + "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text)
    print(text, end="")
    print(f"results in {out}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
