from __future__ import annotations

import argparse
import logging
from importlib import metadata
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import scipy
from dotenv import load_dotenv

from .analysis import (
    convexity_audit_potential,
    convexity_audit_stream,
    initial_guesses,
    multistart_uniqueness,
)
from .background import bernoulli_drift, mach_profile
from .config import Settings
from .exceptions import (
    AdmissibilityError,
    ConfigError,
    DivergenceError,
    DomainError,
    HypothesisViolation,
    LabError,
    SingularAssemblyError,
    SolverBreakdown,
    SonicBreakdown,
)
from .run_config import RunConfig, parse_config
from .solver import coercivity_probe, cross_section_fluxes, picard_solve

log = logging.getLogger(__name__)

# =============================================================================
# Output File Naming Convention
# =============================================================================
# All output files follow the pattern:
#   eplab_{data_type}[_{formulation}].csv
#
# Examples:
#   eplab_background.csv            - 1D background profile on the x1 nodes
#   eplab_solution_potential.csv    - 2D fields of a potential-formulation solve
#   eplab_iterations_stream.csv     - Residual history of a stream solve
#   eplab_fluxes_potential.csv      - Mass flux through every cross-section
#   eplab_convexity_stream.csv      - Convexity audit summary
#   eplab_multistart_potential.csv  - Pairwise distances of multistart solutions
#   eplab_coercivity_potential.csv  - Sampled coercivity quotients
#   manifest.txt                    - Config echo (re-readable) plus versions
#
# Reruns with the same config and seed produce byte-identical files.
# =============================================================================

# Exit status per error family
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_SONIC = 4
EXIT_DIVERGENCE = 5
EXIT_LINEAR = 6
EXIT_HYPOTHESIS = 7
EXIT_OTHER = 1


def exit_code(exc: LabError) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, HypothesisViolation):
        return EXIT_HYPOTHESIS
    if isinstance(exc, SonicBreakdown):
        return EXIT_SONIC
    if isinstance(exc, DivergenceError):
        return EXIT_DIVERGENCE
    if isinstance(exc, (SingularAssemblyError, SolverBreakdown)):
        return EXIT_LINEAR
    if isinstance(exc, (DomainError, AdmissibilityError)):
        return EXIT_DOMAIN
    return EXIT_OTHER


def _write_outputs(df: pd.DataFrame, out_base: Path) -> None:
    """Write DataFrame to CSV with 17 significant digits and LF line endings.

    Args:
        df: DataFrame to write.
        out_base: Base path without extension (e.g., data/eplab_background).
    """
    out_base.parent.mkdir(parents=True, exist_ok=True)
    csv_path = out_base.with_suffix(".csv")
    df.to_csv(csv_path, index=False, float_format="%.17g", lineterminator="\n")
    print(f"Wrote {len(df)} rows -> {csv_path}")


def _package_version() -> str:
    try:
        return metadata.version("euler-poisson-lab")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _write_manifest(cfg: RunConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    header = [
        f"# euler-poisson-lab {_package_version()}",
        f"# numpy {np.__version__}",
        f"# scipy {scipy.__version__}",
        f"# pandas {pd.__version__}",
    ]
    path = out_dir / "manifest.txt"
    path.write_text("\n".join(header) + "\n" + cfg.to_text(), encoding="utf-8", newline="\n")
    print(f"Wrote manifest -> {path}")


def _load_config(args: argparse.Namespace, settings: Settings) -> RunConfig:
    cfg = parse_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be non-negative, got {args.seed}")
        cfg = cfg.model_copy(update={"seed": args.seed})
    elif "seed" not in cfg.model_fields_set:
        cfg = cfg.model_copy(update={"seed": settings.seed})
    return cfg


def run(args: argparse.Namespace, settings: Settings) -> None:
    cfg = _load_config(args, settings)
    out_dir = Path(args.out or settings.out_dir)
    _write_manifest(cfg, out_dir)

    if args.cmd == "background":
        law = cfg.law()
        bg = cfg.background(settings.sonic_floor)
        df = pd.DataFrame(
            {
                "x1": bg.x1,
                "rho_bar": bg.rho_bar,
                "u_bar": bg.u_bar,
                "E_bar": bg.E_bar,
                "Phi_bar": bg.Phi_bar,
                "mach": mach_profile(bg, law),
                "phi_bar": bg.phi_bar,
            }
        )
        _write_outputs(df, out_dir / "eplab_background")
        print(f"K0 = {bg.K0:.17g}, min(p' - u^2) = {bg.subsonic_margin:.6g}")
        print(f"Bernoulli drift = {bernoulli_drift(bg, law):.3g}")

    elif args.cmd in ("solve-potential", "solve-stream"):
        formulation = "potential" if args.cmd == "solve-potential" else "stream"
        problem = cfg.problem(formulation, settings.sonic_floor)
        state, report = picard_solve(problem, cfg.picard_config(settings.linear_rtol))
        _write_outputs(state.to_frame(), out_dir / f"eplab_solution_{formulation}")
        _write_outputs(report.to_frame(), out_dir / f"eplab_iterations_{formulation}")
        fluxes = cross_section_fluxes(problem, state)
        _write_outputs(pd.DataFrame({"flux": fluxes}), out_dir / f"eplab_fluxes_{formulation}")
        print(
            f"{report.method}: converged={report.converged} iterations={report.iterations} "
            f"contraction={report.contraction_estimate:.4g} margin_min={state.margin_min:.6g}"
        )

    elif args.cmd == "audit-convexity":
        if cfg.formulation == "potential":
            audit = convexity_audit_potential(
                cfg.law(), cfg.delta, cfg.n_pairs, cfg.n_t_samples, seed=cfg.seed
            )
        else:
            audit = convexity_audit_stream(
                cfg.gamma, cfg.lam, cfg.n_pairs, cfg.n_t_samples, seed=cfg.seed
            )
        _write_outputs(audit.to_frame(), out_dir / f"eplab_convexity_{cfg.formulation}")
        print(f"violations={audit.violations} min_margin={audit.min_margin_along_paths:.6g}")

    elif args.cmd == "uniqueness-test":
        problem = cfg.problem(sonic_floor=settings.sonic_floor)
        guesses = initial_guesses(problem, cfg.n_starts, cfg.start_scale, seed=cfg.seed)
        multi = multistart_uniqueness(problem, guesses, cfg.picard_config(settings.linear_rtol))
        _write_outputs(multi.to_frame(), out_dir / f"eplab_multistart_{cfg.formulation}")
        _write_outputs(multi.starts_frame(), out_dir / f"eplab_starts_{cfg.formulation}")
        print(f"max distance={multi.max_distance:.3g} max energy={multi.max_energy:.3g}")

    elif args.cmd == "coercivity-probe":
        problem = cfg.problem(sonic_floor=settings.sonic_floor)
        probe = coercivity_probe(problem, n_samples=cfg.n_samples, seed=cfg.seed)
        df = pd.DataFrame({"sample": np.arange(len(probe.quotients)), "quotient": probe.quotients})
        _write_outputs(df, out_dir / f"eplab_coercivity_{cfg.formulation}")
        print(
            f"min quotient={probe.min_quotient:.6g} lambda0={probe.lambda0:.6g} "
            f"1/(2|mu|)={probe.kappa_bound:.6g}"
        )


def main(argv: Optional[list[str]] = None) -> None:
    load_dotenv()
    settings = Settings.from_env()
    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s - %(message)s",
    )

    parser = argparse.ArgumentParser(prog="eplab")
    sub = parser.add_subparsers(dest="cmd", required=True)

    def add(name: str, help_text: str) -> None:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, required=True, help="key=value run description")
        p.add_argument("--out", type=Path, default=None, help="Output directory")
        p.add_argument("--seed", type=int, default=None, help="Override the config seed")

    add("background", "Integrate the 1D background")
    add("solve-potential", "Solve the 2D problem in the potential formulation")
    add("solve-stream", "Solve the 2D problem in the stream-function formulation")
    add("audit-convexity", "Sample segments of the subsonic set and count violations")
    add("uniqueness-test", "Solve from several starts and compare the solutions")
    add("coercivity-probe", "Sample the linearized bilinear form")

    args = parser.parse_args(argv)
    try:
        run(args, settings)
    except LabError as e:
        log.error("%s: %s", type(e).__name__, e)
        raise SystemExit(exit_code(e)) from e


if __name__ == "__main__":
    main()
