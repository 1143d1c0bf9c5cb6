"""Banner, help epilogs and result formatting for the command-line harness."""

from rich.markup import escape

from storage.libsvm import DATASET_TAU

ALPHA_GRID = (0.01, 0.1, 1.0, 10.0)

WELCOME_MESSAGE = """
Heavy-ball benchmark for constrained nonsmooth convex problems.

Runs projected subgradient descent, heavy-ball momentum with time-varying
or constant β, and their adaptive (EMA) variants, and checks the
reformulation identities, the EMA sum bound and empirical O(1/√t) rates.
"""

RUN_EPILOG = """
examples:
  run --problem hard --T 1000 --c 2 --optimizer psg --alpha 2 --iters 1000
  run --problem hard --T 1000 --c 2 --optimizer adahb_tv --alpha 0.08 --gamma 0.9
  run --problem hinge --dataset a9a.txt --optimizer hb_tv --alpha 1 --iters 10000 --batch 16
  run --problem maxlinear --optimizer hb_tv --alpha 0.5 --iters 10000 --checks rate,reformulation

The α of each optimizer is picked from the grid {grid}; τ presets per dataset
file stem: {presets}.
""".format(
    grid=", ".join(f"{alpha:g}" for alpha in ALPHA_GRID),
    presets=", ".join(f"{name}={tau:g}" for name, tau in DATASET_TAU.items()),
)

COMPARE_EPILOG = """
examples:
  compare --problem hard --T 1000 --c 2 --run psg:2 --run hb_tv:8 --run adahb_tv:0.08 --gamma 0.9
  compare --config manifest.json --output traces/compare.csv --workers 3

Each --run is OPTIMIZER:ALPHA[:BETA]. All runs share the problem and its f*.
"""

VERIFY_EPILOG = """
suites:
  projections  sort-based projections against brute-force KKT enumeration
  identities   z-space reformulation of HB, constant-β HB and adaptive HB
  ema          EMA sum bound, √t·v̂ₜ monotonicity, β₁ₜ schedule
  rates        log–log slope recovery on exact power laws and real runs
  all          every suite above
"""

EXIT_CODES = {
    0: "success",
    1: "an enabled check failed",
    2: "usage or configuration error",
}


def format_value(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def format_check(name: str, passed: bool, value, detail: str = "") -> str:
    """Rich markup line for one invariant or check."""
    status = "[green]PASS[/green]" if passed else "[red bold]FAIL[/red bold]"
    line = f"{status} {name} = {format_value(value)}"
    return f"{line} [dim]({escape(detail)})[/dim]" if detail else line
