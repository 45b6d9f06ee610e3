"""Time-dependent model problems marched with RK4."""
from .advection import run_advection
from .maxwell import run_maxwell_tm
from .swe import compute_diagnostics, run_swe, zero_tendency_residual
from .timestep import VARIANTS, DiagnosticSeries, NumericalAbort, SimConfig, rk4_march

RUNNERS = {
    "advection": run_advection,
    "maxwell_tm": run_maxwell_tm,
    "swe": run_swe,
}


def run(config, return_state=False):
    """Dispatch a SimConfig to its model runner."""
    return RUNNERS[config.model](config, return_state=return_state)


__all__ = [
    "DiagnosticSeries", "NumericalAbort", "RUNNERS", "SimConfig", "VARIANTS",
    "compute_diagnostics", "rk4_march", "run", "run_advection", "run_maxwell_tm",
    "run_swe", "zero_tendency_residual",
]
