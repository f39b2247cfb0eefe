"""Wave-packet spreading and decoherence of a two-packet superposition in a
damped oscillator driven by an engineered random force."""

__version__ = "0.1.0"

from .model import (BathParams, CatParams, Constant, CurveTable, DriveParams, OscillatorParams,
                    ParameterError, Params, Regime, Sinusoid, TimeGrid, Units, validate)

__all__ = ["BathParams", "CatParams", "Constant", "CurveTable", "DriveParams", "OscillatorParams",
           "ParameterError", "Params", "Regime", "Sinusoid", "TimeGrid", "Units", "validate",
           "__version__"]
