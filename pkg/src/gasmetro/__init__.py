"""Multi-parameter quantum metrology with antiunitary-symmetric probe models."""

from .measurement import Povm, born_probabilities, povm_aamcm, povm_bell, povm_mem, povm_mub_like, sample_outcomes
from .metrology import fim, hcrb, qfim, scalar_qcrb, sld, uhlmann
from .models import ModelKind, ParamPoint, build_model, check_gas

__version__ = "0.1.0"
