from .cache import AccessKind, CacheModel
from .cost import instruction_cost
from .pmu import EventObserver, EventVector, OracleObserver, PmuBank
from .predictor import BranchPredictor, BranchResult
