# flake8: noqa
from .__version__ import __version__
from .engine import Simulation
from .metrics import Metrics, collect_metrics
from .profiles import get_profile
from .runner import compare_predictors, run_scenario, simulate, sweep
from .scenario import Scenario, bundled_scenario, load_scenario, validate
