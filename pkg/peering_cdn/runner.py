"""High-level functions for running scenarios, parameter sweeps and predictor comparisons, and for writing their outputs."""

import bisect
import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

try:
    from tqdm.auto import tqdm
except ImportError:  # pragma: no cover
    # Handles this issue: https://github.com/tqdm/tqdm/issues/1082
    from tqdm import tqdm  # type: ignore [no-redef]

from . import eventlog as ev
from .engine import Prediction, Simulation
from .eventlog import EventLog
from .exceptions import ConfigurationError, OutputError
from .metrics import Metrics, collect_metrics
from .predictors import PREDICTORS
from .scenario import Scenario, set_parameter

logger = logging.getLogger(__name__)

EVENT_LOG_NAME = 'events.log'
SWEEP_COLUMNS = (
    'parameter', 'value', 'seed', 'scenario_hash', 'total_requests', 'served_within_threshold', 'sla_violation_rate',
    'mean_latency_ms', 'total_penalty_load', 'total_penalty', 'total_payments', 'auctions_opened', 'auctions_awarded',
    'replicas_placed',
)


@dataclass
class RunResult:
    scenario: Scenario
    log: EventLog
    metrics: Metrics
    predictions: List[Prediction] = field(default_factory=list)


def simulate(scenario: Scenario, *, auctions_enabled: bool = True, record_predictions: bool = False) -> RunResult:
    """Runs ``scenario`` to completion in a fresh, isolated world."""
    sim = Simulation(scenario, auctions_enabled=auctions_enabled, record_predictions=record_predictions)
    log = sim.run()
    return RunResult(scenario=scenario, log=log, metrics=collect_metrics(log), predictions=sim.predictions)


def ensure_out_dir(out_dir: Union[str, Path]) -> Path:
    """Creates ``out_dir`` if needed.

    Raises
    ------
    OutputError
        If the directory cannot be created or is not writable.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(f'Cannot create output directory {out_dir}: {e.strerror or e}') from None
    return out_dir


def _write(write, path: Path):
    try:
        return write()
    except OSError as e:
        raise OutputError(f'Cannot write {path}: {e.strerror or e}') from None


def run_scenario(scenario: Scenario, out_dir: Union[str, Path], *, auctions_enabled: bool = True) -> RunResult:
    """Runs ``scenario`` and writes ``events.log``, ``metrics.txt`` and ``metrics.json`` to ``out_dir``.

    Raises
    ------
    OutputError
        If the outputs cannot be written.
    """
    out_dir = ensure_out_dir(out_dir)
    result = simulate(scenario, auctions_enabled=auctions_enabled)
    _write(lambda: result.log.write(out_dir / EVENT_LOG_NAME), out_dir / EVENT_LOG_NAME)
    _write(lambda: result.metrics.write(out_dir), out_dir)
    logger.info('Wrote outputs of scenario "%s" to %s', scenario.name, out_dir)
    return result


def sweep_scenarios(scenario: Scenario, parameter: str, values: Sequence[float]) -> List[Scenario]:
    """One scenario per value, each a copy of ``scenario`` with ``parameter`` set to that value.

    Raises
    ------
    ConfigurationError
        If ``values`` is empty or ``parameter`` does not address a numeric scenario field.
    ScenarioInvalid
        If a value makes the scenario invalid.
    """
    if not values:
        raise ConfigurationError('A sweep needs at least one value.')
    try:
        return [Scenario.from_dict(set_parameter(scenario.raw, parameter, value)) for value in values]
    except KeyError as e:
        raise ConfigurationError(f'Cannot sweep "{parameter}": {e.args[0]}') from None


def sweep(
        scenario: Scenario,
        parameter: str,
        values: Sequence[float],
        out_dir: Union[str, Path],
        *,
        jobs: int = 4,
        progress: bool = True,
        auctions_enabled: bool = True
) -> Path:
    """Runs ``scenario`` once per value of ``parameter`` and writes one row per value to ``sweep.csv``.

    Runs are independent and execute concurrently on ``jobs`` threads; rows are written in the order of ``values``.

    Returns
    -------
    path : Path
        The path of the CSV file.
    """
    scenarios = sweep_scenarios(scenario, parameter, values)
    out_dir = ensure_out_dir(out_dir)
    path = out_dir / 'sweep.csv'

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        with tqdm(total=len(scenarios), unit='run', disable=not progress) as pbar:
            results = []
            for result in executor.map(lambda s: simulate(s, auctions_enabled=auctions_enabled), scenarios):
                results.append(result)
                pbar.update(1)

    def write():
        with path.open('w', newline='') as dst:
            writer = csv.writer(dst, lineterminator='\n')
            writer.writerow(SWEEP_COLUMNS)
            for value, result in zip(values, results):
                m = result.metrics
                writer.writerow([
                    parameter, value, m.seed, m.scenario_hash, m.total_requests, m.served_within_threshold,
                    repr(m.sla_violation_rate), f'{m.mean_latency_ms:.6f}', m.total_penalty_load, m.total_penalty, m.total_payments,
                    m.auctions_opened, m.auctions_awarded, m.replicas_placed,
                ])
    _write(write, path)
    return path


def realized_requests(log: EventLog, predictions: Sequence[Prediction]) -> List[int]:
    """Requests actually made for each prediction's content within ``(time, time + horizon_s]``."""
    times: Dict[str, List[float]] = {}
    for record in log.of_kind(ev.REQUEST):
        times.setdefault(record.get('content'), []).append(record.at)
    realized = []
    for prediction in predictions:
        arrivals = times.get(str(prediction.content), [])
        end = float(f'{prediction.time + prediction.horizon_s:.6f}')
        realized.append(bisect.bisect_right(arrivals, end) - bisect.bisect_right(arrivals, float(f'{prediction.time:.6f}')))
    return realized


def mean_absolute_errors(predictions: Sequence[Prediction], realized: Sequence[int]) -> Dict[str, Optional[float]]:
    """Mean absolute error of every predictor, or ``None`` when there was no auction to score."""
    if not predictions:
        return {name: None for name in PREDICTORS}
    return {
        name: sum(abs(p.expected[name] - actual) for p, actual in zip(predictions, realized)) / len(predictions)
        for name in PREDICTORS
    }


def compare_predictors(scenario: Scenario, out_dir: Union[str, Path]) -> Tuple[Path, Path, Dict[str, Optional[float]]]:
    """Runs ``scenario`` recording every predictor's forecast at each auction, and scores the forecasts against the requests that
    followed.

    Writes ``predictions.csv`` (one row per auction) and ``predictor_mae.csv`` (one row per predictor) to ``out_dir``.
    """
    out_dir = ensure_out_dir(out_dir)
    result = simulate(scenario, record_predictions=True)
    realized = realized_requests(result.log, result.predictions)
    errors = mean_absolute_errors(result.predictions, realized)

    predictions_path = out_dir / 'predictions.csv'
    mae_path = out_dir / 'predictor_mae.csv'

    def write_predictions():
        with predictions_path.open('w', newline='') as dst:
            writer = csv.writer(dst, lineterminator='\n')
            writer.writerow(['auction', 'time', 'content', 'region', 'horizon_s', 'realized', *PREDICTORS])
            for prediction, actual in zip(result.predictions, realized):
                writer.writerow([
                    prediction.auction, f'{prediction.time:.6f}', prediction.content, prediction.region,
                    f'{prediction.horizon_s:.6f}', actual, *(f'{prediction.expected[name]:.6f}' for name in PREDICTORS),
                ])

    def write_errors():
        with mae_path.open('w', newline='') as dst:
            writer = csv.writer(dst, lineterminator='\n')
            writer.writerow(['predictor', 'mae', 'auctions'])
            for name, error in errors.items():
                writer.writerow([name, '' if error is None else f'{error:.6f}', len(result.predictions)])

    _write(write_predictions, predictions_path)
    _write(write_errors, mae_path)
    return predictions_path, mae_path, errors
