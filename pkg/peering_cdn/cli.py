import configparser
import logging
import sys
from pathlib import Path
from typing import List, Optional

import click

from .__version__ import __version__
from .exceptions import ConfigurationError, OutputError, ProfileNotFound, ScenarioFileError, ScenarioInvalid
from .metrics import summary
from .profiles import DEFAULT_PROFILE, Profile, get_profile, profiles_path, write_profile
from .runner import compare_predictors, run_scenario, sweep as run_sweep
from .scenario import BUNDLED_DIR, Scenario, bundled_scenario, load_scenario


class UsageFailed(click.ClickException):
    """Bad arguments or an invalid scenario."""
    exit_code = 1


class IOFailed(click.ClickException):
    """A file could not be read or written."""
    exit_code = 2


def _profile(ctx: click.Context) -> Profile:
    try:
        return get_profile(ctx.obj.get('profile'))
    except (ProfileNotFound, ConfigurationError) as e:
        raise UsageFailed(str(e)) from None


def _load(path: Optional[str], seed: Optional[int]) -> Scenario:
    if not path:
        raise UsageFailed('Missing option "--scenario".')
    source = Path(path)
    if not source.exists() and (BUNDLED_DIR / f'{path}.json').exists():
        source = bundled_scenario(path)
    try:
        scenario = load_scenario(source)
    except ScenarioFileError as e:
        raise IOFailed(str(e)) from None
    except ScenarioInvalid as e:
        raise UsageFailed('Invalid scenario:\n' + '\n'.join(f'  {v}' for v in e.violations)) from None
    return scenario.with_seed(seed)


def _out_dir(out: Optional[str], profile: Profile) -> Path:
    if out:
        return Path(out)
    return profile.out_dir or Path.cwd() / 'cdnpeer-out'


def _parse_values(values: str) -> List[float]:
    parsed = []
    for token in values.split(','):
        token = token.strip()
        if not token:
            continue
        try:
            parsed.append(float(token))
        except ValueError:
            raise UsageFailed(f'"{token}" is not a number.') from None
    if not parsed:
        raise UsageFailed('--values needs at least one value.')
    return parsed


scenario_option = click.option('--scenario', 'scenario_path', help='Path of a scenario JSON file, or the name of a bundled scenario.')
out_option = click.option('--out', help='Output directory. Defaults to the profile\'s out_dir, then ./cdnpeer-out.')
seed_option = click.option('--seed', type=click.IntRange(min=0), default=None, help='Overrides the scenario seed.')
no_auction_option = click.option('--no-auction', is_flag=True, help='Baseline run: detect hotspots but never open auctions.')


@click.group()
@click.version_option(version=__version__)
@click.option('--profile', default=None, help='The profile to read defaults from (see "cdnpeer configure").')
@click.option('--verbose', '-v', is_flag=True, help='Log simulator diagnostics to stderr.')
@click.pass_context
def cdnpeer(ctx, profile, verbose):
    """Deterministic simulator of peering CDN providers trading replica storage in sealed-bid auctions."""
    ctx.ensure_object(dict)
    ctx.obj['profile'] = profile
    if verbose:
        logging.basicConfig(level=logging.DEBUG, stream=sys.stderr, format='%(levelname)s %(name)s: %(message)s')


@cdnpeer.command()
@scenario_option
def validate(scenario_path):
    """Check a scenario file and list every violation it contains."""
    scenario = _load(scenario_path, None)
    click.echo(f'OK: scenario "{scenario.name}" ({scenario.hash})')


@cdnpeer.command()
@scenario_option
@out_option
@seed_option
@no_auction_option
@click.pass_context
def run(ctx, scenario_path, out, seed, no_auction):
    """Run one simulation and write its event log and metrics."""
    scenario = _load(scenario_path, seed)
    out_dir = _out_dir(out, _profile(ctx))
    try:
        result = run_scenario(scenario, out_dir, auctions_enabled=not no_auction)
    except OutputError as e:
        raise IOFailed(str(e)) from None
    click.echo(summary(result.metrics))
    click.echo(f'\nWrote events.log, metrics.txt and metrics.json to {out_dir}')


@cdnpeer.command()
@scenario_option
@click.option('--parameter', required=True, help='Dotted path of a numeric scenario field, e.g. "econ.alpha" or "zipf.mu".')
@click.option('--values', required=True, help='Comma-separated values, e.g. "0.6,0.8,0.95".')
@out_option
@seed_option
@no_auction_option
@click.option('--jobs', type=click.IntRange(min=1), default=None, help='Runs executed concurrently. Defaults to the profile\'s jobs.')
@click.pass_context
def sweep(ctx, scenario_path, parameter, values, out, seed, no_auction, jobs):
    """Run a scenario once per parameter value and write one CSV row per run."""
    scenario = _load(scenario_path, seed)
    parsed = _parse_values(values)
    profile = _profile(ctx)
    try:
        path = run_sweep(scenario, parameter, parsed, _out_dir(out, profile), jobs=jobs or profile.jobs,
                         progress=profile.progress, auctions_enabled=not no_auction)
    except ConfigurationError as e:
        raise UsageFailed(str(e)) from None
    except ScenarioInvalid as e:
        raise UsageFailed(f'Sweeping "{parameter}" makes the scenario invalid:\n' + '\n'.join(f'  {v}' for v in e.violations)) from None
    except OutputError as e:
        raise IOFailed(str(e)) from None
    click.echo(f'Wrote {len(parsed)} rows to {path}')


@cdnpeer.command(name='compare-predictors')
@scenario_option
@out_option
@seed_option
@click.pass_context
def compare_predictors_command(ctx, scenario_path, out, seed):
    """Score the empirical, binomial and Zipf revenue predictors against the requests that followed each auction."""
    scenario = _load(scenario_path, seed)
    try:
        predictions_path, mae_path, errors = compare_predictors(scenario, _out_dir(out, _profile(ctx)))
    except OutputError as e:
        raise IOFailed(str(e)) from None
    for name, error in errors.items():
        click.echo(f'{name:<10} MAE {"n/a" if error is None else f"{error:.4f}"}')
    click.echo(f'Wrote {predictions_path} and {mae_path}')


@cdnpeer.command()
@click.option('--profile', default=DEFAULT_PROFILE, help='The name of the profile to configure.')
@click.option('--jobs', prompt='Sweep worker threads', type=click.IntRange(min=1), default=4, help='Runs executed concurrently by sweep.')
@click.option('--out-dir', prompt='Default output directory', default='', help='Output directory used when --out is not given.')
@click.option('--progress/--no-progress', prompt='Show progress bars', default=True, help='Show progress bars during sweeps.')
def configure(profile, jobs, out_dir, progress):
    """Interactively set up the cdnpeer profiles file.

    This tool walks you through setting up a ~/.cdnpeer/profiles file. If you do not provide a --profile option, it will update
    the "default" profile.

    If you need to change the location of the profiles file, set the CDNPEER_HOME environment variable before running this
    command.
    """
    config = configparser.ConfigParser()
    config.read(profiles_path())
    if config.has_section(profile) and not click.confirm(f'Overwrite existing profile "{profile}"'):
        raise click.Abort

    try:
        path = write_profile(profile, {'jobs': str(jobs), 'out_dir': out_dir, 'progress': str(progress).lower()})
    except OSError as e:
        raise IOFailed(f'Cannot write {profiles_path()}: {e.strerror or e}') from None
    click.echo(f'Wrote profile to {path}')
