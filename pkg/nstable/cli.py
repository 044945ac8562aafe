#!/usr/bin/env python3
"""
nstable CLI - batch harness for random-stability experiments
"""

import logging
import sys
from pathlib import Path

import click

from .catalog import list_catalog
from .config import ExperimentConfig, load_suite
from .errors import ConfigError
from .runner import EXIT_CONFIG, run

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
log = logging.getLogger(__name__)

# click option dest -> ExperimentConfig field
FIELDS = {
    'n_law': 'N',
    'x_law': 'X',
    'l_transform': 'L',
    'm_law': 'M',
    'h_law': 'H',
    'c': 'c',
    'c_grid': 'c_grid',
    'sample_size': 'n',
    'seed': 'seed',
    'order': 'order',
    'threads': 'threads',
    'generations': 'generations',
    't_end': 't_end',
    'out': 'out',
}


def experiment_options(f):
    """Flags shared by every experiment command; unset flags leave config-file values alone."""
    options = [
        click.option('--N', 'n_law', help='Counting law, e.g. geometric:p=0.5'),
        click.option('--X', 'x_law', help='Closed-form law, e.g. linnik:alpha=1.5'),
        click.option('--L', 'l_transform', help='Laplace transform, e.g. cosh'),
        click.option('--M', 'm_law', help='Second counting law (commute-check)'),
        click.option('--H', 'h_law', help='Generating distribution, e.g. yule'),
        click.option('--c', 'c', type=float, help='Scale constant'),
        click.option('--c-grid', 'c_grid', help='Scales: a..b, a..b,step or a list (may contain e)'),
        click.option('--n', 'sample_size', type=int, help='Sample size / replicas'),
        click.option('--seed', type=int, help='Master seed'),
        click.option('--order', type=int, help='Series truncation order'),
        click.option('--threads', type=int, help='Worker threads'),
        click.option('--generations', type=int, help='BGW generations'),
        click.option('--t-end', 't_end', type=float, help='CTBP horizon'),
        click.option('--out', type=click.Path(), help='Output directory for report.json / samples.csv'),
        click.option('--config', 'config_path', type=click.Path(), help='YAML/JSON config file; flags override'),
        click.option('--verbose', '-v', is_flag=True, help='Enable verbose logging'),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _overrides(options: dict) -> dict:
    return {FIELDS[key]: value for key, value in options.items() if key in FIELDS and value is not None}


def _finish(result) -> None:
    if result.report is None:
        click.echo(f"✗ Error: {result.error}", err=True)
        sys.exit(result.exit_code)
    click.echo("\n--- Summary ---")
    for record in result.report["reports"]:
        mark = "✓" if record["verdict"] == "pass" else "✗"
        click.echo(
            f"{mark} {record['experiment']}: {record['statistic_name']}={record['value']:.6g} "
            f"(threshold {record['threshold']:.6g})"
        )
    click.echo(f"✓ digest {result.report['digest']}")
    for kind, path in result.paths.items():
        click.echo(f"  • {kind}: {path}")
    sys.exit(result.exit_code)


def _execute(command: str, options: dict) -> None:
    if options.pop('verbose', False):
        logging.getLogger().setLevel(logging.DEBUG)
    config_path = options.pop('config_path', None)
    values = _overrides(options)
    try:
        if config_path:
            suite = load_suite(config_path)
            if len(suite) != 1:
                raise ConfigError(f"{config_path} holds {len(suite)} experiments; use 'nstable run'")
            config = suite[0].override(command=command, **values)
        else:
            config = ExperimentConfig(command=command, **values)
    except ConfigError as e:
        click.echo(f"✗ Config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    _finish(run(config))


@click.group()
def cli():
    """
    nstable - random-stable laws and PGF semigroups

    Verifies stability of closed-form laws under random summation, scans
    semigroups of admissible scales, and simulates branching processes.
    Every command writes a machine-readable report with --out.
    """
    pass


@cli.command('verify-stability')
@experiment_options
def verify_stability(**options):
    """
    Check X_1 + ... + X_N = cX in law, and/or the functional equation phi(L(u)) = L(cu)

    Examples:
        # Exponential law under geometric summation
        nstable verify-stability --N geometric:p=0.5 --X exp1 --c 2 --n 100000 --seed 42

        # Index law: c defaults to E[N]^(1/alpha)
        nstable verify-stability --N geometric:p=0.3333333333 --X linnik:alpha=1.5

        # Functional equation residual on [0, 20]
        nstable verify-stability --N negbin-kM:p=0.5,k=2 --L gamma:shape=0.5 --c 2
    """
    _execute('verify-stability', options)


@cli.command('semigroup-scan')
@experiment_options
def semigroup_scan(**options):
    """
    Decide which scales c give a PGF L(c L^-1(s)) and classify the accepted set

    Examples:
        nstable semigroup-scan --L cosh --c-grid 1..16 --seed 1
        nstable semigroup-scan --L delta1 --c-grid 1..3,0.5
        nstable semigroup-scan --L exponential --c-grid 1.25,1.5,2,e,4
    """
    _execute('semigroup-scan', options)


@cli.command('commute-check')
@experiment_options
def commute_check(**options):
    """
    Sup-norm commutator of two PGFs, or of the mapped PGFs of one transform

    Examples:
        nstable commute-check --N geometric:p=0.5 --M geometric:p=0.25
        nstable commute-check --L cosh --c-grid 4,9
    """
    _execute('commute-check', options)


@cli.command('simulate-bgw')
@experiment_options
def simulate_bgw(**options):
    """
    Simulate a discrete-time branching process and check E[N_k] = m^k and extinction

    Examples:
        nstable simulate-bgw --N geometric:p=0.5 --generations 20 --n 10000
        nstable simulate-bgw --N finite:p0=0.2,p1=0.8 --generations 200 --n 10000
    """
    _execute('simulate-bgw', options)


@cli.command('simulate-ctbp')
@experiment_options
def simulate_ctbp(**options):
    """
    Simulate a continuous-time branching process and check E[N(t)] = e^((c-1)t)

    Examples:
        nstable simulate-ctbp --H yule --t-end 3 --n 10000
        nstable simulate-ctbp --H shifted-geom --t-end 2 --n 10000
    """
    _execute('simulate-ctbp', options)


@cli.command('sample')
@experiment_options
def sample(**options):
    """
    Draw from a closed-form law (or counting law) and check it against its transform

    Examples:
        nstable sample --X mittag-leffler:alpha=0.5 --n 100000 --out results/
        nstable sample --N chebyshev-hitting:n=2 --n 1000000
    """
    _execute('sample', options)


@cli.command('limit-check')
@experiment_options
def limit_check(**options):
    """
    Compare normalised populations with the limit law of the process

    Examples:
        nstable limit-check --N geometric:p=0.5 --generations 25 --n 10000
        nstable limit-check --H yule --t-end 8 --n 10000
        nstable limit-check --H neveu --t-end 4 --n 10000
        nstable limit-check --L exponential --c-grid 1000
    """
    _execute('limit-check', options)


@cli.command('run')
@click.option('--config', 'config_path', required=True, type=click.Path(), help='YAML/JSON suite file')
@click.option('--seed', type=int, help='Override every master seed')
@click.option('--n', 'sample_size', type=int, help='Override every sample size')
@click.option('--threads', type=int, help='Worker threads')
@click.option('--out', type=click.Path(), help='Output directory')
@click.option('--verbose', '-v', is_flag=True, help='Enable verbose logging')
def run_suite(config_path, seed, sample_size, threads, out, verbose):
    """
    Run every experiment of a suite file into one report

    Examples:
        nstable run --config suites/acceptance.yaml --out results/
    """
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    values = _overrides({'seed': seed, 'sample_size': sample_size, 'threads': threads})
    try:
        configs = [config.override(**values) for config in load_suite(config_path)]
    except ConfigError as e:
        click.echo(f"✗ Config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(f"Running {len(configs)} experiments from {Path(config_path).name}")
    _finish(run(configs, out=out))


@cli.command('catalog')
def catalog():
    """
    List every counting law, generating distribution, law and transform

    Examples:
        nstable catalog
    """
    click.echo(list_catalog())


if __name__ == '__main__':
    cli()
