"""
Commands - simulate, estimate and bootstrap runs driven by a validated RunConfig
"""

import logging
from pathlib import Path
from typing import Callable, Dict, List

from src.cli.config import RunConfig, validate
from src.cli.reports import estimate_table, report_header, write_report
from src.data_io.bootstrap import bootstrap_analysis
from src.data_io.dataset import load_csv
from src.errors import CalibattError, ConfigError, DataError, StructuralError
from src.estimation.bundle import evaluate_combo
from src.simulation.monte_carlo import boxplot_table, run_monte_carlo
from src.utils import config_hash

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3


def exit_code(error: Exception) -> int:
    """Map an error raised by a run onto the documented exit status"""
    if isinstance(error, (ConfigError, StructuralError)):
        return EXIT_CONFIG
    if isinstance(error, (DataError, OSError)):
        return EXIT_DATA
    return EXIT_FAILURE


def _simulate(config: RunConfig, progress: bool) -> List[Path]:
    report = run_monte_carlo(config.simulation_designs(), config.simulation_replicates(),
                             estimators=config.estimators, grid=config.model_grid(),
                             seed=config.seed, workers=config.workers, progress=progress)
    tables = {"wide": report.wide_table(), "cells": report.cells}
    if config.output.long:
        tables["long"] = report.long
        tables["boxplot"] = boxplot_table(report.long, config.output.boxplot_limits)
    header = report_header("simulate", config.to_dict(), config.seed)
    logger.info("Simulation finished: %d cells, %d failed replicate estimates", len(report.cells), report.failures)
    return write_report(config.output.dir, "simulation", header, tables, config.output.format)


def _estimate(config: RunConfig, progress: bool) -> List[Path]:
    data = load_csv(config.data.path, config.data.schema)
    results = {combo.label: evaluate_combo(data, combo, config.estimators) for combo in config.model_grid()}
    table = estimate_table(results)
    failed = int((table["error"] != "").sum())
    if failed:
        logger.warning("%d of %d estimates failed; see the error column", failed, len(table))
    header = report_header("estimate", config.to_dict(), config.seed)
    extra = {"data": {"rows": data.n, "treated": data.n1, "untreated": data.n0}}
    return write_report(config.output.dir, "estimates", header, {"estimates": table},
                        config.output.format, extra)


def _bootstrap(config: RunConfig, progress: bool) -> List[Path]:
    settings = config.bootstrap
    experimental = load_csv(settings.experimental, settings.schema, tag="experimental")
    comparison = load_csv(settings.comparison, settings.schema, tag="comparison")
    report = bootstrap_analysis(experimental, comparison, config.model_grid(), config.estimators,
                                resamples=settings.resamples, seed=config.seed,
                                pca_ratio=settings.pca_ratio, pca_standardize=settings.pca_standardize,
                                benchmark=settings.benchmark, workers=config.workers, progress=progress)
    tables = {"summary": report.table}
    if config.output.long:
        tables["long"] = report.long
    header = report_header("bootstrap", config.to_dict(), config.seed)
    extra = {}
    if settings.benchmark is not None:
        extra["benchmark"] = {"estimate": settings.benchmark[0], "se": settings.benchmark[1]}
    return write_report(config.output.dir, "bootstrap", header, tables, config.output.format, extra)


def _guarded(run: Callable[[RunConfig, bool], List[Path]], config: RunConfig, progress: bool) -> int:
    try:
        validate(config)
        logger.info("Running %s (seed=%d, workers=%d, config %s)", config.command, config.seed, config.workers,
                    config_hash(config.to_dict())[:12])
        written = run(config, progress)
    except (CalibattError, OSError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return exit_code(e)
    for path in written:
        logger.debug("Output: %s", path)
    return EXIT_OK


def cmd_simulate(config: RunConfig, progress: bool = True) -> int:
    return _guarded(_simulate, config, progress)


def cmd_estimate(config: RunConfig, progress: bool = True) -> int:
    return _guarded(_estimate, config, progress)


def cmd_bootstrap(config: RunConfig, progress: bool = True) -> int:
    return _guarded(_bootstrap, config, progress)


COMMAND_HANDLERS: Dict[str, Callable[[RunConfig, bool], int]] = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "bootstrap": cmd_bootstrap,
}
