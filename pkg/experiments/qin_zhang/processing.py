from pathlib import Path

from src.cli.config import apply_overrides, load_config, validate
from src.simulation.monte_carlo import boxplot_table, run_monte_carlo

CONFIG = Path(__file__).with_name("config.json")


def processing_function(input_dict):
    # Config: an explicit "config" entry, else the one shipped with the experiment
    config = load_config(input_dict.get("config", CONFIG), "simulate")
    if "replicates" in input_dict:
        config = apply_overrides(config, replicates=int(input_dict["replicates"]))
    validate(config)

    report = run_monte_carlo(config.simulation_designs(), config.simulation_replicates(),
                             estimators=config.estimators, grid=config.model_grid(),
                             seed=config.seed, workers=config.workers, progress=False)
    return {"report": report,
            "wide": report.wide_table(),
            "boxplot": boxplot_table(report.long, config.output.boxplot_limits)}
