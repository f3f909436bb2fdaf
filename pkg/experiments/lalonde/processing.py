from pathlib import Path

from src.cli.config import load_config, validate
from src.data_io.bootstrap import bootstrap_analysis
from src.data_io.dataset import load_csv

CONFIG = Path(__file__).with_name("config.json")


def processing_function(input_dict):
    config = load_config(input_dict.get("config", CONFIG), "bootstrap")
    validate(config)
    settings = config.bootstrap

    # Input CSVs: "experimental" / "comparison" entries override the config paths
    experimental = load_csv(input_dict.get("experimental", settings.experimental), settings.schema,
                            tag="experimental")
    comparison = load_csv(input_dict.get("comparison", settings.comparison), settings.schema,
                          tag="comparison")
    report = bootstrap_analysis(experimental, comparison, config.model_grid(), config.estimators,
                                resamples=settings.resamples, seed=config.seed,
                                pca_ratio=settings.pca_ratio, pca_standardize=settings.pca_standardize,
                                benchmark=settings.benchmark, workers=config.workers, progress=False)
    return {"report": report, "sizes": {"experimental": experimental.n, "treated": experimental.n1,
                                        "comparison": comparison.n}}
