import pandas as pd


def formatted(table, column):
    # "mean (se)" cells with combos as rows and estimators as columns
    text = table.apply(lambda r: f"{r[column + '_mean']:.0f} ({r[column + '_se']:.0f})", axis=1)
    return (table.assign(value=text)
            .pivot(index="combo", columns="estimator", values="value")
            .reindex(columns=list(dict.fromkeys(table["estimator"]))))


def visualization_function(inputs_dict, processing_dict):
    report = processing_dict["report"]
    table = report.table
    output = {"plots": {}, "tables": {}}
    output["tables"]["Effect"] = formatted(table, "effect")
    output["tables"]["Evaluation bias"] = formatted(table, "bias")
    output["tables"]["Difference"] = formatted(table, "difference")
    output["tables"]["Point estimates"] = table[["combo", "estimator", "effect_point", "bias_point",
                                                 "difference_point"]]
    if report.benchmark is not None:
        output["tables"]["Benchmark"] = pd.DataFrame([{"estimate": report.benchmark[0],
                                                       "se": report.benchmark[1]}])
    output["tables"]["Sample sizes"] = pd.DataFrame([processing_dict["sizes"]])
    return output
