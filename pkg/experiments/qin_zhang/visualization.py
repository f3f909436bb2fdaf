import pandas as pd


def efficiency_ratios(cells):
    # Variance of LIK relative to the AIPW-type estimators in every cell
    rows = []
    for (design, combo), group in cells.groupby(["design", "combo"], sort=False):
        variance = group.set_index("estimator")["variance"]
        row = {"design": design, "combo": combo}
        for other in ("AIPW", "AIPW.HIR"):
            if "LIK" in variance and other in variance:
                row[f"LIK/{other}"] = variance["LIK"] / variance[other]
        rows.append(row)
    return pd.DataFrame(rows)


def visualization_function(inputs_dict, processing_dict):
    report = processing_dict["report"]
    output = {"plots": {}, "tables": {}}
    output["tables"]["Bias and variance"] = processing_dict["wide"]
    output["tables"]["Cells"] = report.cells[["design", "combo", "estimator", "mean", "bias", "mc_se",
                                              "variance", "failures"]]
    output["tables"]["Variance ratios"] = efficiency_ratios(report.cells)
    # boxplot-ready summary; drawing is left to the caller
    output["tables"]["Boxplot summary"] = processing_dict["boxplot"]
    return output
