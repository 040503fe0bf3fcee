"""Should the server personalize privacy noise?  The sweep experiment.

Accuracy weights are drawn lognormally around a moving location; for each
draw the server looks for the allocation with the largest total message
informativeness that everyone still accepts, inside two families: one noise
level for all, or levels proportional to each client's feasibility
coefficient.  Personalization wins in the DP setting everywhere and in the
Bayesian setting for weak preferences; for strong preferences the symmetric
family overtakes it because the first-order coefficients stop being a good
guide far from the status quo (the crossover sits near location 3, decisive
by location 4).

Run: python demos/04_personalized_vs_symmetric.py   (about a minute)
"""

from fedtrade.bayesmean import BayesSetting
from fedtrade.dpmean import DpMeanSetting
from fedtrade.experiment import ExperimentConfig, LambdaModel, run_experiment

M_GRID = (-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0)
REPS = 300


def sweep(kind, setting):
    record = run_experiment(
        ExperimentConfig(
            kind=kind,
            setting=setting,
            lambda_model=LambdaModel(kind="lognormal"),
            m_grid=M_GRID,
            repetitions=REPS,
            grid_points=512,
            seed=0,
            out_dir="unused",
        )
    )
    table = {(row.m, row.family): row for row in record.aggregates}
    print(f"{'location':>9} | {'symmetric':>20} | {'personalized':>20} | edge")
    for m in M_GRID:
        sym = table[(m, "symmetric")]
        per = table[(m, "personalized")]
        edge = "personalized" if per.mean_ratio > sym.mean_ratio else "symmetric"
        print(
            f"{m:9.1f} | {sym.mean_ratio:8.4f} +- {sym.std_ratio:7.4f} | "
            f"{per.mean_ratio:8.4f} +- {per.std_ratio:7.4f} | {edge}"
        )


print(f"== DP mean estimation (achieved fraction of the noiseless optimum, {REPS} draws) ==")
sweep("dpmean", DpMeanSetting(5, 100, 10.0, 20.0))

print(f"\n== Bayesian mean estimation ==")
sweep("bayesmean", BayesSetting(5, 100, 10.0, 1.0))

print(
    "\nFor the archival run (1000 repetitions, CSV + SVG artifacts):\n"
    "  fedtrade experiment --config configs/dpmean_sweep.toml --out results\n"
    "  fedtrade experiment --config configs/bayesmean_sweep.toml --out results"
)
