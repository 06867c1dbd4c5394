import os

import scorehazard as sh

folder = "data"
sh.config.Setup(folder=folder, verbose=1, show=True)

# Synthetic responders: one informative covariate and one pure-noise covariate
cfg = sh.synthgen.SynthConfig(
    n=1000,
    true_beta=(0.7, 0.0),
    censor_fraction=0.3,
    seed=7,
)
records = sh.synthgen.generate(cfg)
sh.save_data.save_records(records, os.path.join(folder, "synth.csv"))

episodes = sh.dataset.build_episodes(records)
table = sh.dataset.risk_table(episodes)

inclusion = sh.estimators.product_limit(table)
sh.save_data.save_curve(inclusion, os.path.join(folder, "inclusion_curve.csv"))
sh.plotting.plot_inclusion_curve(inclusion, os.path.join(folder, "inclusion_curve.svg"))

kept, dropped = sh.coxph.collinearity_filter(episodes)
fit = sh.coxph.stepwise_select(episodes.select(kept))
print(sh.save_data.format_cox_summary(fit, 0.95))

additive = sh.aalen.aalen_fit(episodes.select(fit.covariate_names))
for name in additive.covariate_names:
    curve = sh.aalen.coefficient_curve(additive, name)
    sh.plotting.plot_coefficient_curve(
        curve, os.path.join(folder, f"aalen_{name}.svg")
    )
