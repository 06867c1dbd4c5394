"""
scorehazard library

Explain a binary classifier by treating its output score as the index of a
stochastic process.

scorehazard estimates how true responders are spread over the score range
and which input features drive that spread:

- Inclusion curve I(s) = P(S > s) with the product-limit estimator, and the
  Nelson-Aalen cumulative hazard
- Proportional hazards (Cox) fit over score with stepwise selection
- Additive hazards (Aalen) fit giving score-dependent coefficient curves
- Synthetic data with known hazards to validate all of the above

Quick Start:
-----------
```python
import scorehazard as sh

sh.config.Setup(folder="runs", verbose=1)

records = sh.load_data.load_records("scored.csv")
episodes = sh.dataset.build_episodes(records)
table = sh.dataset.risk_table(episodes)

inclusion = sh.estimators.product_limit(table)
fit = sh.coxph.stepwise_select(episodes)
curves = sh.aalen.aalen_fit(episodes.select(fit.covariate_names))
```

Available modules:
----------------
- dataset: Records, episodes and risk tables
- load_data: Canonical and Backblaze readers
- save_data: CSV and JSON writers
- estimators: Product-limit and Nelson-Aalen estimators
- coxph: Proportional hazards fit, selection and baseline hazard
- aalen: Additive hazards fit
- synthgen: Synthetic data and grid-search oracle
- plotting: SVG figures
- cli: Command line (``scorehazard`` or ``python -m scorehazard``)
"""

__version__ = "0.1.0"

from . import (  # noqa: E402
    aalen,
    config,
    coxph,
    dataset,
    estimators,
    exceptions,
    load_data,
    plotting,
    save_data,
    synthgen,
)

# modules to import when user does 'from scorehazard import *':
__all__ = [
    "aalen",
    "config",
    "coxph",
    "dataset",
    "estimators",
    "exceptions",
    "load_data",
    "plotting",
    "save_data",
    "synthgen",
]
