"""Tabular generators: adversarial random forest and Bayesian network.

Both model the full joint (outcomes included) of a complete table and
sample schema-conforming synthetic rows.

Run: python demos/05_synthetic_generators.py
"""

import numpy as np

from vcarm import complete_table, fit_generator, sample
from vcarm.cohort import Cohort, CohortSchema, ColumnSpec

rng = np.random.default_rng(7)
n = 600
cluster = rng.integers(0, 2, n)
age = np.where(cluster == 1, rng.normal(30, 4, n), rng.normal(14, 3, n))
crp = np.where(cluster == 1, rng.normal(2, 1, n), rng.normal(9, 3, n))
severe = ((crp > 6) & (rng.random(n) < 0.8)).astype(float)

schema = CohortSchema(columns=(
    ColumnSpec("age", "numeric"),
    ColumnSpec("crp", "numeric"),
    ColumnSpec("severe", "categorical", ("0", "1")),
))
values = np.column_stack([age, crp, severe])
table = complete_table(Cohort(schema, values, np.zeros(values.shape, bool)))

for kind in ("arf", "bn"):
    gen = fit_generator(kind, table, seed=8)
    synth = sample(gen, 1000, seed=9)
    print(f"{kind}: diagnostics {gen.diagnostics}")
    print(f"  real  means age={age.mean():6.2f} crp={crp.mean():5.2f} "
          f"severe={severe.mean():.2f}")
    s = synth.values
    print(f"  synth means age={s[:, 0].mean():6.2f} crp={s[:, 1].mean():5.2f} "
          f"severe={s[:, 2].mean():.2f}")
    corr_real = np.corrcoef(age, crp)[0, 1]
    corr_synth = np.corrcoef(s[:, 0], s[:, 1])[0, 1]
    print(f"  age-crp correlation: real {corr_real:+.2f}, synthetic {corr_synth:+.2f}\n")
