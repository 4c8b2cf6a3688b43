"""Regenerates stats_reference.json with scipy, statsmodels and scikit-posthocs."""
import json

import numpy as np
import pandas as pd
import scikit_posthocs as sp
import statsmodels.formula.api as smf
from scipy import stats
from statsmodels.stats.anova import anova_lm

rng = np.random.default_rng(20240611)
names = ["CF:Unrevised", "MT:Unrevised", "MT+CF:Unrevised", "MT+CF:Revised"]

cont = [np.round(rng.normal(loc, sd, n), 3).tolist()
        for loc, sd, n in [(0.55, 0.02, 12), (0.57, 0.03, 15), (0.56, 0.02, 9), (0.60, 0.025, 14)]]
likert = [rng.integers(lo, 6, n).tolist() for lo, n in [(1, 30), (2, 25), (1, 28), (3, 31)]]

tukey = stats.tukey_hsd(*cont)
tukey_rows = []
for i in range(4):
    for j in range(i + 1, 4):
        tukey_rows.append({"group1": names[i], "group2": names[j],
                           "estimate": float(np.mean(cont[j]) - np.mean(cont[i])),
                           "p_value": float(tukey.pvalue[i, j])})

flat = [v for g in likert for v in g]
labels = [names[i] for i, g in enumerate(likert) for _ in g]
df = pd.DataFrame({"v": flat, "g": labels})
dunn_holm = sp.posthoc_dunn(df, val_col="v", group_col="g", p_adjust="holm")
dunn_raw = sp.posthoc_dunn(df, val_col="v", group_col="g")
dunn_rows = [{"group1": names[i], "group2": names[j],
              "p_value": float(dunn_raw.loc[names[i], names[j]]),
              "p_adjusted": float(dunn_holm.loc[names[i], names[j]])}
             for i in range(4) for j in range(i + 1, 4)]
kw = stats.kruskal(*likert)

shapiro = [dict(zip(["w", "p_value"], map(float, stats.shapiro(g)))) for g in cont]
lev = stats.levene(*cont, center="median")

# Two-way layout: 3 variants x 2 sizes, unbalanced.
two = []
for a, shift in [("CF", 0.0), ("MT", 0.01), ("MTCF", 0.02)]:
    for b, sshift, n in [("small", 0.0, 5), ("large", 0.05, 7)]:
        for v in rng.normal(0.5 + shift + sshift, 0.02, n if a != "MT" else n + 1):
            two.append({"a": a, "b": b, "value": round(float(v), 4)})
tw = pd.DataFrame(two)
aov = anova_lm(smf.ols("value ~ C(a) * C(b)", data=tw).fit(), typ=2)
anova_rows = {
    "a": {"sum_sq": aov.loc["C(a)", "sum_sq"], "df": aov.loc["C(a)", "df"], "F": aov.loc["C(a)", "F"], "p_value": aov.loc["C(a)", "PR(>F)"]},
    "b": {"sum_sq": aov.loc["C(b)", "sum_sq"], "df": aov.loc["C(b)", "df"], "F": aov.loc["C(b)", "F"], "p_value": aov.loc["C(b)", "PR(>F)"]},
    "a:b": {"sum_sq": aov.loc["C(a):C(b)", "sum_sq"], "df": aov.loc["C(a):C(b)", "df"], "F": aov.loc["C(a):C(b)", "F"], "p_value": aov.loc["C(a):C(b)", "PR(>F)"]},
    "Residual": {"sum_sq": aov.loc["Residual", "sum_sq"], "df": aov.loc["Residual", "df"]},
}
anova_rows = {k: {kk: float(vv) for kk, vv in v.items()} for k, v in anova_rows.items()}

# Regression: quality on variant dummies and length.
reg = []
effects = {"CF:Unrevised": 0.0, "MT:Unrevised": 0.138, "MT+CF:Unrevised": 0.109, "MT+CF:Revised": 0.284}
for name, eff in effects.items():
    for _ in range(40):
        length = int(rng.integers(10, 80))
        reg.append({"variant": name, "length": length,
                    "quality": round(float(4.037 + eff + 0.001 * length + rng.normal(0, 0.5)), 4)})
rd = pd.DataFrame(reg)
fit = smf.ols("quality ~ C(variant, Treatment('CF:Unrevised')) + length", data=rd).fit()
coef_names = {"Intercept": "(Intercept)", "length": "explanation_length"}
for name in effects:
    coef_names[f"C(variant, Treatment('CF:Unrevised'))[T.{name}]"] = f"variant={name}"
ols_rows = {coef_names[k]: {"estimate": float(fit.params[k]), "std_error": float(fit.bse[k]), "p_value": float(fit.pvalues[k])}
            for k in fit.params.index}

out = {
    "names": names,
    "continuous": cont,
    "likert": likert,
    "tukey": tukey_rows,
    "dunn": dunn_rows,
    "kruskal": {"h": float(kw.statistic), "p_value": float(kw.pvalue)},
    "shapiro": shapiro,
    "levene": {"f": float(lev.statistic), "p_value": float(lev.pvalue)},
    "two_way": {"data": two, "rows": anova_rows},
    "regression": {"data": reg, "coefficients": ols_rows},
}
with open("stats_reference.json", "w") as f:
    json.dump(out, f, indent=1)
