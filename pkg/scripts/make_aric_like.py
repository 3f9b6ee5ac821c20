"""Regenerate the synthetic ARIC-like case-cohort fixture shipped with the package.

Everything here is invented: a full cohort of about 12,000 middle-aged adults
with ten CHD prognosticators, a continuous inflammation marker (mg/L), and
follow-up in days. A stratified case-cohort sample (strata: sex, race, age
over 55) is drawn and only sampled rows are written.

    python3 scripts/make_aric_like.py [out.csv]
"""
import sys
from pathlib import Path

import numpy as np

N = 12197
FOLLOW_UP = 4015.0  # about 11 years
SUBCOHORT_SIZE = 930
SEED = 19870101


def simulate(rng):
    sex = rng.integers(0, 2, N)  # 1 = male
    race = (rng.random(N) < 0.25).astype(int)  # 1 = black
    age = rng.uniform(45, 65, N)
    bmi = np.clip(rng.normal(27.5 + 1.2 * race - 0.5 * sex, 5.0), 16, 60)
    smoker = (rng.random(N) < 0.22 + 0.05 * sex).astype(int)
    diabetes = (rng.random(N) < 1 / (1 + np.exp(-(-3.4 + 0.09 * (bmi - 27) * 1.5 + 0.5 * race + 0.03 * (age - 55))))).astype(int)
    ldl = rng.normal(138, 38, N)
    hdl = np.clip(rng.normal(50 - 8 * sex - 0.6 * (bmi - 27), 15), 15, 120)
    trig = np.clip(rng.lognormal(np.log(120) + 0.015 * (bmi - 27), 0.45), 30, 600)
    sbp = rng.normal(121 + 0.5 * (age - 55) + 0.6 * (bmi - 27) + 6 * race, 18)
    dbp = 0.35 * sbp + rng.normal(30, 9, N)
    hypertension = ((sbp > 140) | (rng.random(N) < 0.25 + 0.1 * race)).astype(int)
    log_crp = (0.8 + 0.08 * (bmi - 27) + 0.35 * smoker + 0.4 * diabetes - 0.3 * sex
               + 0.2 * race + 0.004 * (sbp - 125) + rng.normal(0, 0.9, N))
    crp = np.exp(log_crp)
    lin = (0.065 * (age - 55) + 0.7 * sex + 0.2 * race + 0.55 * smoker + 0.6 * diabetes
           + 0.006 * (ldl - 138) - 0.015 * (hdl - 48) + 0.012 * (sbp - 125)
           + 0.25 * hypertension + 0.25 * (crp > 3))
    t_event = rng.exponential(1.0 / (4.8e-6 * np.exp(lin)))
    t_cens = np.minimum(FOLLOW_UP, rng.exponential(60000.0, N))
    time = np.round(np.minimum(t_event, t_cens))
    event = (t_event <= t_cens).astype(int)
    return dict(age=age, smoker=smoker, diabetes=diabetes, bmi=bmi, ldl=ldl, hdl=hdl,
                trig=trig, sbp=sbp, dbp=dbp, hypertension=hypertension, sex=sex, race=race,
                crp=crp, time=np.maximum(time, 1.0), event=event)


def sample(cohort, rng):
    stratum = 1 + cohort["sex"] + 2 * cohort["race"] + 4 * (cohort["age"] > 55)
    sizes = np.bincount(stratum, minlength=9)[1:]
    cases = np.bincount(stratum, weights=cohort["event"], minlength=9)[1:]
    # subcohort allocated in proportion to stratum cases, capped at 1
    alpha = np.minimum(1.0, SUBCOHORT_SIZE * (cases + 1) / (cases + 1).sum() / sizes)
    alpha_i = alpha[stratum - 1]
    xi = (rng.random(N) < alpha_i).astype(int)
    ev = cohort["event"]
    rho = ev + (1 - ev) * xi / alpha_i
    return stratum, xi, alpha_i, rho


def main(out):
    rng = np.random.default_rng(SEED)
    cohort = simulate(rng)
    stratum, xi, alpha_i, rho = sample(cohort, rng)
    keep = np.flatnonzero(rho > 0)
    cols = ["age", "smoker", "diabetes", "bmi", "ldl", "hdl", "trig", "sbp", "dbp",
            "hypertension", "sex", "race", "crp"]
    rounding = {"age": 0, "bmi": 2, "ldl": 1, "hdl": 1, "trig": 1, "sbp": 1, "dbp": 1, "crp": 2}
    lines = ["id," + ",".join(cols) + ",time,event,stratum,xi,alpha,rho"]
    for i in keep:
        vals = []
        for c in cols:
            v = cohort[c][i]
            vals.append(f"{v:.{rounding[c]}f}" if c in rounding else str(int(v)))
        vals += [str(int(cohort["time"][i])), str(int(cohort["event"][i])), str(int(stratum[i])),
                 str(int(xi[i])), repr(float(alpha_i[i])), repr(float(rho[i]))]
        lines.append(f"{i + 1}," + ",".join(vals))
    Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    n1 = int(np.sum(cohort["crp"][keep] > 3))
    print(f"wrote {len(keep)} rows ({int(cohort['event'].sum())} cases, {n1} with marker > 3) to {out}")


if __name__ == "__main__":
    default = Path(__file__).resolve().parents[1] / "src" / "ccrmst" / "data" / "aric_like.csv"
    main(sys.argv[1] if len(sys.argv) > 1 else default)
