"""Regenerate the CSV fixtures under tests/fixtures/.

breast_cancer.csv
    The Wisconsin diagnostic data bundled with scikit-learn, rewritten as a
    headed CSV with a ``diagnosis`` column (M = malignant = positive).

cervical_synthetic.csv
    A synthetic stand-in shaped like the cervical-cancer risk-factor table:
    808 rows, 36 feature columns, a ``Schiller`` target. Two columns are
    mostly missing, 100 rows lack the target and 40 rows have no features,
    so ingestion plus drop/impute leaves 668 rows x 34 features. Values are
    random; only the shape and missingness pattern are meant to be realistic.
"""

import csv
import os

import numpy as np
from sklearn.datasets import load_breast_cancer

HERE = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")

CERVICAL_COLUMNS = [
    "Age", "Number of sexual partners", "First sexual intercourse", "Num of pregnancies",
    "Smokes", "Smokes (years)", "Smokes (packs/year)", "Hormonal Contraceptives",
    "Hormonal Contraceptives (years)", "IUD", "IUD (years)", "STDs", "STDs (number)",
    "STDs:condylomatosis", "STDs:cervical condylomatosis", "STDs:vaginal condylomatosis",
    "STDs:vulvo-perineal condylomatosis", "STDs:syphilis",
    "STDs:pelvic inflammatory disease", "STDs:genital herpes", "STDs:molluscum contagiosum",
    "STDs:AIDS", "STDs:HIV", "STDs:Hepatitis B", "STDs:HPV", "STDs: Number of diagnosis",
    "STDs: Time since first diagnosis", "STDs: Time since last diagnosis", "Dx:Cancer",
    "Dx:CIN", "Dx:HPV", "Dx", "aux_1", "aux_2", "aux_3", "aux_4",
]
SPARSE = {"STDs: Time since first diagnosis", "STDs: Time since last diagnosis"}
COUNT_LIKE = {"Age", "Number of sexual partners", "First sexual intercourse",
              "Num of pregnancies", "Smokes (years)", "Smokes (packs/year)",
              "Hormonal Contraceptives (years)", "IUD (years)", "STDs (number)",
              "STDs: Number of diagnosis", "aux_1", "aux_2", "aux_3", "aux_4"} | SPARSE


def breast():
    d = load_breast_cancer()
    path = os.path.join(HERE, "breast_cancer.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*d.feature_names, "diagnosis"])
        for row, t in zip(d.data, d.target):
            w.writerow([*(f"{v:.6g}" for v in row), "M" if t == 0 else "B"])


def cervical(seed=20240611):
    rng = np.random.default_rng(seed)
    n = 808
    latent = rng.standard_normal(n)
    cols = {}
    for name in CERVICAL_COLUMNS:
        if name in COUNT_LIKE:
            base = np.abs(rng.normal(3 + 2 * (name == "Age") * 10, 2.0, n))
            cols[name] = np.round(base + 0.8 * np.maximum(latent, 0) * ("STD" in name or "aux" in name), 1)
        else:
            p = 1 / (1 + np.exp(-(-2.2 + 0.9 * latent + rng.normal(0, 0.5, n))))
            cols[name] = (rng.random(n) < p).astype(float)
    target = (rng.random(n) < 1 / (1 + np.exp(-(-2.8 + 1.4 * latent)))).astype(int)
    missing = {name: rng.random(n) < (0.9 if name in SPARSE else 0.08 * (i % 3 == 0))
               for i, name in enumerate(CERVICAL_COLUMNS)}
    no_target = rng.choice(n, 100, replace=False)
    rest = np.setdiff1d(np.arange(n), no_target)
    empty = rng.choice(rest, 40, replace=False)
    path = os.path.join(HERE, "cervical_synthetic.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*CERVICAL_COLUMNS, "Schiller"])
        for i in range(n):
            row = []
            for name in CERVICAL_COLUMNS:
                if i in empty or missing[name][i]:
                    row.append("?")
                else:
                    v = cols[name][i]
                    row.append(str(int(v)) if v == int(v) else f"{v:g}")
            row.append("?" if i in no_target else str(target[i]))
            w.writerow(row)


if __name__ == "__main__":
    os.makedirs(HERE, exist_ok=True)
    breast()
    cervical()
