#!/usr/bin/env python3
"""Trim the public COMPAS and Statlog German Credit files into the CSVs under data/.

Sources:
  COMPAS  https://github.com/propublica/compas-analysis/ (compas-scores-two-years.csv)
  Statlog https://archive.ics.uci.edu/ml/datasets/statlog+(german+credit+data) (german.data)

Usage: prepare_data.py <compas-scores-two-years.csv> <german.data> <out-dir>
"""
import csv
import sys
from pathlib import Path

COMPAS_COLUMNS = [
    "sex", "age", "age_cat", "race", "juv_fel_count", "juv_misd_count",
    "juv_other_count", "priors_count", "c_charge_degree", "two_year_recid",
]

GERMAN_COLUMNS = [
    "status", "duration", "credit_history", "purpose", "credit_amount", "savings",
    "employment", "installment_rate", "personal_status", "other_debtors",
    "residence_since", "property", "age", "other_installment_plans", "housing",
    "existing_credits", "job", "num_dependents", "telephone", "foreign_worker",
    "credit",
]


def compas(src: Path, dst: Path) -> None:
    with src.open(newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        # the source header repeats a few names; keep the first occurrence
        index = {}
        for i, name in enumerate(header):
            index.setdefault(name, i)
        rows = [[r[index[c]] for c in COMPAS_COLUMNS] for r in reader]
    with dst.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(COMPAS_COLUMNS)
        w.writerows(rows)
    print(f"{dst}: {len(rows)} rows")


def german(src: Path, dst: Path) -> None:
    rows = []
    for line in src.read_text().splitlines():
        fields = line.split()
        if not fields:
            continue
        record = dict(zip(GERMAN_COLUMNS, fields))
        record["sex"] = "female" if record["personal_status"] in ("A92", "A95") else "male"
        record["foreign_worker"] = "yes" if record["foreign_worker"] == "A201" else "no"
        record["credit"] = "good" if record["credit"] == "1" else "bad"
        rows.append(record)
    columns = GERMAN_COLUMNS[:-1] + ["sex", "credit"]
    with dst.open("w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    print(f"{dst}: {len(rows)} rows")


if __name__ == "__main__":
    if len(sys.argv) != 4:
        sys.exit(__doc__)
    out = Path(sys.argv[3])
    out.mkdir(parents=True, exist_ok=True)
    compas(Path(sys.argv[1]), out / "compas.csv")
    german(Path(sys.argv[2]), out / "statlog.csv")
