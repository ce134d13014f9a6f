"""Rebuild tests/data/diabetes.csv from the KEEL copy of the Pima data.

The KEEL file ships inside the ``imbalanced-databases`` wheel on PyPI:

    pip download --no-deps imbalanced-databases -d /tmp/idb
    python scripts/make_pima_csv.py /tmp/idb/imbalanced_databases-*.whl tests/data/diabetes.csv
"""

import sys
import zipfile

HEADER = "Pregnancies,Glucose,BloodPressure,SkinThickness,Insulin,BMI,DiabetesPedigreeFunction,Age,Outcome"


def main(wheel, out):
    text = zipfile.ZipFile(wheel).read("imbalanced_databases/data/pima/pima.dat").decode()
    lines = text.splitlines()
    rows = [l.split(",") for l in lines[lines.index("@data") + 1:] if l.strip()]
    with open(out, "w") as fh:
        fh.write(HEADER + "\n")
        for r in rows:
            fh.write(",".join(r[:8] + ["1" if r[8].strip() == "positive" else "0"]) + "\n")
    print(f"wrote {len(rows)} rows to {out}")


if __name__ == "__main__":
    main(*sys.argv[1:3])
