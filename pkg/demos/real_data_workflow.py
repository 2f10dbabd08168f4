"""The county-level evaluation workflow, end to end through the CLI.

The real ``cancer_reg`` file is not shipped; a synthetic stand-in with the
same layout (states nested in divisions nested in regions, socio-economic
covariates, three covariates with gaps) is generated instead. Point
``--data`` / ``--hierarchy`` at the real files to run the same steps on them.

Run with ``python demos/real_data_workflow.py [output directory]``.
"""
import csv
import sys
import tempfile
from pathlib import Path

from hiercat.cli import main as hiercat
from hiercat.geography import WITH_GAPS, write_synthetic_cancer_reg


def main(workdir: Path):
    data, hierarchy = write_synthetic_cancer_reg(workdir / "input", seed=0)
    print(f"input: {data} and {hierarchy}")

    code = hiercat([
        "evaluate",
        "--data", str(data), "--hierarchy", str(hierarchy),
        "--drop-cols", ",".join(WITH_GAPS),       # columns with missing values
        "--grid", "0.1,0.3,0.5,0.7",
        "--split", "0.8", "--stratum", "3",       # stratify the holdout by state
        "--out", str(workdir / "evaluate"),
    ])
    if code:
        sys.exit(code)

    comparison = workdir / "evaluate" / "outputs" / "comparison.csv"
    with open(comparison, newline="") as fh:
        rows = list(csv.DictReader(fh))
    best = min(rows, key=lambda r: float(r["aic"]))
    print(f"\nlowest AIC: {best['model']} with {best['n_groups']} state groups")
    groups = workdir / "evaluate" / "outputs" / f"groups_{best['model']}.csv"
    if groups.exists():
        print(f"its state -> group map is in {groups}")


if __name__ == "__main__":
    if len(sys.argv) > 1:
        main(Path(sys.argv[1]))
    else:
        with tempfile.TemporaryDirectory() as tmp:
            main(Path(tmp))
