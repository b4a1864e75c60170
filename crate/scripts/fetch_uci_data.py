#!/usr/bin/env python3
"""Fetch the six UCI datasets used by the benchmark harness and normalize
them into headered CSVs under data/, one schema JSON per dataset.

Needs network access to archive.ics.uci.edu. Usage:

    python3 scripts/fetch_uci_data.py [--out data] [--datasets german,heart,...]

Outputs per dataset:
    data/<name>.csv          header row + data, label column named "class"
    data/<name>.schema.json  column kind overrides for the CLI (--schema)

Normalization applied (kept deliberately minimal):
    german     space-separated -> CSV; 7 numeric attributes per the UCI
               documentation, the rest categorical; class 1=good, 2=bad.
    heart      processed Cleveland data; the 0-4 "num" field is binarized
               to absence/presence; '?' cells are kept as missing markers.
    satellite  train+test concatenated (6435 rows). The source has six
               classes; the label is binarized to class 1 vs rest so the
               class count matches the benchmark table. Best effort.
    adult      train+test concatenated, rows with missing fields dropped
               (45222 rows), trailing '.' stripped from test labels.
    shuttle    training partition (43500 rows); requires `gzip -d` for the
               .Z archive.
    kddcup99   the 10%-subset, de-duplicated. The benchmark's 24701-row
               variant is not reconstructible from published information;
               expect row counts to differ. Best effort.
"""

import argparse
import csv
import io
import json
import subprocess
import sys
import urllib.request
from pathlib import Path

BASE = "https://archive.ics.uci.edu/ml/machine-learning-databases"


def fetch(url: str) -> bytes:
    print(f"  fetching {url}")
    with urllib.request.urlopen(url, timeout=120) as resp:
        return resp.read()


def fetch_z(url: str) -> bytes:
    """Fetch a .Z (compress) archive and decompress through gzip."""
    raw = fetch(url)
    proc = subprocess.run(["gzip", "-d"], input=raw, stdout=subprocess.PIPE, check=True)
    return proc.stdout


def write_csv(path: Path, header: list, rows: list) -> None:
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)
    print(f"  wrote {path} ({len(rows)} rows)")


def write_schema(path: Path, kinds: dict) -> None:
    path.write_text(json.dumps(kinds, indent=2) + "\n")
    print(f"  wrote {path}")


def do_german(out: Path) -> None:
    text = fetch(f"{BASE}/statlog/german/german.data").decode()
    header = [f"a{i:02d}" for i in range(1, 21)] + ["class"]
    rows = [line.split() for line in text.splitlines() if line.strip()]
    write_csv(out / "german.csv", header, rows)
    numeric = {2, 5, 8, 11, 13, 16, 18}
    kinds = {f"a{i:02d}": ("numeric" if i in numeric else "categorical") for i in range(1, 21)}
    kinds["class"] = "label"
    write_schema(out / "german.schema.json", kinds)


def do_heart(out: Path) -> None:
    text = fetch(f"{BASE}/heart-disease/processed.cleveland.data").decode()
    header = [
        "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg",
        "thalach", "exang", "oldpeak", "slope", "ca", "thal", "class",
    ]
    rows = []
    for line in text.splitlines():
        if not line.strip():
            continue
        cells = [c.strip() for c in line.split(",")]
        cells[-1] = "presence" if cells[-1] not in ("0", "0.0") else "absence"
        rows.append(cells)
    write_csv(out / "heart.csv", header, rows)
    kinds = {name: "categorical" for name in header}
    for name in ("age", "trestbps", "chol", "thalach", "oldpeak", "ca"):
        kinds[name] = "numeric"
    kinds["class"] = "label"
    write_schema(out / "heart.schema.json", kinds)


def do_satellite(out: Path) -> None:
    text = fetch(f"{BASE}/statlog/satimage/sat.trn").decode()
    text += fetch(f"{BASE}/statlog/satimage/sat.tst").decode()
    header = [f"b{i:02d}" for i in range(1, 37)] + ["class"]
    rows = []
    for line in text.splitlines():
        if not line.strip():
            continue
        cells = line.split()
        cells[-1] = "c1" if cells[-1] == "1" else "rest"
        rows.append(cells)
    write_csv(out / "satellite.csv", header, rows)
    kinds = {f"b{i:02d}": "numeric" for i in range(1, 37)}
    kinds["class"] = "label"
    write_schema(out / "satellite.schema.json", kinds)


def do_adult(out: Path) -> None:
    header = [
        "age", "workclass", "fnlwgt", "education", "education_num",
        "marital_status", "occupation", "relationship", "race", "sex",
        "capital_gain", "capital_loss", "hours_per_week", "native_country",
        "class",
    ]
    rows = []
    for name in ("adult.data", "adult.test"):
        text = fetch(f"{BASE}/adult/{name}").decode()
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("|"):
                continue
            cells = [c.strip().rstrip(".") for c in line.split(",")]
            if len(cells) != len(header) or "?" in cells:
                continue
            rows.append(cells)
    write_csv(out / "adult.csv", header, rows)
    kinds = {name: "categorical" for name in header}
    for name in ("age", "fnlwgt", "education_num", "capital_gain",
                 "capital_loss", "hours_per_week"):
        kinds[name] = "numeric"
    kinds["class"] = "label"
    write_schema(out / "adult.schema.json", kinds)


def do_shuttle(out: Path) -> None:
    data = fetch_z(f"{BASE}/statlog/shuttle/shuttle.trn.Z")
    header = [f"f{i}" for i in range(1, 10)] + ["class"]
    rows = [line.split() for line in data.decode().splitlines() if line.strip()]
    write_csv(out / "shuttle.csv", header, rows)
    kinds = {f"f{i}": "numeric" for i in range(1, 10)}
    kinds["class"] = "label"
    write_schema(out / "shuttle.schema.json", kinds)


KDD_COLUMNS = [
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins",
    "logged_in", "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files", "num_outbound_cmds",
    "is_host_login", "is_guest_login", "count", "srv_count", "serror_rate",
    "srv_serror_rate", "rerror_rate", "srv_rerror_rate", "same_srv_rate",
    "diff_srv_rate", "srv_diff_host_rate", "dst_host_count", "dst_host_srv_count",
    "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate", "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
]


def do_kddcup99(out: Path) -> None:
    import gzip

    raw = fetch(f"{BASE}/kddcup99-mld/kddcup.data_10_percent.gz")
    text = gzip.decompress(raw).decode()
    header = KDD_COLUMNS + ["class"]
    seen = set()
    rows = []
    for line in text.splitlines():
        line = line.strip().rstrip(".")
        if not line or line in seen:
            continue
        seen.add(line)
        rows.append(line.split(","))
    write_csv(out / "kddcup99.csv", header, rows)
    kinds = {name: "numeric" for name in KDD_COLUMNS}
    for name in ("protocol_type", "service", "flag"):
        kinds[name] = "categorical"
    kinds["class"] = "label"
    write_schema(out / "kddcup99.schema.json", kinds)


FETCHERS = {
    "german": do_german,
    "heart": do_heart,
    "satellite": do_satellite,
    "adult": do_adult,
    "shuttle": do_shuttle,
    "kddcup99": do_kddcup99,
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", default="data", help="output directory (default: data)")
    parser.add_argument(
        "--datasets",
        default="all",
        help="comma-separated subset of: " + ",".join(FETCHERS) + " (default: all)",
    )
    args = parser.parse_args()

    names = list(FETCHERS) if args.datasets == "all" else args.datasets.split(",")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    failed = []
    for name in names:
        if name not in FETCHERS:
            print(f"unknown dataset '{name}'", file=sys.stderr)
            return 2
        print(f"[{name}]")
        try:
            FETCHERS[name](out)
        except Exception as exc:  # noqa: BLE001 - report and continue
            print(f"  FAILED: {exc}", file=sys.stderr)
            failed.append(name)
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
