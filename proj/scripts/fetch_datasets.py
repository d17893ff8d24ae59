#!/usr/bin/env python3
"""Materialize the benchmark CSVs used by the experiment runner into data/.

Sources, tried in order per dataset:
  boston        pydataset (MASS::Boston) wheel from PyPI
  bike_sharing  ISLP wheel (Bikeshare.csv, hourly counts for 2011), one-hot encoded
  wine_red      UCI archive URL (Wine Quality, red variant)

Every output is a plain numeric CSV with a header row; the target column is
named in data/manifest.json. Run from the repository root:

    python3 scripts/fetch_datasets.py [--out data]
"""

import argparse
import io
import json
import pathlib
import subprocess
import sys
import tarfile
import tempfile
import urllib.request
import zipfile

import pandas as pd

UCI_WINE_RED = (
    "https://archive.ics.uci.edu/ml/machine-learning-databases/"
    "wine-quality/winequality-red.csv"
)


def pip_download(package: str, dest: pathlib.Path) -> pathlib.Path:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q", package, "-d", str(dest)],
        check=True,
    )
    matches = sorted(p for p in dest.iterdir() if p.name.lower().startswith(package.lower()))
    if not matches:
        raise RuntimeError(f"pip download produced no artifact for {package}")
    return matches[-1]


def fetch_boston(tmp: pathlib.Path) -> pd.DataFrame:
    sdist = pip_download("pydataset", tmp)
    with tarfile.open(sdist) as outer:
        member = next(m for m in outer.getmembers() if m.name.endswith("resources.tar.gz"))
        inner_bytes = outer.extractfile(member).read()
    with tarfile.open(fileobj=io.BytesIO(inner_bytes)) as inner:
        csv = inner.extractfile("resources/rdata/csv/MASS/Boston.csv").read()
    frame = pd.read_csv(io.BytesIO(csv), index_col=0)
    return frame


def fetch_bike(tmp: pathlib.Path) -> pd.DataFrame:
    wheel = pip_download("ISLP", tmp)
    with zipfile.ZipFile(wheel) as z:
        frame = pd.read_csv(io.BytesIO(z.read("ISLP/data/Bikeshare.csv")))
    # casual + registered == bikers; both leak the target.
    frame = frame.drop(columns=["casual", "registered", "day"])
    frame = pd.get_dummies(
        frame, columns=["season", "mnth", "hr", "weekday", "weathersit"], dtype=float
    )
    target = frame.pop("bikers").astype(float)
    frame["count"] = target
    frame.columns = [str(c).replace("/", "_").replace(" ", "_") for c in frame.columns]
    return frame


def fetch_wine_red() -> pd.DataFrame:
    with urllib.request.urlopen(UCI_WINE_RED, timeout=30) as response:
        raw = response.read()
    frame = pd.read_csv(io.BytesIO(raw), sep=";")
    frame.columns = [c.replace(" ", "_") for c in frame.columns]
    return frame


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="data")
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    manifest_path = out / "manifest.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}

    jobs = {
        "boston": (fetch_boston, "medv", "uci"),
        "bike_sharing": (fetch_bike, "count", "bike"),
        "wine_red": (lambda _tmp: fetch_wine_red(), "quality", "uci"),
    }
    failures = 0
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = pathlib.Path(tmpdir)
        for name, (fetch, target, preset) in jobs.items():
            try:
                frame = fetch(tmp)
            except Exception as exc:  # noqa: BLE001
                print(f"[skip] {name}: {exc}", file=sys.stderr)
                failures += 1
                continue
            path = out / f"{name}.csv"
            frame.to_csv(path, index=False, float_format="%.17g")
            manifest[name] = {"file": path.name, "target": target, "split_preset": preset}
            print(f"[ok] {name}: {len(frame)} rows, {frame.shape[1] - 1} features -> {path}")

    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0 if failures == 0 else 2


if __name__ == "__main__":
    sys.exit(main())
