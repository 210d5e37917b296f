"""Convert the source tables into LIBSVM text files.

usage: prepare_datasets.py IONOSPHERE_TAB PIMA_DAT AUSTRALIAN_DAT AUSTRALIAN_SCALE_ARFF_GZ OUTDIR

Writes raw and [-1, 1]-scaled variants of each dataset.  See README.md.
"""
import gzip
import sys
from collections import Counter, defaultdict
from pathlib import Path

AUS_RANGES = {2: (13.75, 80.25), 3: (0.0, 28.0), 7: (0.0, 28.5)}


def read_ionosphere(path):
    lines = Path(path).read_text().splitlines()[3:]
    rows = []
    for line in lines:
        if not line.strip():
            continue
        parts = line.split("\t")
        rows.append((1 if parts[-1] == "g" else -1, [float(v) for v in parts[:-1]]))
    return rows


def read_keel(path):
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("@"):
            continue
        parts = [p.strip() for p in line.split(",")]
        rows.append((parts[:-1], parts[-1]))
    return rows


def read_pima(path):
    return [
        (1 if label == "tested_positive" else -1, [float(v) for v in feats])
        for feats, label in read_keel(path)
    ]


def read_sparse_arff(path):
    rows = []
    with gzip.open(path, "rt") as fh:
        for line in fh:
            if line.startswith("{"):
                pairs = (p.strip().split() for p in line.strip()[1:-1].split(","))
                rows.append({int(a): float(b) for a, b in pairs})
    return rows


def digit_key(feature, k):
    return feature, len(str(k)), k % 10 == 5


def candidates(feature, k):
    lo, hi = AUS_RANGES[feature]
    return [d for d in range(4) if lo <= k / 10**d <= hi]


def read_australian(path, exact_scaled):
    """The decimal points of A2, A3 and A7 are missing in the source table.

    A2 is recovered from its range alone.  For A3 and A7 the decimal shift
    is learned from the leading rows whose scaled values are known exactly,
    keyed by digit count and last digit; those rows use the exact values.
    """
    raw = read_keel(path)
    votes = defaultdict(Counter)
    for (feats, _), scaled in zip(raw, exact_scaled):
        for f in (3, 7):
            lo, hi = AUS_RANGES[f]
            v = lo + (scaled.get(f, 0.0) + 1.0) / 2.0 * (hi - lo)
            k = int(float(feats[f - 1]))
            for d in candidates(f, k):
                if abs(k / 10**d - v) < 1e-3:
                    votes[digit_key(f, k)][d] += 1
    rows, hits, known = [], 0, 0
    for i, (feats, label) in enumerate(raw):
        x = [float(v) for v in feats]
        for f in (2, 3, 7):
            k = int(x[f - 1])
            cands = candidates(f, k)
            if f == 2:
                d = cands[0]
            else:
                tally = votes.get(digit_key(f, k))
                d = max(cands, key=lambda c: (tally[c] if tally else 0, -abs(c - 2)))
            x[f - 1] = k / 10**d
        if i < len(exact_scaled):
            known += 1
            recovered = list(x)
            for f in (2, 3, 7):
                lo, hi = AUS_RANGES[f]
                x[f - 1] = lo + (exact_scaled[i].get(f, 0.0) + 1.0) / 2.0 * (hi - lo)
            hits += all(abs(a - b) < 1e-3 for a, b in zip(recovered, x))
        rows.append((1 if label == "1" else -1, x))
    print(f"australian: decimal rule reproduces {hits}/{known} exactly known rows", file=sys.stderr)
    return rows


def scale(rows, ranges=None):
    """Columnwise affine map onto [-1, 1]; constant columns are dropped.

    `ranges` overrides the observed (min, max) of selected 1-based columns.
    """
    n = len(rows[0][1])
    lo = [min(r[1][j] for r in rows) for j in range(n)]
    hi = [max(r[1][j] for r in rows) for j in range(n)]
    for f, (a, b) in (ranges or {}).items():
        lo[f - 1], hi[f - 1] = a, b
    keep = [j for j in range(n) if hi[j] > lo[j]]
    out = []
    for y, x in rows:
        out.append((y, [-1.0 + 2.0 * (x[j] - lo[j]) / (hi[j] - lo[j]) for j in keep]))
    return out


def write_libsvm(rows, path):
    with open(path, "w") as fh:
        for y, x in rows:
            feats = " ".join(f"{j + 1}:{v:.10g}" for j, v in enumerate(x) if v != 0.0)
            fh.write(f"{y:+d} {feats}\n".replace(" \n", "\n"))


def main():
    iono, pima, aus, aus_scale, out = sys.argv[1:6]
    out = Path(out)
    sets = {
        "ionosphere": read_ionosphere(iono),
        "diabetes": read_pima(pima),
        "australian": read_australian(aus, read_sparse_arff(aus_scale)),
    }
    for name, rows in sets.items():
        write_libsvm(rows, out / f"{name}.libsvm")
        ranges = AUS_RANGES if name == "australian" else None
        write_libsvm(scale(rows, ranges), out / f"{name}_scale.libsvm")
        print(f"{name}: {len(rows)} samples, {len(rows[0][1])} features", file=sys.stderr)


if __name__ == "__main__":
    main()
