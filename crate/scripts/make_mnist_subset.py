#!/usr/bin/env python3
"""Convert the 5000-sample MNIST excerpt bundled with mlxtend into IDX files.

Usage: make_mnist_subset.py <mlxtend wheel> <output dir>

Per class, the first 400 samples (in file order) go to the train files and the
next 100 to the t10k files. The t10k files are a held-out slice of this excerpt,
not the canonical MNIST test set. A SHA256SUMS manifest is written alongside.
"""
import gzip
import hashlib
import os
import struct
import sys
import zipfile


def main():
    wheel, out = sys.argv[1], sys.argv[2]
    raw = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")
    rows = [list(map(int, line.split(","))) for line in gzip.decompress(raw).decode().split()]
    seen = {}
    train, test = [], []
    for row in rows:
        label = row[-1]
        k = seen.get(label, 0)
        seen[label] = k + 1
        (train if k < 400 else test).append((bytes(row[:-1]), label))

    os.makedirs(out, exist_ok=True)
    names = []
    for prefix, part in (("train", train), ("t10k", test)):
        img = struct.pack(">IIII", 0x803, len(part), 28, 28) + b"".join(p for p, _ in part)
        lab = struct.pack(">II", 0x801, len(part)) + bytes(l for _, l in part)
        for suffix, payload in (("images-idx3-ubyte", img), ("labels-idx1-ubyte", lab)):
            name = f"{prefix}-{suffix}.gz"
            with open(os.path.join(out, name), "wb") as f:
                # mtime=0 keeps the archive bytes reproducible
                f.write(gzip.compress(payload, mtime=0))
            names.append(name)
    with open(os.path.join(out, "SHA256SUMS"), "w") as f:
        for name in names:
            digest = hashlib.sha256(open(os.path.join(out, name), "rb").read()).hexdigest()
            f.write(f"{digest}  {name}\n")


if __name__ == "__main__":
    main()
