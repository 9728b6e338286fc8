"""Pack the 10 000 MNIST digits shipped in the npm ``mnist`` package as gzipped IDX files.

Fetch the tarball with ``npm pack mnist`` (version 1.1.0, MIT licence) and
run::

    python3 scripts/make_mnist_subset.py mnist-1.1.0.tgz --out data

Pixels are stored there as value/255 rounded to three decimals, so rounding
back to bytes is exact. Rows are shuffled with a fixed seed so that
``--take-first`` gives a class-stratified-by-chance prefix.
"""
import argparse
import json
import os
import tarfile

import numpy as np

from ucsl.data import read_idx_images, write_idx


def load_digits(tarball):
    images, labels = [], []
    with tarfile.open(tarball) as tf:
        for digit in range(10):
            doc = json.load(tf.extractfile(f"package/src/digits/{digit}.json"))
            pix = np.asarray(doc["data"], dtype=float).reshape(-1, 28, 28)
            images.append(np.rint(pix * 255).astype(np.uint8))
            labels.append(np.full(len(pix), digit, dtype=np.uint8))
    return np.concatenate(images), np.concatenate(labels)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("tarball")
    ap.add_argument("--out", default="data")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    images, labels = load_digits(args.tarball)
    perm = np.random.default_rng(args.seed).permutation(len(labels))
    images, labels = images[perm], labels[perm]
    os.makedirs(args.out, exist_ok=True)
    ip = os.path.join(args.out, "mnist10k-images-idx3-ubyte.gz")
    lp = os.path.join(args.out, "mnist10k-labels-idx1-ubyte.gz")
    write_idx(images, labels, ip, lp)
    assert np.array_equal(read_idx_images(ip), images)
    print(f"wrote {len(labels)} digits to {ip}, {lp}; per-class counts {np.bincount(labels).tolist()}")


if __name__ == "__main__":
    main()
