#!/usr/bin/env python3
"""Export the small MNIST and Boston Housing subsets used by the test suites.

Both datasets ship inside the `mlxtend` package, so no network download is
needed beyond `pip install mlxtend`. Output files are written under data/.
"""
import argparse
import pathlib
import struct

import numpy as np
from mlxtend.data import boston_housing_data, mnist_data


def write_idx_images(path, images, rows, cols):
    images = np.asarray(images, dtype=np.uint8).reshape(len(images), rows * cols)
    with open(path, "wb") as f:
        f.write(struct.pack(">BBBBIII", 0, 0, 0x08, 0x03, len(images), rows, cols))
        f.write(images.tobytes())


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data"))
    parser.add_argument("--seed", type=int, default=20170912)
    parser.add_argument("--train", type=int, default=1000)
    parser.add_argument("--test", type=int, default=500)
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    (out / "mnist").mkdir(parents=True, exist_ok=True)
    (out / "boston").mkdir(parents=True, exist_ok=True)

    x, _ = mnist_data()
    order = np.random.RandomState(args.seed).permutation(len(x))
    x = np.rint(x[order]).astype(np.uint8)
    write_idx_images(out / "mnist" / "train-1k-images.idx3-ubyte", x[: args.train], 28, 28)
    write_idx_images(out / "mnist" / "test-500-images.idx3-ubyte",
                     x[args.train: args.train + args.test], 28, 28)

    features, target = boston_housing_data()
    names = ["CRIM", "ZN", "INDUS", "CHAS", "NOX", "RM", "AGE", "DIS", "RAD", "TAX",
             "PTRATIO", "B", "LSTAT", "MEDV"]
    table = np.column_stack([features, target])
    np.savetxt(out / "boston" / "housing.csv", table, delimiter=",", fmt="%.10g",
               header=",".join(names), comments="")


if __name__ == "__main__":
    main()
