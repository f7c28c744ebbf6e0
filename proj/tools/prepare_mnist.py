#!/usr/bin/env python3
"""Build IDX files from the 10,000 MNIST digits bundled in the npm `mnist` package.

The package stores each digit class as a JSON array of pixel intensities
rounded to three decimals. Intensities are mapped back to bytes with
round(v * 255), which recovers the original 0..255 values exactly.

    python3 tools/prepare_mnist.py --out data/mnist
    python3 tools/prepare_mnist.py --package-dir /path/to/unpacked/package --out data/mnist
"""
import argparse
import json
import pathlib
import struct
import subprocess
import sys
import tarfile
import tempfile


def fetch_package(workdir: pathlib.Path) -> pathlib.Path:
    subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=workdir, check=True,
                   stdout=subprocess.DEVNULL)
    tgz = next(workdir.glob("mnist-*.tgz"))
    with tarfile.open(tgz) as tar:
        tar.extractall(workdir)
    return workdir / "package"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--package-dir", type=pathlib.Path)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("data/mnist"))
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        pkg = args.package_dir or fetch_package(pathlib.Path(tmp))
        images = bytearray()
        labels = bytearray()
        for digit in range(10):
            data = json.loads((pkg / "src" / "digits" / f"{digit}.json").read_text())["data"]
            if len(data) % 784:
                print(f"digit {digit}: payload not a multiple of 784", file=sys.stderr)
                return 1
            images.extend(min(255, max(0, round(v * 255))) for v in data)
            labels.extend([digit] * (len(data) // 784))

    n = len(labels)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "mnist-images-idx3-ubyte").write_bytes(
        struct.pack(">IIII", 0x00000803, n, 28, 28) + bytes(images))
    (args.out / "mnist-labels-idx1-ubyte").write_bytes(
        struct.pack(">II", 0x00000801, n) + bytes(labels))
    print(f"wrote {n} digits to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
