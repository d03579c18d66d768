#!/usr/bin/env python3
"""Fetch the tagged English samples shipped in the pattern3 sdist and write
two-column train/test splits under data/.

    python3 scripts/fetch_corpus.py [--tarball pattern3-3.0.0.tar.gz] [--out data]
"""
import argparse
import subprocess
import sys
import tarfile
import tempfile
from pathlib import Path

SDIST = "pattern3==3.0.0"
MEMBERS = {
    "oanc": "pattern3-3.0.0/test/corpora/tagged-en-oanc.txt",
    "wsj": "pattern3-3.0.0/test/corpora/tagged-en-wsj.txt",
}
SPLIT_TOKENS = 20_000


def download(dest: Path) -> Path:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "--no-binary", ":all:",
         "--timeout", "300", "--retries", "10", SDIST, "-d", str(dest)],
        check=True,
    )
    return next(dest.glob("pattern3-*.tar.gz"))


def parse(text: str):
    for line in text.splitlines():
        pairs = []
        for item in line.split():
            word, sep, tag = item.rpartition("/")
            if not sep or not word or not tag:
                raise ValueError(f"bad token {item!r}")
            pairs.append((word, tag))
        if pairs:
            yield pairs


def write(path: Path, sentences):
    with path.open("w", encoding="utf-8") as f:
        for s in sentences:
            for w, t in s:
                f.write(f"{w}\t{t}\n")
            f.write("\n")
    print(f"{path}: {len(sentences)} sentences, {sum(map(len, sentences))} tokens")


def take(sentences, start, tokens):
    out, n, i = [], 0, start
    while i < len(sentences) and n < tokens:
        out.append(sentences[i])
        n += len(sentences[i])
        i += 1
    return out, i


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tarball", type=Path)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        tarball = args.tarball or download(Path(tmp))
        with tarfile.open(tarball) as tar:
            texts = {k: tar.extractfile(m).read().decode("utf-8") for k, m in MEMBERS.items()}

    oanc = list(parse(texts["oanc"]))
    train, end = take(oanc, 0, SPLIT_TOKENS)
    test, _ = take(oanc, end, SPLIT_TOKENS)
    write(args.out / "oanc-train.tsv", train)
    write(args.out / "oanc-test.tsv", test)

    wsj = list(parse(texts["wsj"]))
    cut = len(wsj) * 4 // 5
    write(args.out / "wsj-train.tsv", wsj[:cut])
    write(args.out / "wsj-test.tsv", wsj[cut:])


if __name__ == "__main__":
    main()
