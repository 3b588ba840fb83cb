"""Download and convert the datasets used by the dataset-dependent acceptance test.

    python scripts/fetch_datasets.py [--data DIR] [--only blogs|as] [--expected NAME=SHA256 ...]

Produces, under ``DIR`` (default ``data/`` next to this script's parent):

* ``blogs.txt``: one ``u v`` line per hyperlink (directed, repeats kept, so
  loading with ``collapse="sum"`` gives the arc-count weights), plus
  ``blogs_labels.tsv`` with ``id``, ``label`` and political ``value`` columns.
* ``as-caida20071112.txt``: two-column undirected AS links; the third column
  of the source (a relationship code) is dropped.

No upstream checksums are published for these archives.  The first download
records each archive's sha256 in ``checksums.json`` and later downloads are
compared against it; ``--expected`` pins a digest explicitly.
"""
import argparse
import hashlib
import io
import json
import logging
import re
import sys
import tarfile
import urllib.request
import zipfile
from pathlib import Path

log = logging.getLogger("fetch_datasets")

SOURCES = {
    "blogs": "http://www-personal.umich.edu/~mejn/netdata/polblogs.zip",
    "as": "https://snap.stanford.edu/data/as-caida.tar.gz",
}


def download(url: str) -> bytes:
    log.info("downloading %s", url)
    with urllib.request.urlopen(url, timeout=120) as resp:
        return resp.read()


def verify(name: str, blob: bytes, store: Path, expected: dict) -> None:
    digest = hashlib.sha256(blob).hexdigest()
    known = json.loads(store.read_text()) if store.exists() else {}
    want = expected.get(name) or known.get(name)
    if want and want != digest:
        raise SystemExit(f"{name}: sha256 {digest} does not match recorded {want}")
    if not want:
        log.warning("%s: no recorded checksum, trusting and recording %s", name, digest)
    known[name] = digest
    store.write_text(json.dumps(known, indent=2, sort_keys=True) + "\n")


def convert_blogs(blob: bytes, out: Path) -> None:
    import networkx as nx

    with zipfile.ZipFile(io.BytesIO(blob)) as z:
        text = z.read("polblogs.gml").decode("utf-8", errors="replace")
    # the file repeats arcs without declaring itself a multigraph
    if not re.search(r"^\s*multigraph\s+1", text, re.M):
        text = re.sub(r"graph\s*\[", "graph [\n  multigraph 1", text, count=1)
    G = nx.parse_gml(text, label="id")
    with open(out / "blogs.txt", "w") as fh:
        fh.write("# political blogs hyperlinks, one line per directed arc\n")
        for u, v in G.edges():
            fh.write(f"{u} {v}\n")
    with open(out / "blogs_labels.tsv", "w") as fh:
        fh.write("id\tlabel\tvalue\n")
        for node, attrs in G.nodes(data=True):
            fh.write(f"{node}\t{attrs.get('label', '')}\t{attrs.get('value', '')}\n")
    log.info("blogs: %d vertices, %d arcs", G.number_of_nodes(), G.number_of_edges())


def convert_as(blob: bytes, out: Path) -> None:
    with tarfile.open(fileobj=io.BytesIO(blob), mode="r:gz") as tar:
        member = next(m for m in tar.getmembers() if m.name.endswith("as-caida20071112.txt"))
        raw = tar.extractfile(member).read().decode()
    count = 0
    with open(out / "as-caida20071112.txt", "w") as fh:
        fh.write("# CAIDA AS relationships 2007-11-12, relationship column dropped\n")
        for line in raw.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            u, v = line.split()[:2]
            fh.write(f"{u} {v}\n")
            count += 1
    log.info("as: %d links", count)


CONVERTERS = {"blogs": convert_blogs, "as": convert_as}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", type=Path, default=Path(__file__).resolve().parents[1] / "data")
    ap.add_argument("--only", choices=sorted(SOURCES), action="append")
    ap.add_argument("--expected", action="append", default=[], metavar="NAME=SHA256")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    expected = dict(item.split("=", 1) for item in args.expected)
    args.data.mkdir(parents=True, exist_ok=True)
    for name in args.only or sorted(SOURCES):
        blob = download(SOURCES[name])
        verify(name, blob, args.data / "checksums.json", expected)
        CONVERTERS[name](blob, args.data)
    return 0


if __name__ == "__main__":
    sys.exit(main())
