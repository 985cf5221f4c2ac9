#!/usr/bin/env python3
"""Regenerate the bundled offline corpus under corpus/mini/."""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from preprank.dataset import serialize_arff  # noqa: E402
from preprank.synthetic import mini_corpus  # noqa: E402


def main() -> None:
    root = Path(__file__).resolve().parents[1] / "corpus"
    mini = root / "mini"
    mini.mkdir(parents=True, exist_ok=True)
    names = []
    for ds in mini_corpus():
        path = mini / f"{ds.name}.arff"
        path.write_text(serialize_arff(ds), encoding="utf-8")
        names.append(f"mini/{ds.name}.arff")
        print(f"wrote {path}")
    manifest = root / "mini.manifest"
    manifest.write_text(
        "# bundled offline corpus: paths resolve relative to this file\n"
        + "\n".join(names)
        + "\n",
        encoding="utf-8",
    )
    print(f"wrote {manifest}")


if __name__ == "__main__":
    main()
