#!/usr/bin/env python3
"""Convert the classic citation-network distribution into dgae's formats.

Expects the two-file layout used by the public Cora/CiteSeer archives:

  <name>.cites    one ``cited citing`` pair per line (paper ids)
  <name>.content  one ``id feat_1 ... feat_f class_name`` row per line

and writes edges.txt / features.txt / labels.txt understood by
``dgae train``. Class names are mapped to integer ids alphabetically and
the mapping is recorded in classes.json.

Usage: python scripts/convert_cora.py <input_dir>/<name> <output_dir>
e.g.   python scripts/convert_cora.py data/raw/cora data/cora
"""

from __future__ import annotations

import json
import sys
from pathlib import Path


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__)
        return 2
    stem = Path(sys.argv[1])
    out = Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)

    content_rows = []
    for line in (stem.parent / f"{stem.name}.content").read_text().splitlines():
        parts = line.split()
        if parts:
            content_rows.append((parts[0], parts[1:-1], parts[-1]))

    classes = sorted({label for _, _, label in content_rows})
    class_id = {name: i for i, name in enumerate(classes)}

    with open(out / "features.txt", "w") as fh:
        for node, feats, _ in content_rows:
            fh.write(f"{node} " + " ".join(feats) + "\n")
    with open(out / "labels.txt", "w") as fh:
        for node, _, label in content_rows:
            fh.write(f"{node} {class_id[label]}\n")

    known = {node for node, _, _ in content_rows}
    kept = dropped = 0
    with open(out / "edges.txt", "w") as fh:
        for line in (stem.parent / f"{stem.name}.cites").read_text().splitlines():
            parts = line.split()
            if len(parts) != 2:
                continue
            if parts[0] in known and parts[1] in known:
                fh.write(f"{parts[0]} {parts[1]}\n")
                kept += 1
            else:
                dropped += 1  # citations into papers without content rows

    (out / "classes.json").write_text(json.dumps(class_id, indent=2) + "\n")
    print(f"wrote {out}: {len(content_rows)} nodes, {kept} citation pairs "
          f"({dropped} dropped), {len(classes)} classes")
    return 0


if __name__ == "__main__":
    sys.exit(main())
