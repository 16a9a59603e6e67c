"""Run a built-in baseline behind the wire protocol.

    python -m faultbench.agent_server heuristic
"""

from __future__ import annotations

import sys

from faultbench.baselines import BASELINES, make_baseline
from faultbench.external import serve


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 1 or args[0] not in BASELINES:
        print(f"usage: python -m faultbench.agent_server {{{','.join(BASELINES)}}}", file=sys.stderr)
        return 2
    serve(make_baseline(args[0]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
