"""Regenerate every output (Fuller, synthesis, curves, direct study, checks) into one directory.

    python scripts/run_all.py [out_dir]
"""

import sys
import time

from chattering.cli import main

out = sys.argv[1] if len(sys.argv) > 1 else "out"
status = 0
for cmd in ("fuller", "synthesize", "curve", "direct", "verify"):
    t0 = time.perf_counter()
    code = main([cmd, "--out-dir", out])
    print(f"== {cmd}: exit {code} in {time.perf_counter() - t0:.1f} s", flush=True)
    status = status or code
sys.exit(status)
