"""Full run on the seeded three-terrain obstacle course, equivalent to ``rpc run``.

Usage: python3 demos/obstacle_course.py [output_dir]
"""

import sys
from pathlib import Path

from reachpc.cli import main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "obstacle_course.yaml"

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "runs/obstacle_course"
    sys.exit(main(["-v", "run", str(CONFIG), "--output-dir", out]))
