import os
import sys
from pathlib import Path

# Prefer a build-tree module when BFSIM_PYTHONPATH is set (ctest does this).
_extra = os.environ.get("BFSIM_PYTHONPATH")
if _extra:
    sys.path.insert(0, _extra)
elif (Path(__file__).resolve().parents[2] / "build" / "python").is_dir():
    sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "build" / "python"))
