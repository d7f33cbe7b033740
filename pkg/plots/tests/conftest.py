import sys
from pathlib import Path

# Allow running these tests straight from the repository without installing
# the plots package.
_SRC = Path(__file__).resolve().parent.parent / "src"
if str(_SRC) not in sys.path:
    sys.path.insert(0, str(_SRC))
