import pathlib
import sys

# allow running the suite without installing the package
sys.path.insert(0, str(pathlib.Path(__file__).parent / "src"))
