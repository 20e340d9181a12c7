"""Builds the extension by delegating to cargo; no setuptools-rust needed.

The cdylib is abi3 (Python >= 3.10), so one build serves every
interpreter; install with `pip install -e . --no-build-isolation`.
"""

import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

CRATE_DIR = Path(__file__).resolve().parent

LIB_NAMES = {
    "linux": "libentaep_py.so",
    "darwin": "libentaep_py.dylib",
    "win32": "entaep_py.dll",
}


class CargoBuildExt(build_ext):
    def build_extension(self, ext):
        subprocess.run(
            ["cargo", "build", "--release", "-p", "entaep-py"],
            cwd=CRATE_DIR,
            check=True,
        )
        lib_name = next(v for k, v in LIB_NAMES.items() if sys.platform.startswith(k))
        built = CRATE_DIR.parent.parent / "target" / "release" / lib_name
        dest = Path(self.get_ext_fullpath(ext.name))
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(built, dest)


setup(
    ext_modules=[Extension("entaep_py", sources=[])],
    cmdclass={"build_ext": CargoBuildExt},
)
