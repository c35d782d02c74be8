"""CMake-driven build of the fgkf._core extension for setuptools installs."""
import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        subprocess.run(
            [
                "cmake",
                "-S", str(source),
                "-B", str(build_dir),
                "-DCMAKE_BUILD_TYPE=Release",
                "-DFGKF_BUILD_TESTS=OFF",
                f"-DPython3_EXECUTABLE={sys.executable}",
            ],
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "fgkf_python", "-j"],
            check=True,
        )

        built = sorted((build_dir / "python" / "fgkf").glob("_core*"))
        if not built:
            raise RuntimeError("cmake did not produce the _core extension module")
        target = Path(self.get_ext_fullpath(ext.name)).resolve()
        target.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built[0], target)


setup(
    packages=["fgkf"],
    package_dir={"fgkf": "python/fgkf"},
    ext_modules=[CMakeExtension("fgkf._core")],
    cmdclass={"build_ext": CMakeBuild},
)
