"""Engine selection: the compiled core when importable, else pure Python.

Set ``NETTREE_PURE_PYTHON=1`` to make the fallback the default even when
the extension is built.
"""

import os

from ._engine import Engine as PythonEngine

try:
    from ._cengine import Engine as CompiledEngine
except ImportError:  # extension not built
    CompiledEngine = None

_force_pure = os.environ.get("NETTREE_PURE_PYTHON", "").lower() in ("1", "true", "yes")

Engine = PythonEngine if (_force_pure or CompiledEngine is None) else CompiledEngine
BACKEND = "compiled" if Engine is CompiledEngine else "python"
