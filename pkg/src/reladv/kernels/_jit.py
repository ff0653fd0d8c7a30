"""Compiled twin of :mod:`._loops`.

The loop source is re-executed in this module's namespace and every
function is wrapped with ``numba.njit``, so the compiled helpers resolve
each other here while ``_loops`` itself stays plain Python.
"""
import inspect
from types import FunctionType

import numba

from . import _loops

exec(compile(inspect.getsource(_loops), _loops.__file__, "exec"), globals())

for _name, _obj in list(globals().items()):
    if isinstance(_obj, FunctionType) and _obj.__module__ == __name__:
        globals()[_name] = numba.njit(cache=True)(_obj)
