"""
Portable text parameter files.

One line per tensor: ``name rows cols v0 v1 ...`` with 17 significant
digits, which round-trips float64 exactly. Lines starting with ``#`` carry
``key = value`` metadata.
"""

from pathlib import Path
from typing import Dict, Mapping, Tuple, Union

import numpy as np

PathLike = Union[str, Path]


def save_parameters(path: PathLike, tensors: Mapping[str, np.ndarray],
                    meta: Mapping[str, str] = None) -> None:
    lines = ['# {} = {}'.format(key, value) for key, value in (meta or {}).items()]
    for name, tensor in tensors.items():
        if any(ch.isspace() for ch in name):
            raise ValueError("Tensor name {!r} contains whitespace".format(name))
        matrix = np.asarray(tensor, dtype=np.float64)
        matrix = matrix.reshape(matrix.shape[0], -1) if matrix.ndim else matrix.reshape(1, 1)
        values = ' '.join('{:.17g}'.format(x) for x in matrix.ravel())
        lines.append('{} {} {} {}'.format(name, matrix.shape[0], matrix.shape[1], values))
    Path(path).write_text('\n'.join(lines) + '\n', encoding='utf-8')


def load_parameters(path: PathLike) -> Tuple[Dict[str, np.ndarray], Dict[str, str]]:
    """Inverse of save_parameters; tensors come back as (rows, cols) arrays"""
    tensors, meta = {}, {}
    for number, line in enumerate(Path(path).read_text(encoding='utf-8').splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith('#'):
            key, sep, value = line[1:].partition('=')
            if sep:
                meta[key.strip()] = value.strip()
            continue
        fields = line.split()
        try:
            rows, cols = int(fields[1]), int(fields[2])
            values = np.array([float(x) for x in fields[3:]], dtype=np.float64)
        except (IndexError, ValueError) as e:
            raise ValueError("{}:{}: malformed tensor line".format(path, number)) from e
        if values.size != rows * cols:
            raise ValueError("{}:{}: {} expects {} values, found {}".format(
                path, number, fields[0], rows * cols, values.size))
        tensors[fields[0]] = values.reshape(rows, cols)
    return tensors, meta
