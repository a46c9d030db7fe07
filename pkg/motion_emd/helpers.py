import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.ndimage import map_coordinates

from motion_emd.errors import DatasetError

"""
Helper functions for image, flow-dump and attention-map files.
"""

FLOW_MAGIC = b'FLO1'
FRAME_SUFFIXES = ('.pgm', '.png')

PathLike = Union[str, Path]


def resize_bilinear(array: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Bilinear resampling of a 2-D array with pixel-centre alignment.
    :param array: 2-D input
    :param shape: (rows, cols) of the output
    :return: float64 array of the requested shape
    """
    array = np.asarray(array, dtype=np.float64)
    rows, cols = int(shape[0]), int(shape[1])
    if (rows, cols) == array.shape:
        return array.copy()
    src_rows = (np.arange(rows) + 0.5) * array.shape[0] / rows - 0.5
    src_cols = (np.arange(cols) + 0.5) * array.shape[1] / cols - 0.5
    src_rows = np.clip(src_rows, 0, array.shape[0] - 1)
    src_cols = np.clip(src_cols, 0, array.shape[1] - 1)
    grid = np.meshgrid(src_rows, src_cols, indexing='ij')
    return map_coordinates(array, grid, order=1, mode='nearest')


def read_image(path: PathLike, size: int = None) -> np.ndarray:
    """Decode an image file, optionally resizing it to size x size (bilinear).
    :param path: PGM or PNG file
    :param size: output side in pixels, None keeps the native size
    :return: uint8/uint16 array as decoded, or float32 after resizing
    """
    path = Path(path)
    try:
        with Image.open(path) as image:
            image.load()
            if image.mode not in ('L', 'I;16', 'I', 'F', 'RGB', 'RGBA'):
                image = image.convert('RGB')
            if size is not None and image.size != (size, size):
                array = _resize_image(image, size)
            else:
                array = np.asarray(image)
    except (OSError, UnidentifiedImageError, ValueError) as e:
        raise OSError("Cannot decode frame {}: {}".format(path, e)) from e
    if array.dtype == np.int32:
        # 16-bit PNGs open in mode 'I'
        array = array.astype(np.uint16)
    return array


def _resize_image(image: Image.Image, size: int) -> np.ndarray:
    """Resize each band in float mode so no precision is lost to 8 bits"""
    native = np.asarray(image)
    scale = float(np.iinfo(native.dtype).max) if np.issubdtype(native.dtype, np.integer) else 1.0
    bands = native[:, :, None] if native.ndim == 2 else native
    resized = [
        np.asarray(Image.fromarray(bands[:, :, k].astype(np.float32) / scale)
                   .resize((size, size), Image.BILINEAR))
        for k in range(bands.shape[2])
    ]
    stacked = np.stack(resized, axis=2)
    return stacked[:, :, 0] if native.ndim == 2 else stacked


def write_pgm(path: PathLike, values: np.ndarray) -> None:
    """Write values in [0, 1] as an 8-bit binary PGM (scaled x255)"""
    scaled = np.round(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(scaled).save(str(path), format='PPM')


def write_flow(path: PathLike, u: np.ndarray, v: np.ndarray) -> None:
    """Dump a flow field: b'FLO1', u32 width, u32 height, then (f32 u, f32 v)
    pairs, little-endian, row-major.
    """
    height, width = u.shape
    pairs = np.stack([u, v], axis=2).astype('<f4')
    with open(path, 'wb') as handle:
        handle.write(FLOW_MAGIC)
        handle.write(struct.pack('<II', width, height))
        handle.write(pairs.tobytes())


def read_flow(path: PathLike) -> Tuple[np.ndarray, np.ndarray]:
    """Read a FLO1 dump back into (u, v) float64 arrays
    :raises DatasetError: wrong magic, short header or truncated payload
    """
    with open(path, 'rb') as handle:
        raw = handle.read()
    if raw[:4] != FLOW_MAGIC or len(raw) < 12:
        raise DatasetError("{} is not a FLO1 flow dump".format(path))
    width, height = struct.unpack('<II', raw[4:12])
    if len(raw) != 12 + 8 * width * height:
        raise DatasetError("{} is truncated".format(path))
    pairs = np.frombuffer(raw[12:], dtype='<f4')
    pairs = pairs.reshape(height, width, 2).astype(np.float64)
    return pairs[:, :, 0], pairs[:, :, 1]


def list_frames(frame_dir: PathLike) -> list:
    """Frame files of a directory in lexicographic order"""
    frame_dir = Path(frame_dir)
    return sorted(p for p in frame_dir.iterdir()
                  if p.is_file() and p.suffix.lower() in FRAME_SUFFIXES)
