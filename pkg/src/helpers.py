# -*- coding: utf-8 -*-
"""
Helpers
"""
import os
import hashlib

import numpy as np
from tqdm import tqdm


def parallel_map(func, items: list, jobs: int = 1, desc: str = None) -> list:
    """ `func` over `items`, results in input order.
    `jobs > 1` uses a ray multiprocessing pool """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in tqdm(items, desc=desc, leave=False, disable=desc is None)]
    from ray.util.multiprocessing import Pool
    with Pool(processes=min(jobs, len(items))) as pool:
        return pool.map(func, items)


def file_sha256(path: str) -> str:
    """ Hex digest of a file's bytes """
    digest = hashlib.sha256()
    with open(path, "rb") as openfile:
        for chunk in iter(lambda: openfile.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def derive_seed(base_seed: int, *keys) -> int:
    """ Stable 63-bit seed from a base seed and any hashable description """
    text = "|".join([str(base_seed)] + [str(key) for key in keys])
    return int(hashlib.sha256(text.encode("utf-8")).hexdigest()[:16], 16) >> 1


def make_folder(path: str) -> str:
    if not os.path.exists(path):
        os.makedirs(path)
    return path


def format_degrees(degrees: float) -> str:
    """ 2 -> '+2', -1.5 -> '-1.5' """
    value = float(degrees)
    text = f"{int(value):+d}" if value.is_integer() else f"{value:+g}"
    return text


def to_builtin(value):
    """ numpy scalars/arrays -> python objects (json/yaml friendly) """
    if isinstance(value, dict):
        return {str(key): to_builtin(val) for key, val in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(val) for val in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value
