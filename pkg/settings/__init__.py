# -*- coding: utf-8 -*-
"""
Repository-wide settings
`FOLDER_PATH` defaults to the repository root; a `private.py` file in this
folder can override it (and anything else machine-specific)
"""
import os

FOLDER_PATH = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

try:
    from settings.private import *  # noqa: F401,F403
except ImportError:
    pass
