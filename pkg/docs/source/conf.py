# Configuration file for Sphinx documentation

import os
import sys

sys.path.insert(0, os.path.abspath("../.."))

project = "ntuple2048"
copyright = "2024, ntuple2048 developers"
author = "ntuple2048 developers"

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "sphinx.ext.mathjax",
    "sphinx_autodoc_typehints",
    "myst_parser",
]

templates_path = ["_templates"]
exclude_patterns = []

html_theme = "furo"

# Napoleon settings
napoleon_google_docstring = True
napoleon_numpy_docstring = True
napoleon_include_init_with_doc = True

# Autodoc settings
autodoc_default_options = {
    "members": True,
    "member-order": "bysource",
    "undoc-members": True,
    "exclude-members": "__weakref__",
}

# compiled kernels and native loggers are not importable on the docs builder
autodoc_mock_imports = [
    "numba",
    "spdlog",
    "dynaconf",
    "orjson",
]

docutils_tab_width = 4
