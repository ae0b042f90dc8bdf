from importlib.metadata import version, PackageNotFoundError

try:
    __version__ = version("ntuple2048")
except PackageNotFoundError:
    __version__ = "unknown"
