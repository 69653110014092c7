from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("driftspec")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "uninstalled"
