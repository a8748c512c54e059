__all__ = ["__version__"]

try:
    from importlib.metadata import version as _pkg_version
    __version__ = _pkg_version("sdde-analytic")
except Exception:
    # Fallback when running from source or when distribution package is not installed
    __version__ = "0.1.0"
