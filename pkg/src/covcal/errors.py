"""Exception hierarchy.

The CLI maps these onto exit codes: ``ConfigError`` -> 1, ``DataError`` -> 2,
anything else derived from ``CovcalError`` -> 3.
"""


class CovcalError(Exception):
    pass


class ConfigError(CovcalError, ValueError):
    pass


class DataError(CovcalError):
    pass


class ImageLoadError(DataError, OSError):
    pass


class ManifestError(DataError, ValueError):
    pass


class GeometryError(DataError, ValueError):
    """A patch, window or sample plan does not fit inside the maps."""


class ConstraintError(CovcalError, ValueError):
    """A patch radius is not admissible for the selected front-end."""


class FitError(CovcalError, ValueError):
    pass


class BoundsError(CovcalError, ValueError):
    pass
