"""Exception types shared across the package."""


class MeshError(Exception):
    """Base class for all mesh related errors."""


class TopologyError(MeshError):
    """Connectivity is not a manifold (with boundary) or an operation
    would break it."""


class OperationRejected(MeshError):
    """A local modification was refused; the mesh is unchanged."""


class SingularityError(MeshError):
    """A gradient or normalization hit a degenerate configuration
    (zero-length edge, zero-area face, ...)."""

    def __init__(self, msg, element=None):
        super().__init__(msg if element is None else f"{msg} (element {element})")
        self.element = element


class MeshFileError(MeshError):
    """A mesh file could not be parsed."""

    def __init__(self, msg, path=None, line=None):
        loc = ""
        if path is not None:
            loc += str(path)
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {msg}" if loc else msg)
        self.path = path
        self.line = line
