class AmenError(Exception):
    pass


class ConfigError(AmenError):
    pass


class GraphError(AmenError):
    pass


class ParseError(GraphError):
    def __init__(self, source: str, line: int, message: str):
        self.source = source
        self.line = line
        super().__init__(f"{source}:{line}: {message}")


class UnknownNodeError(GraphError):
    pass


class DegenerateNeighborhoodError(GraphError):
    pass


class DisconnectedNeighborhoodError(GraphError):
    pass


class NullModelError(GraphError):
    """Raised when the graph has no edges, so k_i k_j / 2m is undefined."""


class SimilarityError(AmenError):
    pass


class WeightError(AmenError, ValueError):
    pass


class UndefinedScoreError(AmenError):
    pass


class PerturbationError(AmenError):
    pass


class EvaluationError(AmenError):
    pass


class FocusError(AmenError):
    pass
