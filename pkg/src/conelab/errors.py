class AnalysisError(ValueError):
    """The requested analysis cannot run on this input (bad point, empty variety)."""


class PointNotOnVariety(AnalysisError):
    pass


class EmptyVarietyError(AnalysisError):
    pass
