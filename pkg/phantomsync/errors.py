"""

Exceptions raised by phantomsync. 

Everything derives from :class:`SynCError`. Problems with inputs (config files, data files, shapes, 
strategy choices) derive from :class:`ConfigError`; failures of the numerics (non-finite objectives, 
zero vectors, empty evaluations) derive from :class:`NumericError`. The ``phantomsync`` command exits 
with code 2 for the former and 3 for the latter.

"""

#------------------------------------------------------------------------------------------------------------
class SynCError(Exception):
    pass

class ConfigError(SynCError):
    pass

class NumericError(SynCError):
    pass

#------------------------------------------------------------------------------------------------------------
class DimensionMismatchError(ConfigError):
    pass

class ShapeMismatchError(ConfigError):
    pass

class InvalidCoefficientsError(ConfigError):
    pass

class InvalidLabelError(ConfigError):
    pass

class KTooLargeError(ConfigError):
    pass

class IncompatibleStrategyError(ConfigError):
    pass

class TooFewClassesError(ConfigError):
    pass

class InvalidFoldsError(ConfigError):
    pass

class InvalidSpecError(ConfigError):
    pass

class HierarchyError(ConfigError):
    pass

class DuplicateClassError(ConfigError):
    pass

#------------------------------------------------------------------------------------------------------------
class ParseError(ConfigError):
    """Raised when a text file cannot be parsed. Carries the (1-based) line and column numbers of the 
    offending token, where known.
    
    """
    def __init__(self, message, line = None, column = None):
        self.line=line
        self.column=column
        if line is not None:
            message="line %d%s: %s" % (line, "" if column is None else ", column %d" % (column), message)
        super().__init__(message)

#------------------------------------------------------------------------------------------------------------
class DataIOError(ConfigError):
    """Raised when a file cannot be read or written.
    
    """
    def __init__(self, message, path = None):
        self.path=path
        super().__init__(message)

#------------------------------------------------------------------------------------------------------------
class ZeroVectorError(NumericError):
    """Raised when a vector that must be normalized (or compared by angle) has zero length.
    
    """
    def __init__(self, message, classId = None):
        self.classId=classId
        super().__init__(message)

#------------------------------------------------------------------------------------------------------------
class NonFiniteError(NumericError):
    def __init__(self, message, line = None):
        self.line=line
        if line is not None:
            message="line %d: %s" % (line, message)
        super().__init__(message)

class EmptyEvaluationError(NumericError):
    pass

class UnreachableError(NumericError):
    pass

class CrossValidationError(NumericError):
    pass

#------------------------------------------------------------------------------------------------------------
class StageError(SynCError):
    """Wraps an exception raised inside one stage of a pipeline run, so that the failing stage can be 
    reported. 
    
    Attributes:
        stage (:obj:`str`): Stage tag (e.g., 'cv', 'phantoms', 'train', 'synthesize', 'evaluate', 'write').
        cause (:obj:`Exception`): The original exception.
    
    """
    def __init__(self, stage, cause):
        self.stage=stage
        self.cause=cause
        super().__init__("stage '%s' failed: %s" % (stage, cause))

#------------------------------------------------------------------------------------------------------------
def exitCodeFor(exc):
    """Returns the exit code for the ``phantomsync`` command that corresponds to the given exception.
    
    """
    if isinstance(exc, StageError):
        return exitCodeFor(exc.cause)
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, NumericError):
        return 3
    return 1
