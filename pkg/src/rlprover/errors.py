"""Exception hierarchy shared by all engine modules."""


class RLProverError(Exception):
    pass


class ParseError(RLProverError):
    def __init__(self, msg, line=None):
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)
        self.line = line


class SignatureError(RLProverError):
    pass


class IllTyped(RLProverError):
    pass


class AmbiguousSort(RLProverError):
    pass


class InvalidPosition(RLProverError):
    pass


class UnsupportedAxioms(RLProverError):
    pass


class BudgetExceeded(RLProverError):
    pass


class StepBudgetExceeded(BudgetExceeded):
    pass


class TruncatedUnification(RLProverError):
    """A unifier set was cut off by the split budget where completeness is required."""


class ConditionUnevaluated(RLProverError):
    pass


class ExecutabilityError(RLProverError):
    pass


class AlreadyTransformed(RLProverError):
    pass


class NotACoverSet(RLProverError):
    pass


class UnsupportedSplitShape(RLProverError):
    pass


class AwayViolated(RLProverError):
    pass


class NotInConstraint(RLProverError):
    pass


class ScriptError(RLProverError):
    pass
