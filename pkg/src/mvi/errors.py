"""Exception hierarchy.

Validation problems derive from :class:`ValidationError` (CLI exit code 1),
numerical breakdowns from :class:`NumericalError` (exit code 3).
"""


class MviError(Exception):
    pass


class ValidationError(MviError, ValueError):
    pass


class NumericalError(MviError, ArithmeticError):
    pass


class RowSumError(ValidationError):
    def __init__(self, s, a, total):
        super().__init__(f"state {s} action {a}: probabilities sum to {total!r}, not 1")
        self.s, self.a, self.total = s, a, total


class RewardRangeError(ValidationError):
    def __init__(self, s, a, reward, bounds=(0.0, 1.0)):
        if s is None:
            msg = f"declared reward range {reward!r} is not inside [-1, 1]"
        else:
            msg = f"state {s} action {a}: reward {reward!r} outside [{bounds[0]:g}, {bounds[1]:g}]"
        super().__init__(msg)
        self.s, self.a, self.reward = s, a, reward


class EmptyActionSet(ValidationError):
    def __init__(self, s):
        super().__init__(f"state {s} has no actions")
        self.s = s


class ParseError(ValidationError):
    def __init__(self, path, message, line=None):
        where = path if line is None else f"{path} (line {line})"
        super().__init__(f"{where}: {message}")
        self.path, self.line = path, line


class LengthMismatch(ValidationError):
    pass


class EmptyVector(ValidationError):
    pass


class PolicyMismatch(ValidationError):
    pass


class GammaOutOfRange(ValidationError):
    pass


class EpsOutOfRange(ValidationError):
    pass


class InvalidInstance(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class NotTransient(ValidationError):
    def __init__(self, s):
        super().__init__(f"state {s} is recurrent under this policy")
        self.s = s


class EnumerationTooLarge(MviError):
    def __init__(self, size, cap):
        super().__init__(f"{size} deterministic policies exceed the enumeration cap {cap}")
        self.size, self.cap = size, cap


class MissingContraction(MviError):
    pass


class IterationBudgetTooSmall(MviError):
    def __init__(self, n, needed):
        super().__init__(f"iteration budget {n} is below the warm-start length {needed}")
        self.n, self.needed = n, needed


class NotEpsGreedy(MviError):
    def __init__(self, slack):
        super().__init__(f"policy is not eps-greedy: shortfall {slack:.3e}")
        self.slack = slack


class SingularSystem(NumericalError):
    def __init__(self, message, condition=None):
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)
        self.condition = condition


class NoReferenceFound(NumericalError):
    def __init__(self, report):
        super().__init__(f"no gain-optimal policy passed the unmodified equations: {report}")
        self.report = report


class DegenerateDelta(NumericalError):
    pass


class NonconvergenceSuspected(NumericalError):
    pass
