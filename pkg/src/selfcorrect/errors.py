"""Exception hierarchy shared by every module in the package."""


class SelfCorrectError(Exception):
    """Base class for all errors raised by this package."""


class InvalidProbability(SelfCorrectError, ValueError):
    """A value that must be a probability lies outside [0, 1]."""


class NumericalDomain(SelfCorrectError, ArithmeticError):
    """A computed probability left [0, 1] by more than the clamp tolerance."""


class DegenerateWeights(SelfCorrectError, ZeroDivisionError):
    """A weighted average has zero total weight."""


class NonConvergent(SelfCorrectError, ArithmeticError):
    """The accuracy gap does not shrink geometrically (|alpha| >= 1)."""


class RoundOutOfRange(SelfCorrectError, IndexError):
    """A round index is outside the range held by a transcript."""


class CurveTooShort(SelfCorrectError, ValueError):
    """A curve has too few points for the requested operation."""


class LengthMismatch(SelfCorrectError, ValueError):
    """Two curves that must be compared pointwise differ in length."""


class ParseError(SelfCorrectError, ValueError):
    """An input document could not be parsed."""

    def __init__(self, message, path=None, line=None, field=None):
        self.path = path
        self.line = line
        self.field = field
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ": ".join([", ".join(where)]) + ": " if where else ""
        super().__init__(prefix + message)


class ValidationError(SelfCorrectError, ValueError):
    """A document parsed but violates one or more constraints.

    ``violations`` holds every problem found, not only the first.
    """

    def __init__(self, violations, path=None):
        self.violations = list(violations)
        self.path = path
        head = f"{path}: " if path is not None else ""
        body = "; ".join(self.violations)
        super().__init__(f"{head}{len(self.violations)} violation(s): {body}")


class GapError(SelfCorrectError, ValueError):
    """A transcript is missing a (question, sample, round) record."""

    def __init__(self, question_id, sample, round_, path=None):
        self.question_id = question_id
        self.sample = sample
        self.round = round_
        self.path = path
        head = f"{path}: " if path is not None else ""
        super().__init__(
            f"{head}missing record question_id={question_id!r} "
            f"sample={sample} round={round_}"
        )


class WriteError(SelfCorrectError, OSError):
    """Writing an output file failed."""

    def __init__(self, path, cause):
        self.path = path
        super().__init__(f"cannot write {path}: {cause}")
