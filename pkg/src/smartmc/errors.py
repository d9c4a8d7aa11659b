"""Exception hierarchy.

The CLI maps :class:`DataError` to exit code 2 and :class:`NumericalError`
to exit code 3.
"""


class SmartMCError(Exception):
    pass


class DataError(SmartMCError):
    pass


class NumericalError(SmartMCError):
    pass


# -- geometry ---------------------------------------------------------------

class ShapeMismatch(DataError):
    pass


class NormViolation(NumericalError):
    def __init__(self, block, norm):
        self.block = block
        self.norm = norm
        super().__init__(f"block {block} has norm {norm!r}, expected 1")


class ZeroVector(NumericalError):
    pass


# -- optimizer --------------------------------------------------------------

class ObjectiveNonFinite(NumericalError):
    def __init__(self, point, value):
        self.point = point
        self.value = value
        super().__init__(f"objective returned non-finite value {value!r}")


class NotConverged(SmartMCError):
    pass


# -- model ------------------------------------------------------------------

class TolTooSmall(DataError):
    pass


class OverflowGuard(NumericalError):
    pass


class ZeroProbability(NumericalError):
    pass


class MissingCoefficient(DataError):
    pass


class ZeroSelfTransition(NumericalError):
    pass


# -- io ---------------------------------------------------------------------

class ParseError(DataError):
    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
                if column is not None:
                    where += f":{column}"
            where += ": "
        super().__init__(where + message)


class SchemaMismatch(DataError):
    pass


class EmptyLog(DataError):
    pass


class DegenerateColumn(DataError):
    pass
