"""Typed errors raised by windsynth.

Every data error carries enough location information (file line, date,
column name) to point the user at the offending input.
"""


class WindSynthError(Exception):
    """Base class for all data and model errors."""


class MalformedRow(WindSynthError):
    def __init__(self, line, reason=""):
        self.line = line
        msg = f"malformed row at line {line}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class NegativeValue(MalformedRow):
    def __init__(self, line):
        super().__init__(line, "negative value")


class NonContiguousAxis(WindSynthError):
    def __init__(self, expected, found, line=None):
        self.expected = expected
        self.found = found
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"hourly axis gap{where}: expected {expected}, found {found}")


class NonContiguousDates(NonContiguousAxis):
    pass


class EmptyRegistry(WindSynthError):
    def __init__(self):
        super().__init__("plant registry contains no records")


class MissingCapacityDate(WindSynthError):
    def __init__(self, date):
        self.date = date
        super().__init__(f"no installed capacity for date {date}")


class ZeroCapacity(WindSynthError):
    def __init__(self, date):
        self.date = date
        super().__init__(f"installed capacity is zero on {date}")


class NonConformingSpan(WindSynthError):
    pass


class MissingColumn(WindSynthError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"missing column {name!r}")


class EmptySelection(WindSynthError):
    pass


class AxisMismatch(WindSynthError):
    pass


class ShapeMismatch(WindSynthError, ValueError):
    """Input has the wrong number of columns or rows (also a ValueError, as sklearn expects)."""


class DivergenceDetected(WindSynthError):
    def __init__(self, epoch):
        self.epoch = epoch
        super().__init__(f"training loss became non-finite at epoch {epoch}")


class PeriodTooShort(WindSynthError):
    pass


class DegenerateSeries(WindSynthError):
    pass


class ZeroMeanObservations(WindSynthError):
    pass


class SeriesTooShort(WindSynthError):
    pass


class OutsideGrid(WindSynthError):
    def __init__(self, lon, lat):
        self.lon = lon
        self.lat = lat
        super().__init__(f"location ({lon}, {lat}) lies outside the grid hull")


class NonPositiveSpeed(WindSynthError):
    pass


class BisectionFailure(WindSynthError):
    pass


class ModelFormatError(WindSynthError):
    pass


class ConfigError(WindSynthError):
    pass
