"""Exception hierarchy for the causal rules pipeline."""

from typing import Optional


class CausalRulesError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(CausalRulesError):
    """Invalid configuration value."""


class DataError(CausalRulesError):
    """Problem with the input data."""


class MissingColumn(DataError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"MissingColumn: column '{name}' not found")


class NonBinaryTreatment(DataError):
    def __init__(self, row: int, value: object = None):
        self.row = row
        self.value = value
        super().__init__(f"NonBinaryTreatment: row {row} has treatment value {value!r}")


class UnparseableCell(DataError):
    def __init__(self, row: int, col: str, value: object = None):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"UnparseableCell: row {row}, column '{col}': {value!r}")


class TooManyLevels(DataError):
    def __init__(self, name: str, n_levels: int, limit: int):
        self.name = name
        self.n_levels = n_levels
        super().__init__(
            f"TooManyLevels: categorical column '{name}' has {n_levels} levels (limit {limit})"
        )


class ScoreOutOfRange(DataError):
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"ScoreOutOfRange: propensity score {value!r} at unit {index} not in (0, 1)")


class InsufficientUnits(DataError):
    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"InsufficientUnits: {detail}")


class AllTreatedOrAllControl(DataError):
    def __init__(self, n_treated: int, n_units: int):
        self.n_treated = n_treated
        self.n_units = n_units
        super().__init__(
            f"AllTreatedOrAllControl: {n_treated} of {n_units} units treated"
        )


class SchemaMismatch(DataError):
    def __init__(self, column: str, detail: Optional[str] = None):
        self.column = column
        msg = f"SchemaMismatch: column '{column}'"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class UnknownLiteral(DataError):
    def __init__(self, literal_id: int):
        self.literal_id = literal_id
        super().__init__(f"UnknownLiteral: {literal_id}")


class EmptyInput(DataError):
    def __init__(self, what: str = "input"):
        super().__init__(f"EmptyInput: {what} is empty")


class LengthMismatch(DataError):
    def __init__(self, a: int, b: int):
        super().__init__(f"LengthMismatch: {a} != {b}")


class AllTruthZero(DataError):
    def __init__(self):
        super().__init__("AllTruthZero: every true effect is zero, MAPE undefined")


class InvalidRule(CausalRulesError):
    def __init__(self, literal_ids: tuple, detail: str):
        self.literal_ids = literal_ids
        super().__init__(f"InvalidRule {list(literal_ids)}: {detail}")


class SearchError(CausalRulesError):
    """The optimizer could not produce a rule."""


class NoFeasibleRule(SearchError):
    def __init__(self, detail: str = "no rule satisfies the minimum support"):
        super().__init__(f"NoFeasibleRule: {detail}")


class SearchSpaceTooLarge(SearchError):
    def __init__(self, size: int, limit: int):
        self.size = size
        super().__init__(f"SearchSpaceTooLarge: {size} rules exceeds limit {limit}")


class MinSupportViolated(SearchError):
    def __init__(self, treated: int, control: int, m_min: int):
        self.treated = treated
        self.control = control
        self.m_min = m_min
        super().__init__(
            f"MinSupportViolated: covers {treated} treated / {control} control, need {m_min} each"
        )
