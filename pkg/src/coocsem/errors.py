"""Exception hierarchy shared by all coocsem modules."""


class CoocsemError(Exception):
    """Base class for every error raised by this package."""


class NotInVocabularyError(CoocsemError, KeyError):
    def __init__(self, word, detail="not in vocabulary"):
        self.word = word
        super().__init__(f"{word!r}: {detail}")

    def __str__(self):
        return self.args[0]


class FilteredWordError(NotInVocabularyError):
    """The word is indexed but was excluded from pair counting."""

    def __init__(self, word, min_freq):
        super().__init__(word, f"below pair-count filter (min sentence freq {min_freq})")


class EmptyCorpusError(CoocsemError):
    pass


class DegenerateTableError(CoocsemError, ValueError):
    pass


class MissingCueError(CoocsemError, KeyError):
    def __init__(self, cue):
        self.cue = cue
        super().__init__(f"no associate set for cue {cue!r}")

    def __str__(self):
        return self.args[0]


class AnnotationError(CoocsemError):
    def __init__(self, item_id, slot, word, reason):
        self.item_id = item_id
        self.slot = slot
        self.word = word
        super().__init__(f"item {item_id}: slot {slot} ({word!r}): {reason}")


class InfeasibleSelectionError(CoocsemError):
    pass


class ListConstraintError(CoocsemError):
    def __init__(self, constraint, message):
        self.constraint = constraint
        super().__init__(f"{constraint}: {message}")


class StructuralError(CoocsemError, ValueError):
    """Malformed trial data (unordered or overlapping fixations, no events)."""


class InsufficientDataError(CoocsemError, ValueError):
    pass


class SingularDesignError(CoocsemError, ValueError):
    pass


class ConfigError(CoocsemError, ValueError):
    pass
