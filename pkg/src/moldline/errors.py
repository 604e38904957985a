"""Exception types shared across the package."""


class MoldlineError(Exception):
    """Base class for every error raised by this package."""


# -- dataset ---------------------------------------------------------------

class MissingFile(MoldlineError):
    pass


class MalformedRecord(MoldlineError):
    pass


class ChannelMismatch(MoldlineError):
    pass


class BadSplitSize(MoldlineError):
    pass


# -- preprocess ------------------------------------------------------------

class EmptyTrace(MoldlineError):
    pass


class DegenerateConstant(MoldlineError):
    pass


class ZeroStd(MoldlineError):
    pass


class BadDims(MoldlineError):
    pass


# -- cwt -------------------------------------------------------------------

class BadWidth(MoldlineError):
    pass


class SignalTooShort(MoldlineError):
    pass


# -- haralick --------------------------------------------------------------

class NoValidPairs(MoldlineError):
    pass


# -- descriptors -----------------------------------------------------------

class TooFewValues(MoldlineError):
    pass


# -- regress ---------------------------------------------------------------

class SingularDesign(MoldlineError):
    pass


class NotFitted(MoldlineError):
    pass


class BadModelKind(MoldlineError):
    def __init__(self, kind, valid):
        self.kind = kind
        self.valid = list(valid)
        super().__init__(f"unknown model kind {kind!r}; valid kinds: {', '.join(self.valid)}")


# -- nn --------------------------------------------------------------------

class ShapeMismatch(MoldlineError):
    pass


class NonFiniteLoss(MoldlineError):
    pass


# -- synth / cli -----------------------------------------------------------

class BadConfig(MoldlineError):
    pass
