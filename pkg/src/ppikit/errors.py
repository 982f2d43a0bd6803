"""Exception hierarchy shared across the package."""


class PPIKitError(Exception):
    """Base class for all ppikit errors."""


# --- sequence encoding ---------------------------------------------------

class UnknownResidue(PPIKitError):
    """A character is not one of the 24 alphabet symbols."""


class SequenceTooLong(PPIKitError):
    """A sequence exceeds the maximum encodable length."""


class EmptySequence(PPIKitError):
    """A zero-length sequence where at least one residue is required."""


# --- dataset construction ------------------------------------------------

class MalformedRow(PPIKitError):
    """An input row does not have the expected column count."""


class IllegalLabel(PPIKitError):
    """An interaction label outside {0, 1}."""


class DuplicatePair(PPIKitError):
    """An exact (id_a, id_b, label) triple seen twice."""


class InsufficientCandidates(PPIKitError):
    """Fewer non-interacting couples exist than were requested."""


class ImbalancedCorpus(PPIKitError):
    """A corpus whose positive and negative counts differ where balance is required."""


class EmptyStrictTest(PPIKitError):
    """No couple qualifies for the strict test set."""


class AlreadyAugmented(PPIKitError):
    """Mirror augmentation applied twice to the same split."""


# --- network layers -------------------------------------------------------

class ShapeMismatch(PPIKitError):
    """Tensor shapes incompatible with the operation."""


class InputTooShort(PPIKitError):
    """Sequence axis shorter than a kernel or pooling window."""


class InferBeforeTrain(PPIKitError):
    """Inference-mode batch normalization before any moving statistics exist."""


class NoForwardState(PPIKitError):
    """Backward pass requested without a preceding train-mode forward pass."""


# --- training and persistence ---------------------------------------------

class EmptyDataset(PPIKitError):
    """Training or evaluation requested on an empty dataset."""


class IoFailure(PPIKitError):
    """Filesystem error while reading or writing a checkpoint."""


class VersionMismatch(PPIKitError):
    """Checkpoint format version not supported by this build."""


class ModelKindMismatch(PPIKitError):
    """Checkpoint built for a different model architecture."""


class CorruptFile(PPIKitError):
    """Checkpoint failed structural or checksum validation."""


# --- command line ----------------------------------------------------------

class ConfigError(PPIKitError):
    """Bad key or value in a configuration file."""
