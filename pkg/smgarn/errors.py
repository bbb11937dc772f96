from __future__ import annotations

from collections.abc import Iterable


class SmgarnError(Exception):
    """Base class for every error raised by the package."""


class DimensionError(SmgarnError, ValueError):
    pass


class DomainError(SmgarnError, ValueError):
    pass


class ParameterError(SmgarnError, ValueError):
    pass


class SizeError(SmgarnError, ValueError):
    pass


class SingularityError(SmgarnError, ValueError):
    def __init__(self, pixel_count: int, eps: float) -> None:
        self.pixel_count = pixel_count
        self.eps = eps
        super().__init__(
            f"Z*R exceeds 1 - eps ({1.0 - eps:g}) at {pixel_count} pixel(s); veil-free inversion is singular there"
        )


class PairingError(SmgarnError, ValueError):
    def __init__(self, sample_id: str, detail: str) -> None:
        self.sample_id = sample_id
        super().__init__(f"Sample {sample_id!r}: {detail}")


class DatasetIOError(SmgarnError, OSError):
    pass


class DatasetError(SmgarnError, ValueError):
    pass


class ConfigurationError(SmgarnError, ValueError):
    pass


class ConfigFileError(SmgarnError, ValueError):
    def __init__(self, line: int, detail: str) -> None:
        self.line = line
        super().__init__(f"line {line}: {detail}")


class RegistryError(SmgarnError, KeyError):
    def __init__(self, kind: str, name: str, known: Iterable[str]) -> None:
        self.name = name
        self.known = sorted(known)
        super().__init__(f"Unknown {kind} {name!r}; known: {', '.join(self.known)}")

    def __str__(self) -> str:
        # KeyError would repr() the message
        return str(self.args[0])


class TrainingDivergedError(SmgarnError, RuntimeError):
    def __init__(self, step: int, value: float) -> None:
        self.step = step
        self.value = value
        super().__init__(f"Non-finite loss ({value}) at step {step}; aborting")


class CheckpointError(SmgarnError, ValueError):
    pass
