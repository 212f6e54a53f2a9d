class ColocationError(ValueError):
    """Base class for every failure raised by colosched.

    `code` is a stable, machine-parsable identifier the CLI prints in front of the message."""

    code = "colocation_error"


class ProfileError(ColocationError):
    code = "profile_error"


class DatasetError(ColocationError):
    code = "dataset_error"


class ModelError(ColocationError):
    code = "model_error"


class ScheduleError(ColocationError):
    code = "schedule_error"


class SimulationError(ColocationError):
    code = "simulation_error"


class ConfigError(ColocationError):
    code = "config_error"
