"""Exception types shared by the library and the command line tool."""


class ConfigurationError(Exception):
    """Invalid run configuration: bad flag combinations, missing or
    inconsistent anchors, schedule values out of range."""


class DataFormatError(Exception):
    """Malformed input bytes: bad magic numbers, truncated payloads,
    ragged CSV rows, unsupported format versions."""
