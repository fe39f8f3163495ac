class ConfigError(ValueError):
    """Invalid configuration or incompatible inputs (CLI exit status 2)."""
