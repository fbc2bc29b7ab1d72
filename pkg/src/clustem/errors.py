"""Error types shared across the package, mapped to CLI exit codes."""


class InputError(Exception):
    """Bad user input: malformed data files, unknown columns, invalid parameters."""


class ProviderError(Exception):
    """Embedding source failure: unreadable vector file, out-of-vocabulary value,
    or a broken API response."""
