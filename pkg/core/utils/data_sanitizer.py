SENSITIVE_PATTERNS = ("_API_KEY", "_SECRET", "_TOKEN", "_PASSWORD")


def is_sensitive_key(key: str) -> bool:
    return any(pattern in key.upper() for pattern in SENSITIVE_PATTERNS)


def mask_sensitive_value(key: str, value):
    """
    Masks values of sensitive settings (API keys and the like) for display.
    Keeps the first and last 4 characters of long values; short ones are masked
    completely. Values of other keys are returned unchanged.
    """
    if not is_sensitive_key(key) or value is None:
        return value
    value = str(value)
    if len(value) <= 8:
        return "********"
    return f"{value[:4]}{'*' * (len(value) - 8)}{value[-4:]}"
