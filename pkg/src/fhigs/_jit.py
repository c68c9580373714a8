try:
    from numba import njit
except ImportError:  # pragma: no cover - pure-Python fallback, slow but correct
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator
