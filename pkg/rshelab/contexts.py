from contextlib import contextmanager
from typing import ContextManager, Generator

__RSHELAB_ENABLE_CHECKS: bool = True


def _should_do_checks() -> bool:
    return __RSHELAB_ENABLE_CHECKS


@contextmanager
def _set_enable_checks(value: bool) -> Generator[None, None, None]:
    global __RSHELAB_ENABLE_CHECKS
    prev = __RSHELAB_ENABLE_CHECKS
    __RSHELAB_ENABLE_CHECKS = value
    try:
        yield
    finally:
        __RSHELAB_ENABLE_CHECKS = prev


def enable_checks() -> ContextManager[None]:
    """Enable the per-step invariant assertions (finite values, norm preservation)."""
    return _set_enable_checks(True)


def disable_checks() -> ContextManager[None]:
    """Skip the per-step invariant assertions.

    Preconditions of public operations are still checked.
    """
    return _set_enable_checks(False)
