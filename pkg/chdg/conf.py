import os

from django.conf import settings

DEFAULT_THREADS = os.cpu_count() or 1


def worker_count():
    """
    Number of workers for independent runs.  The CHDG_THREADS environment
    variable caps whatever the project settings ask for.
    """
    count = getattr(settings, 'CHDG_THREADS', None) or DEFAULT_THREADS
    env = os.environ.get('CHDG_THREADS')
    if env:
        try:
            count = min(count, int(env))
        except ValueError:
            pass
    return max(1, int(count))
