from functools import wraps

from chdg.exceptions import (
    ConfigError, DumpFormatError, InterfaceError, SolverError, UnknownTestCase,
)

ERROR_PREFIX = 'chdg-error'

CONFIG_EXIT = 1
SOLVER_EXIT = 2
IO_EXIT = 2


def report_error(stream, category, message, prefix=ERROR_PREFIX):
    stream.write('%s: %s: %s' % (prefix, category, message))


def exit_on_error(prefix=ERROR_PREFIX):
    """
    Wraps a management command's ``handle`` so that library errors end the
    process with a one-line report per problem on the command's stderr and
    a meaningful exit status:

        configuration and input problems   exit 1
        solver failures                    exit 2
        unreadable or unwritable files     exit 2

    Use:

    class Command(BaseCommand):
        @exit_on_error()
        def handle(self, *args, **options):
            ...

    Don't forget the () even without arguments.
    """
    def handle_decorator(handle):
        @wraps(handle)
        def wrapper(self, *args, **options):
            try:
                return handle(self, *args, **options)
            except ConfigError as e:
                for message in e.errors:
                    report_error(self.stderr, 'config', message, prefix)
                raise SystemExit(CONFIG_EXIT)
            except (InterfaceError, UnknownTestCase) as e:
                report_error(self.stderr, 'input', e, prefix)
                raise SystemExit(CONFIG_EXIT)
            except SolverError as e:
                report_error(self.stderr, 'solver', e, prefix)
                raise SystemExit(SOLVER_EXIT)
            except (OSError, DumpFormatError) as e:
                report_error(self.stderr, 'io', e, prefix)
                raise SystemExit(IO_EXIT)
        return wrapper
    return handle_decorator
