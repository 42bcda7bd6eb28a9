"""
Console entry point: ``chdg run|converge|spectrum|interface [options]``.
"""
import os
import sys

COMMANDS = ('run', 'converge', 'spectrum', 'interface', 'sweep')


def main(argv=None):
    argv = list(sys.argv if argv is None else argv)
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'chdg.settings')
    from django.core.management import execute_from_command_line

    if len(argv) < 2 or argv[1] not in COMMANDS + ('help', '--help', '-h'):
        sys.stderr.write('usage: chdg {%s} [options]\n' % ','.join(COMMANDS))
        return 1
    if argv[1] in ('--help', '-h'):
        argv[1] = 'help'
    try:
        execute_from_command_line(argv)
    except SystemExit as e:
        return e.code or 0
    return 0


if __name__ == '__main__':
    sys.exit(main())
