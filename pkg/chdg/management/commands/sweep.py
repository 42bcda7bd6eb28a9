import os

from chdg.decorators import exit_on_error
from chdg.diagnostics import interface_sweep
from chdg.exceptions import ConfigError
from chdg.management.base import ChdgCommand
from chdg.output import write_interface

SWEEP_NAME = 'interface_eps%g_t%g.csv'


class Command(ChdgCommand):
    help = "Zero level sets at sweep_times for every epsilon in epsilon_list"

    @exit_on_error()
    def handle(self, *args, **options):
        config = self.load_config(options)
        missing = [name for name in ('epsilon_list', 'sweep_times') if not getattr(config, name)]
        if missing:
            raise ConfigError(['%s is required' % name for name in missing])
        snapshots = interface_sweep(
            config.model_params(), config.test_case, config.epsilon_list,
            config.sweep_times, config.n, shape=config.custom_interface,
        )
        for snapshot in snapshots:
            name = SWEEP_NAME % (snapshot.epsilon, snapshot.time)
            write_interface(os.path.join(config.output_dir, name), [snapshot.polyline])
            self.stdout.write('epsilon=%g time=%g segments=%d -> %s' % (
                snapshot.epsilon, snapshot.time, len(snapshot.polyline.segments), name,
            ))
