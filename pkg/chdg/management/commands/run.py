import json
import os

from chdg.decorators import exit_on_error
from chdg.diagnostics import PUBLISHED_MASS, measured_mass_report
from chdg.dg import DGSpace
from chdg.forms import emit_config
from chdg.management.base import ChdgCommand
from chdg.mesh import build_uniform_mesh
from chdg.output import RunWriter, atomic_write
from chdg.stepper import run_simulation


class Command(ChdgCommand):
    help = "Run a Cahn-Hilliard simulation and write the time series and field dumps"

    @exit_on_error()
    def handle(self, *args, **options):
        config = self.load_config(options)
        params = config.model_params()
        space = DGSpace(build_uniform_mesh(config.n), config.degree)
        writer = RunWriter(config.output_dir)
        atomic_write(
            os.path.join(config.output_dir, 'config.json'),
            json.dumps(emit_config(config), indent=2, sort_keys=True) + '\n',
        )
        result = run_simulation(
            params, space, config.initial_condition(), sinks=[writer],
            dump_every=config.dump_every,
        )
        final = result.record.rows[-1]
        if config.test_case in PUBLISHED_MASS:
            measured_mass_report(config.test_case, final.mass)
        self.stdout.write('%d steps, energy %.12g, mass %.15g, output in %s' % (
            final.step, final.energy, final.mass, config.output_dir,
        ))
