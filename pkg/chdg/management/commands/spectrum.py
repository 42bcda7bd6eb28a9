import os

from chdg.decorators import exit_on_error
from chdg.dg import DGSpace
from chdg.diagnostics import spectrum_estimate, spectrum_snapshot
from chdg.management.base import ChdgCommand
from chdg.mesh import build_uniform_mesh
from chdg.output import SPECTRUM, write_spectrum


class Command(ChdgCommand):
    help = "Smallest eigenvalue of the linearized Cahn-Hilliard operator per mesh"

    @exit_on_error()
    def handle(self, *args, **options):
        config = self.load_config(options)
        params = config.model_params()
        initial = config.initial_condition()
        rows = []
        for n in config.n_list or (config.n,):
            space = DGSpace(build_uniform_mesh(n), config.degree)
            U, solver = spectrum_snapshot(params, space, initial, config.snapshot_time)
            value = spectrum_estimate(U, config.epsilon, solver)
            rows.append((n, config.epsilon, value))
            self.stdout.write('n=%d epsilon=%g lambda_min=%.12g' % (n, config.epsilon, value))
        write_spectrum(os.path.join(config.output_dir, SPECTRUM), rows)
