import os

from chdg.decorators import exit_on_error
from chdg.diagnostics import convergence_study
from chdg.exceptions import ConfigError
from chdg.management.base import ChdgCommand
from chdg.output import CONVERGENCE, fmt, write_convergence


class Command(ChdgCommand):
    help = "Spatial convergence study against a doubly refined reference run"

    @exit_on_error()
    def handle(self, *args, **options):
        config = self.load_config(options)
        if not config.n_list:
            raise ConfigError('n_list is required for converge')
        report = convergence_study(
            config.model_params(), config.initial_condition(),
            config.n_list, config.reference_n,
        )
        write_convergence(os.path.join(config.output_dir, CONVERGENCE), report)
        for row in report:
            self.stdout.write('n=%d h=%s L2=%s (%s) H1=%s (%s)' % (
                row.n, fmt(row.h), fmt(row.err_linf_l2), fmt(row.order_l2),
                fmt(row.err_l2_h1), fmt(row.order_h1),
            ))
