from cli.base import RisklabCommand
from sim.services import simulate, simulate_imbalanced, write_csv


class Command(RisklabCommand):
    help = 'Simulate the logistic risk-factor dataset and write it as CSV'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--out', required=True, help='Destination CSV file')
        parser.add_argument(
            '--imbalanced', action='store_true',
            help='Tune the intercept to the configured target positive rate (sim.target_positive_rate, sim.imbalanced_n rows)',
        )

    def run(self, **options):
        out = self.output_file(options['out'])
        if options['imbalanced']:
            data = simulate_imbalanced(self.config.sim_config(imbalanced=True), self.config.target_positive_rate)
        else:
            data = simulate(self.config.sim_config())
        write_csv(data, out)
        self.stdout.write(
            f"n={data.n_rows} d={data.n_features} positive_rate={data.positive_rate:.4f} "
            f"intercept={data.provenance['intercept']:.4f} -> {out}"
        )
