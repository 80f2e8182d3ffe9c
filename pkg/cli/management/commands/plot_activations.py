from cli.base import RisklabCommand
from cli.plots import activation_context, write_svg
from core.exceptions import ConfigurationError


class Command(RisklabCommand):
    help = 'Draw the sigmoid, tanh, ELU, ReLU and SELU activation curves on [-4, 4] as SVG'
    uses_config = False

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--out', default='activations.svg', help='Destination SVG file')
        parser.add_argument('--points', type=int, default=161, help='Points per curve')

    def run(self, **options):
        if options['points'] < 2:
            raise ConfigurationError('--points must be >= 2')
        path = write_svg('cli/curves.svg', activation_context(points=options['points']), self.output_file(options['out']))
        self.stdout.write(f"Wrote {path}")
