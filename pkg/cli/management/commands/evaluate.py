from cli.base import RisklabCommand
from cli.reports import counts_frame, evaluation_context, evaluation_frame, write_frame, write_markdown
from cli.services import METHOD_NAMES, build_methods
from evaluation.models import DUPLICATION_CHOICES
from evaluation.services import evaluate
from sim.services import read_csv


class Command(RisklabCommand):
    help = 'Repeated random-split evaluation of GLM and NN: p_d, p_nd, p_g with 95% intervals'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--data', required=True, help='Input CSV (features then label)')
        parser.add_argument('--out-dir', help='Output directory (output.directory of the configuration)')
        parser.add_argument('--methods', nargs='+', choices=METHOD_NAMES, default=list(METHOD_NAMES),
                            help='Methods to evaluate')
        parser.add_argument('--imbalanced', action='store_true',
                            help='Use the imbalanced-data split (eval.imbalanced_*) and nn.imbalanced_hidden')
        parser.add_argument('--duplication', choices=[key for key, _ in DUPLICATION_CHOICES],
                            help='Overrides the configured duplication mode')
        parser.add_argument('--replicates', type=int, help='Overrides eval.replicates')

    def run(self, **options):
        source = self.input_file(options['data'])
        out_dir = self.output_directory(options['out_dir'])
        overrides = {}
        if options['duplication']:
            overrides['duplication'] = options['duplication']
        if options['replicates'] is not None:
            overrides['replicates'] = options['replicates']
        split = self.config.split(options['imbalanced'], **overrides)
        methods = build_methods(self.config, options['methods'], options['imbalanced'])

        report = evaluate(read_csv(source), methods, split, options['threads'])
        digits = self.config.float_digits
        write_frame(evaluation_frame(report), out_dir / 'evaluation.csv', digits)
        write_frame(counts_frame(report), out_dir / 'counts.csv', digits)
        write_markdown('cli/evaluation.md', evaluation_context(report, self.config.seed, digits),
                       out_dir / 'evaluation.md')
        for summary in report.summaries:
            self.stdout.write(
                f"{summary.method}: p_d={summary.p_d.mean:.4f} p_nd={summary.p_nd.mean:.4f} p_g={summary.p_g.mean:.4f}"
            )
