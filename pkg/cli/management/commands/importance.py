import numpy as np

from cli.base import RisklabCommand
from cli.plots import bar_chart_context, lek_context, write_svg
from cli.reports import (
    importance_context,
    importance_frame,
    lek_frame,
    permutation_context,
    permutation_frame,
    write_frame,
    write_markdown,
)
from cli.services import check_schema, load_model
from core.exceptions import SchemaError, UnsupportedArchitectureError, UnsupportedFeatureError
from evaluation.models import METRIC_CHOICES
from interpret.models import METHOD_CHOICES, ImportanceReport
from interpret.services import garson, lek_profile, lime_explain, permutation_importance, shapley
from sim.services import read_csv


def parse_groups(value):
    """'X1+X2,Z1' -> [['X1', 'X2'], ['Z1']]"""
    if not value:
        return None
    return [[name.strip() for name in group.split('+') if name.strip()] for group in value.split(',') if group.strip()]


class Command(RisklabCommand):
    help = 'Feature importance of a fitted model: permutation, garson, lek, shapley or lime'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--model', required=True, help='glm-fit or nn-model document')
        parser.add_argument('--data', required=True, help='CSV the method is evaluated on (the test set for permutation)')
        parser.add_argument('--method', required=True, choices=[key for key, _ in METHOD_CHOICES],
                            help='Attribution method')
        parser.add_argument('--out-dir', help='Output directory (output.directory of the configuration)')
        parser.add_argument('--metric', choices=[key for key, _ in METRIC_CHOICES], help='Overrides interpret.metric')
        parser.add_argument('--permutations', type=int, help='Overrides interpret.permutations')
        parser.add_argument('--groups', help="Permute feature groups jointly, e.g. 'X1+X2,Z1+Z2+Z3'")
        parser.add_argument('--feature', action='append',
                            help='Feature to profile (lek, repeatable; every continuous feature when omitted)')
        parser.add_argument('--instance', type=int,
                            help='Row explained by lime (the row with the highest predicted risk when omitted)')

    def run(self, **options):
        model_path = self.input_file(options['model'])
        data_path = self.input_file(options['data'])
        out_dir = self.output_directory(options['out_dir'])
        model = load_model(model_path)
        data = read_csv(data_path)
        check_schema(model, data)

        self.settings = self.config.section('interpret')
        self.digits = self.config.float_digits
        method = options['method']
        stem = out_dir / f'importance_{method}'

        if method == 'permutation':
            report = self._permutation(model, data, options)
            write_frame(permutation_frame(report), stem.with_suffix('.csv'), self.digits)
            write_markdown('cli/permutation.md', permutation_context(report, self.config.seed, self.digits),
                           stem.with_suffix('.md'))
        else:
            report = getattr(self, f'_{method}')(model, data, options, out_dir)
            write_frame(importance_frame(report), stem.with_suffix('.csv'), self.digits)
            write_markdown('cli/importance.md', importance_context(report, self.config.seed, self.digits),
                           stem.with_suffix('.md'))
        write_svg('cli/bar_chart.svg', bar_chart_context(report), stem.with_suffix('.svg'))

        for name in report.ranking():
            self.stdout.write(f"{name}: {report.score_of(name):.{self.digits}f}")

    def _permutation(self, model, data, options):
        permutations = options['permutations'] or self.settings['permutations']
        return permutation_importance(
            model, data,
            metric=options['metric'] or self.settings['metric'],
            n_repeats=permutations,
            seed=self.config.seed,
            threshold=self.config.section('eval')['threshold'],
            groups=parse_groups(options['groups']),
            threads=options['threads'],
        )

    def _garson(self, model, data, options, out_dir):
        if not hasattr(model, 'layer_sizes'):
            raise UnsupportedArchitectureError("Garson's algorithm needs a neural network model, not a GLM fit")
        return garson(model)

    def _lek(self, model, data, options, out_dir):
        features = options['feature'] or [column.name for column in data.columns if not column.is_categorical]
        if not features:
            raise UnsupportedFeatureError("Lek's profile needs at least one continuous feature")
        profiles = [
            lek_profile(model, data, feature, self.settings['lek_grid'], self.settings['lek_quantiles'])
            for feature in features
        ]
        write_frame(lek_frame(profiles), out_dir / 'lek_profiles.csv', self.digits)
        for profile in profiles:
            write_svg('cli/curves.svg', lek_context(profile), out_dir / f'lek_{profile.feature}.svg')
        return ImportanceReport(
            method='lek',
            feature_names=[profile.feature for profile in profiles],
            scores=[float(np.mean(np.abs(profile.derivatives))) for profile in profiles],
            notes=('score: mean absolute derivative of P(diseased) over the grid and quantile levels',),
        )

    def _shapley(self, model, data, options, out_dir):
        return shapley(
            model, data,
            mc_samples=self.settings['shapley_samples'],
            seed=self.config.seed,
            outer_rows=self.settings['shapley_rows'],
            threads=options['threads'],
        )

    def _lime(self, model, data, options, out_dir):
        row = options['instance']
        if row is None:
            row = int(np.argmax(model.predict(data.values)))
        if not 0 <= row < data.n_rows:
            raise SchemaError(f"instance row {row} is outside 0..{data.n_rows - 1}")
        explanation = lime_explain(
            model, data.values[row], data,
            n_features=self.settings['lime_features'],
            n_perturb=self.settings['lime_samples'],
            kernel_width=self.settings['lime_kernel_width'],
            seed=self.config.seed,
            selection=self.settings['lime_selection'],
        )
        report = explanation.as_report()
        report.extras['instance_row'] = row
        return report
