from dataclasses import asdict

import pandas as pd

from cli.base import RisklabCommand
from cli.reports import coefficient_context, coefficient_frame, write_frame, write_markdown
from cli.services import holdout_split, save_model
from glm.models import PENALTY_CHOICES, PenaltySpec
from glm.serializers import FIT_ON_CHOICES
from glm.services import fit_logistic, odds_ratio_table
from sim.services import read_csv, write_csv


class Command(RisklabCommand):
    help = 'Fit a logistic regression (optionally ridge or lasso) to a CSV dataset'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--data', required=True, help='Input CSV (features then label)')
        parser.add_argument('--out-dir', help='Output directory (output.directory of the configuration)')
        parser.add_argument('--penalty', choices=[key for key, _ in PENALTY_CHOICES], help='Overrides glm.penalty')
        parser.add_argument('--lam', type=float, help='Overrides glm.lam')
        parser.add_argument('--fit-on', choices=[key for key, _ in FIT_ON_CHOICES], help='Overrides glm.fit_on')

    def run(self, **options):
        source = self.input_file(options['data'])
        out_dir = self.output_directory(options['out_dir'])
        glm = self.config.section('glm')
        penalty = PenaltySpec(options['penalty'] or glm['penalty'], glm['lam'] if options['lam'] is None else options['lam'])
        fit_on = options['fit_on'] or glm['fit_on']
        digits = self.config.float_digits

        data = read_csv(source)
        if fit_on == 'train':
            data, holdout = holdout_split(data, glm['train_fraction'], self.config.seed)
            write_csv(holdout, out_dir / 'holdout.csv')

        fit = fit_logistic(data, penalty, tol=glm['tol'], max_iter=glm['max_iter'])
        save_model(fit, out_dir / 'glm_fit.yaml')
        write_frame(coefficient_frame(fit), out_dir / 'coefficients.csv', digits)
        write_markdown('cli/coefficients.md', coefficient_context(fit, self.config.seed, digits, fit_on),
                       out_dir / 'coefficients.md')
        if fit.inference_available:
            rows = [asdict(row) for row in odds_ratio_table(fit)]
            write_frame(pd.DataFrame(rows), out_dir / 'odds_ratios.csv', digits)

        for warning in fit.warnings:
            self.stderr.write(f"warning: {warning}")
        self.stdout.write(
            f"GLM ({penalty}) on {fit.n_obs} rows: deviance {fit.deviance:.4f}, "
            f"{fit.iterations} iterations -> {out_dir}"
        )
