from cli.base import RisklabCommand
from cli.reports import (
    coefficient_context,
    coefficient_frame,
    counts_frame,
    evaluation_context,
    evaluation_frame,
    imbalance_context,
    imbalance_frame,
    permutation_context,
    permutation_frame,
    write_frame,
    write_markdown,
)
from cli.services import build_methods, holdout_split
from evaluation.services import evaluate
from glm.services import fit_logistic
from interpret.services import permutation_importance
from nn.services import train
from sim.services import simulate, simulate_imbalanced, write_csv

QUICK_REPLICATES = 10


class Command(RisklabCommand):
    help = (
        'Reproduce the study tables on simulated data: prediction (table1), GLM weights (table2), '
        'permutation importance (table3) and class duplication on imbalanced data (imbalance)'
    )

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--out-dir', help='Output directory (output.directory of the configuration)')
        parser.add_argument('--quick', action='store_true',
                            help=f'Use {QUICK_REPLICATES} replicates and permutations instead of the configured counts')

    def run(self, **options):
        out_dir = self.output_directory(options['out_dir'])
        config = self.config
        seed, digits, threads = config.seed, config.float_digits, options['threads']
        replicates = QUICK_REPLICATES if options['quick'] else config.section('eval')['replicates']
        permutations = QUICK_REPLICATES if options['quick'] else config.section('interpret')['permutations']
        written = []

        with self.in_stage('simulate'):
            data = simulate(config.sim_config())
            written.append(write_csv(data, out_dir / 'simulated.csv'))

        with self.in_stage('table1'):
            report = evaluate(data, build_methods(config), config.split(replicates=replicates), threads)
            written.append(write_frame(evaluation_frame(report), out_dir / 'table1.csv', digits))
            written.append(write_frame(counts_frame(report), out_dir / 'table1_counts.csv', digits))
            written.append(write_markdown('cli/evaluation.md', evaluation_context(report, seed, digits),
                                          out_dir / 'table1.md'))

        with self.in_stage('table2'):
            glm = config.section('glm')
            sample = data
            if glm['fit_on'] == 'train':
                sample, _ = holdout_split(data, glm['train_fraction'], seed)
            fit = fit_logistic(sample, config.penalty(), tol=glm['tol'], max_iter=glm['max_iter'])
            written.append(write_frame(coefficient_frame(fit), out_dir / 'table2.csv', digits))
            written.append(write_markdown('cli/coefficients.md', coefficient_context(fit, seed, digits, glm['fit_on']),
                                          out_dir / 'table2.md'))

        with self.in_stage('table3'):
            train_part, test_part = holdout_split(data, config.section('eval')['train_fraction'], seed)
            model = train(train_part, config.architecture(), config.train_config())
            importance = permutation_importance(
                model, test_part,
                metric=config.section('interpret')['metric'],
                n_repeats=permutations,
                seed=seed,
                threshold=config.section('eval')['threshold'],
                threads=threads,
            )
            written.append(write_frame(permutation_frame(importance), out_dir / 'table3.csv', digits))
            written.append(write_markdown('cli/permutation.md', permutation_context(importance, seed, digits),
                                          out_dir / 'table3.md'))

        with self.in_stage('imbalance'):
            imbalanced = simulate_imbalanced(config.sim_config(imbalanced=True), config.target_positive_rate)
            methods = build_methods(config, imbalanced=True)
            settings = list(dict.fromkeys(['off', config.section('eval')['imbalanced_duplication']]))
            reports = {
                setting: evaluate(
                    imbalanced, methods,
                    config.split(imbalanced=True, duplication=setting, replicates=replicates),
                    threads,
                )
                for setting in settings
            }
            written.append(write_frame(imbalance_frame(reports), out_dir / 'imbalance.csv', digits))
            written.append(write_markdown(
                'cli/imbalance.md',
                imbalance_context(reports, seed, imbalanced.positive_rate, imbalanced.n_rows, digits),
                out_dir / 'imbalance.md',
            ))

        for path in written:
            self.stdout.write(f"Wrote {path}")
