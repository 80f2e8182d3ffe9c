import pandas as pd

from cli.base import RisklabCommand
from cli.reports import write_frame
from cli.services import holdout_split, save_model
from glm.serializers import FIT_ON_CHOICES
from nn.services import accuracy, train
from sim.services import read_csv, write_csv


class Command(RisklabCommand):
    help = 'Train the feedforward classifier on a CSV dataset'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--data', required=True, help='Input CSV (features then label)')
        parser.add_argument('--out-dir', help='Output directory (output.directory of the configuration)')
        parser.add_argument('--fit-on', choices=[key for key, _ in FIT_ON_CHOICES], default='train',
                            help='Train on a seeded split of eval.train_fraction, or on every row')
        parser.add_argument('--imbalanced-architecture', action='store_true',
                            help='Use nn.imbalanced_hidden instead of nn.hidden')

    def run(self, **options):
        source = self.input_file(options['data'])
        out_dir = self.output_directory(options['out_dir'])
        data = read_csv(source)
        holdout = None
        if options['fit_on'] == 'train':
            data, holdout = holdout_split(data, self.config.section('eval')['train_fraction'], self.config.seed)
            write_csv(holdout, out_dir / 'holdout.csv')

        model = train(data, self.config.architecture(options['imbalanced_architecture']), self.config.train_config())
        save_model(model, out_dir / 'nn_model.yaml')
        history = pd.DataFrame({'epoch': range(len(model.history)), 'loss': model.history})
        write_frame(history, out_dir / 'loss_history.csv', self.config.float_digits + 2)

        summary = f"NN {model.layer_sizes} {model.activation.label()}: loss {model.history[0]:.4f} -> {model.history[-1]:.4f}"
        if holdout is not None:
            summary += f", holdout accuracy {accuracy(model, holdout):.4f}"
        self.stdout.write(f"{summary} -> {out_dir}")
