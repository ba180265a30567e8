"""
Train the contour expansion regressor.

Run with: python manage.py train --loss obgml --steps 2000 --seed 1 --out-dir runs/obgml
Pass --checkpoint to resume from a saved checkpoint.
"""

from deformation.services.checkpoint import load_checkpoint, save_checkpoint
from deformation.services.training import build_examples, mean_vertex_error, train

from cli.services.artifacts import load_scenes, loss_curve_records, write_json, write_jsonl

from ._base import DkeCommand

CHECKPOINT_FILE = 'checkpoint.json'
CURVE_FILE = 'loss_curve.jsonl'
SEG_CURVE_FILE = 'seg_loss_curve.jsonl'
REPORT_FILE = 'train_report.json'


class Command(DkeCommand):
    help = 'Train the expansion regressor; writes a checkpoint and the loss curve'
    command_name = 'train'

    def add_command_arguments(self, parser):
        parser.add_argument('--steps', type=int, help='Training steps')
        parser.add_argument('--lr', type=float, help='Initial learning rate')
        parser.add_argument('--batch-size', type=int, help='Instances per step')
        parser.add_argument('--lambda-reg', type=float, help='Weight of the contour loss in the joint objective')
        parser.add_argument('--train-segmenter', action='store_true', default=None,
                            help='Also train the surrogate segmenter (joint objective)')
        parser.add_argument('--checkpoint-every', type=int, help='Save an intermediate checkpoint every k steps')
        parser.add_argument('--log-every', type=int, help='Log the smoothed loss every k steps')
        parser.add_argument('--checkpoint', type=str, help='Resume from this checkpoint')
        parser.add_argument('--scenes', type=int, help='Scenes to generate when no dataset is given')
        parser.add_argument('--kernel-noise', type=float, help='Vertex jitter (px) of generated kernel maps')

    def run(self, cfg, out_dir, **options):
        train_cfg = cfg.train_config()
        scenes = load_scenes(cfg)

        state = None
        if cfg.checkpoint:
            state, _ = load_checkpoint(cfg.checkpoint)
            self.stdout.write(f'Resuming from {cfg.checkpoint} at step {state.step}')

        def on_checkpoint(st, report):
            path = save_checkpoint(out_dir / 'checkpoints' / f'step_{st.step:06d}.json', st, train_cfg)
            self.stdout.write(f'Saved {path}')

        state, report = train(scenes, train_cfg, state=state, on_checkpoint=on_checkpoint)
        save_checkpoint(out_dir / CHECKPOINT_FILE, state, train_cfg)
        write_jsonl(out_dir / CURVE_FILE, loss_curve_records(report.history, report.start_step))
        if report.seg_history:
            write_jsonl(out_dir / SEG_CURVE_FILE, loss_curve_records(report.seg_history, report.start_step))

        error = mean_vertex_error(state.net, build_examples(scenes, train_cfg))
        write_json(out_dir / REPORT_FILE, {
            'loss_kind': train_cfg.loss_kind,
            'start_step': report.start_step,
            'steps': report.steps,
            'final_step': state.step,
            'final_loss': report.final_loss,
            'mean_vertex_error': error,
        })
        final = f'{report.final_loss:.4f}' if report.final_loss is not None else 'n/a'
        self.stdout.write(self.style.SUCCESS(
            f'Trained {train_cfg.loss_kind} for {report.steps} steps: final loss {final}, '
            f'mean vertex error {error:.3f} px -> {out_dir / CHECKPOINT_FILE}'
        ))
