"""
Command-line entry point: ``python -m cli <command> --out DIR [--config FILE] [--seed N] [--set key=value ...]``.

Every run writes ``resolved_config.json`` (the merged config, usable as ``--config`` to replay the run) and
``run.json`` (the invocation) to the output directory. Failures print one line
``error=<ClassName> message=<text>`` on stderr and exit with the code listed in ``EXIT_CODES``.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from cli.run_config import (
    EvaluateConfig,
    GradcheckConfig,
    RegisterConfig,
    RunConfig,
    SegmentConfig,
    TrainRunConfig,
    parse_overrides,
)
from components.commands import Command
from components.errors import (
    ConfigError,
    DataError,
    DimensionMismatchError,
    FormatError,
    GradientCheckError,
    NonFiniteLossError,
)
from components.volumes import read_field, read_mask, read_mesh, read_volume, write_field
from engine.inference import save_segmentation, segment_case
from engine.manifest import load_manifest
from engine.splitting import precompute_band
from engine.training import train_amortized
from evaluation.report import CaseMetrics, aggregate, evaluate_case, write_report
from models.registrar_factory import RegistrarFactory
from models.utilities.gradient_check import run_gradcheck
from models.utilities.registration_method import RegistrationMethod
from phantoms.generator import write_dataset
from phantoms.spec import PhantomSpec
from utilities.concurrency import parallel_map
from utilities.environment import configure_logging

__all__ = [
    "EXIT_CODES",
    "COMMANDS",
    "build_parser",
    "exit_code",
    "main",
]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# First match wins, so subclasses come before their bases
EXIT_CODES: list[tuple[type[BaseException], int]] = [
    (FileNotFoundError, 3),
    (ConfigError, 4),
    (ValidationError, 4),
    (DimensionMismatchError, 5),
    (FormatError, 6),
    (DataError, 7),
    (NonFiniteLossError, 7),
    (GradientCheckError, 8),
    (ValueError, EXIT_USAGE),
]

FIELD_FILE = "field.mfld"
MESH_FILE = "mesh.obj"
MASK_FILE = "mask.mmsk"


@Command
def cmd_phantom(run: RunConfig, n_cases: int = 16, workers: int | None = None) -> None:
    """
    Generate a seeded synthetic atlas and deformed cases with ground truth, plus a dataset manifest

    :param n_cases: Number of cases to generate
    :param workers: Maximum number of generation threads
    """
    spec = run.resolve(PhantomSpec, seed_keys=("seed",))
    manifest_path = write_dataset(spec, run.out_dir, n_cases, workers)
    print(f"manifest={manifest_path}")


@Command
def cmd_train(run: RunConfig, manifest: Path, resume: Path | None = None) -> None:
    """
    Train the registration network on a dataset manifest

    :param manifest: The dataset manifest
    :param resume: A checkpoint to continue training from
    """
    config = run.resolve(TrainRunConfig, seed_keys=("net.seed", "train.seed"))
    dataset = load_manifest(manifest)
    result = train_amortized(dataset, config.net, config.train, run.out_dir, resume_from=resume)
    print(f"best={result.best_checkpoint} last={result.last_checkpoint}")


@Command
def cmd_register(
        run: RunConfig,
        case: Path,
        method: str = "network",
        checkpoint: Path | None = None,
        atlas: Path | None = None,
        atlas_mask: Path | None = None,
) -> None:
    """
    Register one patient volume and write the displacement field

    :param case: The patient volume
    :param method: network, ablation (both need a checkpoint) or direct (needs the atlas and its mask)
    :param checkpoint: The trained network
    :param atlas: The atlas volume, for direct registration
    :param atlas_mask: The atlas structure mask, for direct registration
    """
    config = run.resolve(RegisterConfig)
    patient = read_volume(case)

    direct = {}
    if atlas is not None or atlas_mask is not None:
        if atlas is None or atlas_mask is None:
            raise ValueError("Direct registration needs both --atlas and --atlas-mask")
        foreground = read_mask(atlas_mask)
        direct = dict(
            atlas=read_volume(atlas),
            foreground=foreground,
            band=precompute_band(foreground, config.dilation_radius),
            weights=config.effective_weights,
            steps=config.steps,
            lr=config.lr,
            reduction=config.reduction,
        )
    registrar = RegistrarFactory.get_registrar(method, checkpoint=checkpoint, **direct)
    field = registrar.register(patient)

    path = run.out_dir / FIELD_FILE
    write_field(field, path)
    print(f"field={path}")


@Command
def cmd_segment(run: RunConfig, field: Path, atlas_mesh: Path, atlas_mask: Path) -> None:
    """
    Carry the atlas mesh and mask into patient space with a displacement field

    :param field: The displacement field on the atlas grid
    :param atlas_mesh: The atlas surface mesh
    :param atlas_mask: The atlas structure mask
    """
    config = run.resolve(SegmentConfig)
    segmentation = segment_case(read_field(field), read_mesh(atlas_mesh), read_mask(atlas_mask), config.supersample)
    save_segmentation(segmentation, run.out_dir / MESH_FILE, run.out_dir / MASK_FILE)
    print(f"mesh={run.out_dir / MESH_FILE} mask={run.out_dir / MASK_FILE}")


def _evaluation_jobs(outputs: Path, truth: Path) -> tuple[list[dict[str, Any]], Path]:
    """
    Pair ``outputs/<method>/<case_id>/{mesh.obj,mask.mmsk[,field.mfld]}`` with the ground truth in the manifest
    """
    manifest = load_manifest(truth / "manifest.json" if truth.is_dir() else truth)
    if not outputs.is_dir():
        raise FileNotFoundError(f"No outputs directory at {outputs}")

    jobs = []
    for method_dir in sorted(path for path in outputs.iterdir() if path.is_dir()):
        method = RegistrationMethod.infer_method(method_dir.name)
        for case_dir in sorted(path for path in method_dir.iterdir() if path.is_dir()):
            try:
                record = manifest.case(case_dir.name)
            except KeyError as error:
                raise ConfigError(f"Output case '{case_dir.name}' of {method} is not in the manifest") from error
            if record.mask is None or record.mesh is None:
                raise ConfigError(f"Case '{record.case_id}' has no ground-truth mask and mesh")
            field_path = case_dir / FIELD_FILE
            jobs.append(dict(
                case_id=record.case_id,
                method=method,
                output_mesh=case_dir / MESH_FILE,
                output_mask=case_dir / MASK_FILE,
                truth_mesh=record.mesh,
                truth_mask=record.mask,
                field=field_path if field_path.is_file() else None,
            ))
    if not jobs:
        raise ValueError(f"No method/case directories under {outputs}")
    return jobs, manifest.atlas.mask


@Command
def cmd_evaluate(run: RunConfig, outputs: Path, truth: Path) -> None:
    """
    Score segmentation outputs against ground truth and write per-case metrics, summaries and box-plot data

    :param outputs: Directory laid out as <method>/<case_id>/ with mesh.obj, mask.mmsk and optionally field.mfld
    :param truth: The ground-truth dataset manifest, or the directory holding manifest.json
    """
    config = run.resolve(EvaluateConfig)
    jobs, atlas_mask_path = _evaluation_jobs(outputs, truth)
    atlas_mask = read_mask(atlas_mask_path)

    def evaluate(job: dict[str, Any]) -> CaseMetrics:
        return evaluate_case(
            job["case_id"],
            job["method"],
            read_mesh(job["output_mesh"]),
            read_mask(job["output_mask"]),
            read_mesh(job["truth_mesh"]),
            read_mask(job["truth_mask"]),
            atlas_mask=atlas_mask,
            field=read_field(job["field"]) if job["field"] is not None else None,
            samples_per_triangle=config.samples_per_triangle,
        )

    rows = parallel_map(evaluate, jobs, config.workers)
    report = aggregate(rows, config.wilcoxon_mode)
    csv_path, json_path = write_report(rows, report, run.out_dir)
    print(f"metrics={csv_path} summary={json_path}")


@Command
def cmd_gradcheck(run: RunConfig, scope: str | None = None) -> None:
    """
    Compare analytic gradients with central finite differences

    :param scope: losses, layers or end-to-end; overrides the config file when given
    """
    config = run.resolve(GradcheckConfig, seed_keys=("seed",), flags=dict(scope=scope))
    report = run_gradcheck(config.scope, config.seed)
    (run.out_dir / "gradcheck.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
    print(report.summary())
    report.raise_for_failure()


COMMANDS: dict[str, Command] = {
    command.name: command
    for command in (cmd_phantom, cmd_train, cmd_register, cmd_segment, cmd_evaluate, cmd_gradcheck)
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", dest="out_dir", type=Path, required=True, help="Output directory")
    common.add_argument("--config", type=Path, default=None, help="JSON config file")
    common.add_argument("--seed", type=int, default=None, help="Master seed")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="Config override with a dotted key and a JSON value; repeatable",
    )

    parser = argparse.ArgumentParser(prog="atlasreg", description="Atlas-based registration and segmentation")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS.values():
        command.add_parser(subparsers, parents=[common])
    return parser


def exit_code(error: BaseException) -> int:
    for error_type, code in EXIT_CODES:
        if isinstance(error, error_type):
            return code
    return EXIT_FAILURE


def _report(error_name: str, message: str) -> None:
    print(f"error={error_name} message={' '.join(message.split())}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    configure_logging()
    parser = build_parser()
    try:
        namespace = parser.parse_args(argv)
    except SystemExit as exit_:
        code = exit_.code if isinstance(exit_.code, int) else EXIT_USAGE
        if code != EXIT_OK:
            _report("UsageError", "Invalid command-line arguments")
        return code

    command = COMMANDS[namespace.command]
    try:
        arguments = command.arguments_from(namespace)
        run = RunConfig(
            command=command.name,
            config=namespace.config,
            overrides=parse_overrides(namespace.overrides),
            out_dir=namespace.out_dir,
            seed=namespace.seed,
            arguments=arguments,
        )
        command(run, **arguments)
    except Exception as error:
        logger.debug("%s failed", command.name, exc_info=True)
        _report(type(error).__name__, str(error))
        return exit_code(error)
    return EXIT_OK
