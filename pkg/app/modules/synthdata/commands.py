"""
Synthetic Data Commands
gen-data: generate cases, simulate the non-expert annotator, split and write
"""
import logging
import os

from app.shared.command_utils import command_handler, run_dir
from app.shared.run_manifest import record_artifacts
from app.shared.seeding import derive_seed
from .repository import MANIFEST_NAME, write_dataset
from .schemas import PerturbParams, SynthParams
from .services import assign_splits, generate_dataset, simulate_nonexpert

logger = logging.getLogger(__name__)

# 55 training and 20 test patients
DEFAULT_TEST_FRACTION = 20 / 75


def register_synthdata_commands(subparsers, common):
    parser = subparsers.add_parser("gen-data", parents=[common], help="Generate a synthetic dataset")
    parser.add_argument("--cases", type=int, default=40)
    parser.add_argument("--slices", type=int, default=6)
    parser.add_argument("--image-size", type=int, default=224)
    parser.add_argument("--test-cases", type=int, default=None,
                        help="patients held out for testing (default: 20/75 of --cases)")
    parser.add_argument("--artifact-density", type=float, default=0.3)
    parser.add_argument("--noise-level", type=float, default=0.3)
    parser.add_argument("--irregularity", type=float, default=0.5)
    parser.add_argument("--amplitude-px", type=float, default=3.0)
    parser.add_argument("--correlation-len", type=float, default=12.0)
    parser.add_argument("--sector-gain", type=float, default=3.0)
    parser.add_argument("--workers", type=int, default=1)
    parser.set_defaults(handler=gen_data_command)


@command_handler
def gen_data_command(args):
    """Generate, annotate, split and write a dataset"""
    seed = args.seed if args.seed is not None else 0
    params = SynthParams(
        num_cases=args.cases,
        slices_per_case=args.slices,
        image_size=args.image_size,
        shape_irregularity=args.irregularity,
        artifact_density=args.artifact_density,
        noise_level=args.noise_level,
        seed=seed,
    )
    records = generate_dataset(params, workers=args.workers)

    annotated = []
    for position, record in enumerate(records):
        case_index = position // params.slices_per_case
        perturb = PerturbParams(
            amplitude_px=args.amplitude_px,
            correlation_len_px=args.correlation_len,
            hard_sector_gain=args.sector_gain,
            sector_deg=params.boundary_blur_sector,
            seed=derive_seed(seed, 1, case_index, record.slice_index),
        )
        annotated.append(record.with_updates(nonexpert_mask=simulate_nonexpert(record.expert_mask, perturb)))

    n_test = args.test_cases if args.test_cases is not None else round(args.cases * DEFAULT_TEST_FRACTION)
    splits = assign_splits([r.case_id for r in annotated], n_test=n_test, seed=seed)

    out = run_dir(args)
    summary = write_dataset(annotated, out, splits=splits, params=params.model_dump(mode="json"))
    record_artifacts(out, "gen-data", [os.path.join(out, MANIFEST_NAME)])
    logger.info(f"[OK] Dataset ready: {summary['splits']}")
    return 0
