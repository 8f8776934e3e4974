from __future__ import annotations

from typing import TYPE_CHECKING
from typing import Any

from tcintensity.core.commands import IntensityCommand
from tcintensity.core.outputs import atomic_write_text
from tcintensity.core.outputs import write_manifest
from tcintensity.intensity.bundle import save_bundle
from tcintensity.intensity.fitting import FIT_KINDS
from tcintensity.intensity.fitting import FitOptions
from tcintensity.intensity.fitting import fit_dataset
from tcintensity.storms.ingest import IngestConfig
from tcintensity.storms.ingest import load_dataset

if TYPE_CHECKING:
    from argparse import ArgumentParser

    from tcintensity.core.runconfig import RunConfig


def model_filename(kind: str) -> str:
    return f"model_{kind}.json"


def report_filename(kind: str) -> str:
    return f"report_{kind}.txt"


class Command(IntensityCommand):
    help = "Fit an OLS, FMR, MeHiM or land decay model to a tracks CSV"

    def add_command_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("kind", choices=FIT_KINDS, help="Model to fit")
        parser.add_argument("--tracks", type=str, default=None, help="Tracks CSV")
        parser.add_argument("--k", type=int, default=None, help="Number of groups or states (default: 3)")
        parser.add_argument("--restarts", type=int, default=None, help="EM restarts")
        parser.add_argument("--covariate-set", choices=["full", "no_ocn"], default=None)
        parser.add_argument("--bg-fraction", type=float, default=None, help="Background wind fraction")
        parser.add_argument("--min-seq-len", type=int, default=None, help="Minimum responses per ocean sequence")
        parser.add_argument("--workers", type=int, default=None, help="Threads for restarts")
        parser.add_argument(
            "--no-fmr-init",
            dest="init_from_fmr",
            action="store_const",
            const=False,
            default=None,
            help="Seed MeHiM restarts from |dv| quantiles instead of an FMR fit",
        )

    def run(self, config: RunConfig, /, **options: Any) -> None:
        kind = options["kind"]
        config.require("tracks")
        ingest_config = IngestConfig.from_settings(
            bg_fraction=config.bg_fraction,
            min_ocean_len=config.min_seq_len,
            covariate_set=config.covariate_set,
        )
        dataset = load_dataset(config.tracks, ingest_config)
        self.progress(
            "Loaded {n_storms} storms: {n_sequences} ocean sequences, {n_observations} observations, "
            "{n_land_segments} land segments".format(**dataset.counts),
        )
        fit_options = FitOptions.from_settings(
            k=config.k,
            restarts=config.restarts,
            tol=config.tol,
            mnl_tol=config.mnl_tol,
            ridge=config.ridge,
            sigma_floor=config.sigma_floor,
            seed=config.seed,
            workers=config.workers,
            init_from_fmr=config.init_from_fmr,
        )
        result = fit_dataset(dataset, kind, fit_options)

        config.out.mkdir(parents=True, exist_ok=True)
        model_path = config.out / model_filename(kind)
        digest = save_bundle(model_path, result.bundle)
        atomic_write_text(config.out / report_filename(kind), result.report)
        write_manifest(
            config.out,
            command=f"fit {kind}",
            config=config.echo(),
            files=[model_filename(kind), report_filename(kind)],
            model_hashes={"model": digest},
            seeds={"master_seed": config.seed},
            extra={"model_id": result.bundle.model_id},
        )
        self.progress(result.report)
        self.success(f"Wrote {result.bundle.model_id} to {model_path}")
