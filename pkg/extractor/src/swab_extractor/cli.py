"""swab-extract: turn encoder outputs into swab bundle directories.

Subcommands: text (class names, classifiers, captions, synonyms), images
(accuracies + gap tables + raw image exports), all. --fixtures forces the
deterministic hash encoders regardless of what the spec names, which is how
CI exercises the contract without model downloads.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .extract import extract_image_statistics, extract_text_assets
from .spec import ExtractionError, ExtractionSpec


def _fixture_override(spec: ExtractionSpec, dim_phi: int, dim_vlm: int) -> ExtractionSpec:
    def fix(identifier: str, dim: int) -> str:
        if identifier.startswith("fixture:"):
            return identifier
        name = identifier.split(":", 1)[-1].replace("/", "-")
        return f"fixture:{name}:{dim}"

    return dataclasses.replace(
        spec,
        phi_encoder=fix(spec.phi_encoder, dim_phi),
        vlm_encoders={m: fix(e, dim_vlm) for m, e in spec.vlm_encoders.items()},
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="swab-extract", description=__doc__)
    parser.add_argument("command", choices=("text", "images", "all"))
    parser.add_argument("--spec", required=True, help="ExtractionSpec JSON file")
    parser.add_argument("--out", default=None, help="override the spec's output_dir")
    parser.add_argument("--fixtures", action="store_true",
                        help="replace every encoder with its deterministic fixture")
    parser.add_argument("--fixture-dim-phi", type=int, default=32)
    parser.add_argument("--fixture-dim-vlm", type=int, default=24)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    try:
        spec = ExtractionSpec.from_file(args.spec)
        if args.out:
            from pathlib import Path

            spec = dataclasses.replace(spec, output_dir=Path(args.out).resolve())
        if args.fixtures:
            spec = _fixture_override(spec, args.fixture_dim_phi, args.fixture_dim_vlm)
        if args.command in ("text", "all"):
            extract_text_assets(spec)
        if args.command in ("images", "all"):
            extract_image_statistics(spec)
        print(f"bundle: {spec.output_dir}")
        return 0
    except ExtractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
