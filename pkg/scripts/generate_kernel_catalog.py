"""
Generate admissibility verdicts for the built-in kernel catalog.

This script checks every catalog kernel against the radial-monotone and
mass-ratio conditions and writes one report plus one mass-ratio curve per
kernel, so the documentation tables can be rebuilt without rerunning the
quadratures by hand.
"""

import logging
from pathlib import Path

import numpy as np

from nonlocal_compactness.kernels import (
    check_mass_ratio_limit,
    check_radial_monotone,
    integrable_quotient,
    make_kernel,
)
from nonlocal_compactness.reports import write_curve, write_report

DIMENSION = 2
EXPONENT = 2.0

# Catalog entries in make_kernel format (d and p are filled in below)
CATALOG = {
    "fractional_s025": {"kind": "fractional", "s": 0.25},
    "fractional_s050": {"kind": "fractional", "s": 0.5},
    "fractional_s075": {"kind": "fractional", "s": 0.75},
    "log": {"kind": "log"},
    "borderline": {"kind": "borderline"},
    "indicator": {"kind": "indicator", "support_radius": 1.0},
    "power_a2": {"kind": "power", "exponent": 2.0},
}

PROBE_RADII = np.geomspace(1e-3, 0.9, 24)


def check_catalog_kernel(name: str, entry: dict) -> dict:
    """Run both radial checks on one catalog entry."""
    kernel = make_kernel(dict(entry, d=DIMENSION, p=EXPONENT))
    monotone = check_radial_monotone(kernel, PROBE_RADII)
    limit = check_mass_ratio_limit(kernel)
    return {
        "name": name,
        "kernel": kernel.to_dict(),
        "radial_monotone": monotone.verdict,
        "mass_ratio_limit": limit.verdict,
        "fitted_log_slope": limit.fitted_log_slope,
        "integrable_quotient": integrable_quotient(kernel),
        "samples": limit.samples,
    }


def generate_catalog(output_dir: Path) -> list:
    """Check every catalog kernel and write the results."""
    entries = []
    for name, entry in CATALOG.items():
        result = check_catalog_kernel(name, entry)
        write_curve(
            output_dir,
            f"{name}_mass_ratio.csv",
            result.pop("samples"),
            ["delta", "ratio"],
        )
        entries.append(result)
    write_report(
        output_dir,
        "kernel-catalog",
        {"d": DIMENSION, "p": EXPONENT, "kernels": entries},
    )
    return entries


if __name__ == "__main__":
    logging.basicConfig(level=logging.WARNING)
    output_dir = Path(__file__).parent.parent / "docs" / "data"

    print("Checking kernel catalog...")
    entries = generate_catalog(output_dir)
    for entry in entries:
        print(
            f"  {entry['name']:<16} monotone={entry['radial_monotone']:<10}"
            f" limit={entry['mass_ratio_limit']}"
        )
    print(f"Wrote {len(entries)} kernels to {output_dir}")
