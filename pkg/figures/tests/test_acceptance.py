"""Secondary acceptance: every recipe renders from real run outputs and is
pixel-stable across re-runs."""

import hashlib
from pathlib import Path

from burstfigs import render

RECIPE_INPUT = {
    "fig1b": "trace_dir",
    "fig2": "scan_n_dir",
    "fig3": "scan_area_dir",
    "fig4": "scan_area_dir",
}


def test_criterion_11_recipes_render_and_are_stable(
    trace_dir, scan_n_dir, scan_area_dir, tmp_path
):
    dirs = {
        "trace_dir": trace_dir,
        "scan_n_dir": scan_n_dir,
        "scan_area_dir": scan_area_dir,
    }
    for recipe, key in RECIPE_INPUT.items():
        first = render(recipe, dirs[key], tmp_path / f"{recipe}_a.png")
        second = render(recipe, dirs[key], tmp_path / f"{recipe}_b.png")
        ha = hashlib.sha256(Path(first).read_bytes()).hexdigest()
        hb = hashlib.sha256(Path(second).read_bytes()).hexdigest()
        assert ha == hb, f"{recipe} not pixel-stable"
        assert Path(first).stat().st_size > 1000
    print("\nACCEPTANCE 11: PASS - fig1b/fig2/fig3/fig4 render and re-render "
          "pixel-identically")
