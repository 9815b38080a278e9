from __future__ import annotations

from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pytest

from blowzoom.geometry import standard_box
from blowzoom.measures import AtomicMeasure, discretize_lebesgue
from blowzoom.settings import AppConfig, LPConfig, Paths, Settings

# --------------------------- temp repo layout ---------------------------


@pytest.fixture
def tmp_repo(tmp_path: Path) -> Path:
    (tmp_path / "config").mkdir(parents=True, exist_ok=True)
    (tmp_path / "output").mkdir(parents=True, exist_ok=True)
    (tmp_path / "logs").mkdir(parents=True, exist_ok=True)
    (tmp_path / "config" / "app.yaml").write_text(
        "log_level: ERROR\nwindow_level: 3\nworkers: 1\n", encoding="utf-8"
    )
    return tmp_path


# --------------------------- Settings factory ---------------------------


@pytest.fixture
def settings_factory(
    tmp_repo: Path, monkeypatch: pytest.MonkeyPatch
) -> Callable[..., Settings]:
    """Build Settings rooted at tmp_repo without reading real YAML/.env."""
    monkeypatch.setenv("BLOWZOOM_ROOT", str(tmp_repo))

    def _build(
        window_level: int = 3,
        workers: Optional[int] = 1,
        log_level: str = "ERROR",
        max_atoms: int = 4000,
    ) -> Settings:
        paths = Paths(
            root=tmp_repo,
            config_dir=tmp_repo / "config",
            output_dir=tmp_repo / "output",
            logs_dir=tmp_repo / "logs",
        )
        app = AppConfig(
            log_level=log_level,
            window_level=window_level,
            workers=workers,
            lp=LPConfig(max_atoms=max_atoms),
        )
        return Settings(paths=paths, app=app)

    return _build


# --------------------------- environment hardening ---------------------------


@pytest.fixture(autouse=True)
def clean_env(monkeypatch: pytest.MonkeyPatch):
    """Tests never inherit pool sizes or roots from the developer shell."""
    for var in ("BLOWZOOM_WORKERS", "BLOWZOOM_ROOT", "BLOWZOOM_CONFIG_DIR"):
        monkeypatch.delenv(var, raising=False)


# --------------------------- canonical measures ---------------------------


@pytest.fixture
def delta0() -> AtomicMeasure:
    return AtomicMeasure.point_mass([0.0])


@pytest.fixture
def delta0_2d() -> AtomicMeasure:
    return AtomicMeasure.point_mass([0.0, 0.0])


@pytest.fixture
def lebesgue_i3() -> AtomicMeasure:
    """Discretized Lebesgue on I_3 = [-13.5, 13.5), 27 atoms per unit."""
    return discretize_lebesgue(standard_box(3, 1), 1.0 / 27.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
