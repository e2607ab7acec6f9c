import shutil

import pytest

from tagsift.config import PipelineConfig
from tagsift.pipeline import Workspace, stage_features, stage_segment, stage_synth
from tagsift.synth import SyntheticConfig

SMALL_SEED = 11


@pytest.fixture(scope="session")
def small_config() -> PipelineConfig:
    return PipelineConfig(
        synthetic=SyntheticConfig(
            num_labels=4, dev_per_label=12, test_per_label=6, noise_rate=0.4
        )
    )


@pytest.fixture(scope="session")
def small_workspace(tmp_path_factory, small_config) -> Workspace:
    """Synthesized, segmented, featurized workspace shared read-only."""
    ws = Workspace.at(tmp_path_factory.mktemp("shared-ws"))
    stage_synth(ws, small_config, seed=SMALL_SEED)
    stage_segment(ws, small_config)
    stage_features(ws, small_config)
    return ws


@pytest.fixture
def fresh_workspace(tmp_path, small_workspace) -> Workspace:
    """Private copy of the shared workspace for tests that write into it."""
    root = tmp_path / "ws"
    shutil.copytree(small_workspace.root, root)
    return Workspace.at(root)
