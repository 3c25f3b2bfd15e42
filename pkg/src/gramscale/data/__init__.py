"""Bundled interaction-matrix fixtures for a four-loop heat-exchanger network."""
from importlib import resources

from ..interaction import InteractionMatrix, Measure

_FILES = {Measure.PM: "hen_pm", Measure.HIIA: "hen_hiia", Measure.SIGMA2: "hen_sigma2"}


def hen_im_path(measure):
    return resources.files(__name__) / f"{_FILES[Measure.parse(measure)]}.csv"


def hen_im(measure) -> InteractionMatrix:
    """Unscaled HEN interaction matrix (outputs T1..T4, inputs U1..U4)."""
    with resources.as_file(hen_im_path(measure)) as path:
        return InteractionMatrix.load(path)
