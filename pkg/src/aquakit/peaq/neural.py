"""Grading network: maps the model output variables to a quality grade."""

import math

import numpy as np

from ..errors import PeaqInputError
from . import tables as T
from .movs import MovVector


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def movs_to_odg(movs: MovVector) -> tuple[float, float]:
    """Distortion index and objective difference grade from the MOVs.

    The MOVs are min-max scaled (unclipped), passed through a three-node
    sigmoid layer, and combined into the distortion index; the grade is a
    sigmoid remap of the index onto the impairment scale. Raises on
    non-finite inputs.
    """
    x = movs.vector()
    if not np.all(np.isfinite(x)):
        bad = [name for name, v in movs.as_dict().items() if not math.isfinite(v)]
        raise PeaqInputError(f"non-finite model output variables: {', '.join(bad)}")
    scaled = (x - T.MOV_SCALE_MIN) / (T.MOV_SCALE_MAX - T.MOV_SCALE_MIN)
    hidden = _sigmoid(T.HIDDEN_BIAS + scaled @ T.HIDDEN_WEIGHTS)
    di = float(T.OUTPUT_BIAS + T.OUTPUT_WEIGHTS @ hidden)
    odg = T.ODG_MIN + (T.ODG_MAX - T.ODG_MIN) * float(_sigmoid(di))
    return di, odg
