import math
from typing import Any, Dict, Mapping, Tuple

import numpy as np

from rshelab.types import FloatArray


def flatten_dot_names(data: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Flatten nested mappings into a single mapping keyed by dot names."""
    out: Dict[str, Any] = {}
    for k, v in data.items():
        name = f"{prefix}.{k}" if prefix else str(k)
        if isinstance(v, Mapping):
            out.update(flatten_dot_names(v, name))
        else:
            out[name] = v
    return out


def mean_and_se(samples: FloatArray) -> Tuple[float, float]:
    """Sample mean and its standard error (zero for a single sample)."""
    samples = np.asarray(samples, dtype=np.float64)
    mean = float(np.mean(samples))
    if samples.size < 2:
        return mean, 0.0
    return mean, float(np.std(samples, ddof=1) / math.sqrt(samples.size))
