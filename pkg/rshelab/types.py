from typing import Dict, List, Union

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

# Values accepted in a run configuration after parsing.
ConfigScalar = Union[int, float, bool, str]
ConfigValue = Union[ConfigScalar, List[ConfigScalar]]
ConfigMapping = Dict[str, ConfigValue]

