import dataclasses
from typing import Tuple

import numpy as np

from rshelab.cache import resizeable_lru_cache
from rshelab.errors import ConfigError

_MASK64 = (1 << 64) - 1

# Counter word 1 separates the purposes below; word 0 is left to the generator.
NOISE_PURPOSE = 0
INITIAL_PURPOSE = 1
PROBE_PURPOSE = 2


@resizeable_lru_cache()
def _philox_key(master_seed: int) -> Tuple[int, int]:
    state = np.random.SeedSequence(master_seed).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


@dataclasses.dataclass(frozen=True)
class NoiseStream:
    """Random numbers for one trajectory, addressable by step."""

    master_seed: int
    trajectory: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.master_seed <= _MASK64:
            raise ConfigError(
                f"noise.seed must be an unsigned 64-bit integer, got {self.master_seed}"
            )
        if self.trajectory < 0:
            raise ValueError(f"trajectory index must be >= 0, got {self.trajectory}")

    def _generator(self, purpose: int, step: int) -> np.random.Generator:
        if step < 0:
            raise ValueError(f"step index must be >= 0, got {step}")
        counter = np.array([0, purpose, step, self.trajectory], dtype=np.uint64)
        key = np.array(_philox_key(self.master_seed), dtype=np.uint64)
        return np.random.Generator(np.random.Philox(counter=counter, key=key))

    def for_step(self, step: int) -> np.random.Generator:
        """Generator for the noise of time step ``step``."""
        return self._generator(NOISE_PURPOSE, step)

    def for_initial(self, index: int = 0) -> np.random.Generator:
        return self._generator(INITIAL_PURPOSE, index)

    def for_probe(self, index: int = 0) -> np.random.Generator:
        return self._generator(PROBE_PURPOSE, index)

    def child(self, trajectory: int) -> "NoiseStream":
        return NoiseStream(self.master_seed, trajectory)
