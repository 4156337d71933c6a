import logging
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np
from pydantic import BaseModel, root_validator

from failscope.config import is_intercept_delay, is_sleep_delay
from failscope.exceptions import ConfigurationException
from failscope.vm.isa import Instruction, Opcode, Program

logger = logging.getLogger(__name__)


class DelayMechanism(str, Enum):
    TOPIC_INTERCEPT = "topic_intercept"
    SLEEP_INSERTION = "sleep_insertion"


class DelayConfig(BaseModel):
    """A timing perturbation applied to one mission run."""

    class Config:
        frozen = True

    mechanism: DelayMechanism
    delay_s: float
    """Delay in simulated seconds."""
    topic: Optional[str] = None
    """Intercepted topic.

    Notes:
        - Required if `mechanism` is `topic_intercept`.
    """
    weight: Optional[float] = None
    """Probability of inserting a sleep before each block terminator.

    Notes:
        - Required if `mechanism` is `sleep_insertion`.
    """
    rng_seed: int = 0
    """Seed of the coin flips deciding where sleeps are inserted."""

    @root_validator(skip_on_failure=True)
    def validate_config(cls, values: Dict[str, Any]) -> Dict[str, Any]:  # pylint: disable=E0213
        """Validate the configuration.

        - Interception needs a topic and a delay of 0 or a power of two from 2^-8 to 1 second.
        - Sleep insertion needs a weight in [0.1, 1.0] and a delay that is a power of two from 2^-9 to 8 seconds.
        """
        if values["mechanism"] is DelayMechanism.TOPIC_INTERCEPT:
            if not values.get("topic"):
                raise ValueError("topic must be set when mechanism is topic_intercept")
            if not is_intercept_delay(values["delay_s"]):
                raise ValueError("delay_s must be 0 or a power of two between 2^-8 and 1 for topic_intercept")
        else:
            if values.get("weight") is None:
                raise ValueError("weight must be set when mechanism is sleep_insertion")
            if not 0.1 <= values["weight"] <= 1.0:
                raise ValueError("weight must lie in [0.1, 1.0]")
            if not is_sleep_delay(values["delay_s"]):
                raise ValueError("delay_s must be a power of two between 2^-9 and 8 for sleep_insertion")
        return values

    @classmethod
    def intercept(cls, topic: str, delay_s: float) -> "DelayConfig":
        return cls(mechanism=DelayMechanism.TOPIC_INTERCEPT, topic=topic, delay_s=delay_s)

    @classmethod
    def sleeps(cls, weight: float, delay_s: float, rng_seed: int = 0) -> "DelayConfig":
        return cls(mechanism=DelayMechanism.SLEEP_INSERTION, weight=weight, delay_s=delay_s, rng_seed=rng_seed)


def insert_sleeps(program: Program, p: float, delay_s: float, seed: int) -> Program:
    """Insert `SLEEP delay_s` before block terminators, each with probability `p`.

    Blocks are visited in order and one seeded coin is flipped per block ending in JMP, BR or HALT.

    Args:
        program: The program to perturb.
        p: Probability of a sleep before each terminator.
        delay_s: Duration of every inserted sleep.
        seed: Seed of the coin flips.

    Raises:
        ConfigurationException: If `p` lies outside [0, 1] or the delay is negative.
    """
    if not 0.0 <= p <= 1.0:
        raise ConfigurationException("p must lie in [0, 1]")
    if delay_s < 0:
        raise ConfigurationException("delay_s must not be negative")
    rng = np.random.default_rng(seed)
    blocks = []
    inserted = 0
    for block in program.blocks:
        instructions = list(block.instructions)
        if instructions and instructions[-1].is_terminator and rng.random() < p:
            instructions.insert(-1, Instruction(opcode=Opcode.SLEEP, duration=delay_s))
            inserted += 1
        blocks.append(instructions)
    logger.debug("inserted %d sleeps of %s s", inserted, delay_s)
    return program.with_blocks(blocks)
