import enum
from typing import Optional

from core.domain import Matching, ProblemInstance
from core.exceptions import InvalidInputError

from .da import run_constrained_da, run_da
from .tcdm import run_tcdm


class Mechanism(enum.Enum):
    TCDM = 'tcdm'
    DA = 'da'
    CDA = 'cda'


def run_mechanism(mechanism: Mechanism, instance: ProblemInstance, rounds: Optional[int] = None) -> Matching:
    """
    Final matching of `mechanism` on `instance`.

    `rounds` is the TCDM round budget (None runs to convergence) or the
    list-length cap for constrained DA. Plain DA ignores it.
    """
    mechanism = Mechanism(mechanism)
    if mechanism is Mechanism.DA:
        return run_da(instance)
    if mechanism is Mechanism.CDA:
        if rounds is None:
            raise InvalidInputError("Constrained DA needs a list-length cap")
        return run_constrained_da(instance, rounds)
    return run_tcdm(instance, rounds).final
