"""
Communication Time Model
Matchings communicate sequentially; one round with n active matchings costs t_link * n**gamma
"""

from dataclasses import dataclass
from typing import Any, Dict

from matcha_sim.utils.errors import InvalidParameter


@dataclass(frozen=True)
class CommTimeModel:
    """
    Per-iteration time accounting

    @class CommTimeModel
    @property {float} t_link - Time for one matching round (all its links in parallel)
    @property {float} t_comp - Time for one local SGD step
    @property {float} delay_exponent - gamma in t(n) = n**gamma; 1.0 is the linear rule
    """
    t_link: float = 1.0
    t_comp: float = 0.0
    delay_exponent: float = 1.0

    def __post_init__(self):
        if self.t_link < 0 or self.t_comp < 0:
            raise InvalidParameter("t_link and t_comp must be >= 0")
        if self.delay_exponent <= 0:
            raise InvalidParameter("delay_exponent must be > 0")

    def delay(self, active_matchings: float) -> float:
        """t(n) in units of t_link"""
        return float(active_matchings) ** self.delay_exponent

    def round_time(self, active_matchings: int) -> float:
        return self.t_link * self.delay(active_matchings)

    def iteration_time(self, active_matchings: int) -> float:
        return self.t_comp + self.round_time(active_matchings)

    def budget_cap(self, budget: float, matchings: int) -> float:
        """
        Largest sum of activation probabilities allowed by t(sum p) <= C_b * t(M)

        @param {float} budget - C_b
        @param {int} matchings - M
        @returns {float} M * C_b**(1/gamma)
        """
        return matchings * budget ** (1.0 / self.delay_exponent)

    def to_json_dict(self) -> Dict[str, Any]:
        return {"t_link": self.t_link, "t_comp": self.t_comp, "delay_exponent": self.delay_exponent}
