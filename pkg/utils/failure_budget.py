"""
Failure budget for batches of reconstructions.

Baseline estimators are expected to fail occasionally on very sparse
measurement subsets. A budget lets a sweep absorb those failures (they are
counted, reported and excluded from aggregates) until the failure rate
exceeds a threshold, at which point the batch is aborted.

States:
- WITHIN: Failure rate at or below the budget.
- EXHAUSTED: Failure rate above the budget; ``check`` raises.
"""

import asyncio
import logging
from enum import Enum
from typing import Any, Callable, Optional

from config.settings import FAILURE_BUDGET
from utils.errors import FailureBudgetExceededError, InvalidInputError, NumericalFailureError

logger = logging.getLogger("eqpbench.failure_budget")


class BudgetState(Enum):
    """Enumeration of failure budget states."""

    WITHIN = "within"
    EXHAUSTED = "exhausted"


class FailureBudget:
    """
    Async failure accounting for one batch of independent jobs.

    Wraps each job with ``call``: expected exceptions are recorded and turned
    into a ``None`` result, successes are counted. ``check`` raises once the
    observed failure rate is above ``budget``.
    """

    def __init__(
        self,
        budget: float = FAILURE_BUDGET,
        expected_exceptions: tuple = (NumericalFailureError, ArithmeticError),
        name: Optional[str] = None,
    ):
        """
        Initialize the failure budget.

        Args:
            budget: Maximum tolerated failure fraction in [0, 1).
            expected_exceptions: Exception types that count as job failures.
                Anything else propagates immediately.
            name: Optional name for logging.
        """
        if not 0.0 <= budget < 1.0:
            raise InvalidInputError("Failure budget must lie in [0, 1)")
        self.budget = budget
        self.expected_exceptions = expected_exceptions
        self.name = name or "failure_budget"

        self._successes = 0
        self._failures = 0
        self._lock = asyncio.Lock()

    @property
    def total(self) -> int:
        return self._successes + self._failures

    @property
    def failure_count(self) -> int:
        return self._failures

    @property
    def failure_rate(self) -> float:
        return self._failures / self.total if self.total else 0.0

    @property
    def state(self) -> BudgetState:
        return BudgetState.EXHAUSTED if self.failure_rate > self.budget else BudgetState.WITHIN

    async def call(self, func: Callable, *args, **kwargs) -> Any:
        """
        Run an async job, recording its outcome.

        Returns:
            The job's result, or None if it raised an expected exception.
        """
        try:
            result = await func(*args, **kwargs)
        except self.expected_exceptions as e:
            await self._on_failure(e)
            return None
        await self._on_success()
        return result

    async def _on_success(self):
        async with self._lock:
            self._successes += 1

    async def _on_failure(self, reason: Any):
        async with self._lock:
            self._failures += 1
            logger.warning(
                f"Failure budget '{self.name}' recorded a failure: {reason}",
                extra={
                    "budget_name": self.name,
                    "failure_count": self._failures,
                    "total": self.total,
                },
            )

    def check(self) -> None:
        """
        Raise if the failure rate is above the budget.

        Raises:
            FailureBudgetExceededError: With the observed counts.
        """
        if self.state == BudgetState.EXHAUSTED:
            logger.error(
                f"Failure budget '{self.name}' exhausted",
                extra={"budget_name": self.name, **self.get_stats()},
            )
            raise FailureBudgetExceededError(
                f"{self._failures} of {self.total} jobs failed in '{self.name}' "
                f"({self.failure_rate:.1%} > {self.budget:.1%})"
            )

    def get_stats(self) -> dict:
        """
        Get current failure statistics.

        Returns:
            Dictionary containing state, counts and the configured budget.
        """
        return {
            "budget_name": self.name,
            "state": self.state.value,
            "successes": self._successes,
            "failures": self._failures,
            "failure_rate": self.failure_rate,
            "budget": self.budget,
        }
