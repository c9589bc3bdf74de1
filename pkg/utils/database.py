"""
Results store for benchmark sweeps using SQLite.

Every completed sweep is recorded so ``report`` can summarize the latest
run of each method for a dataset without re-running reconstructions.
"""

import asyncio
import logging
import time
from pathlib import Path
from typing import TYPE_CHECKING, List, Optional, Union

import aiosqlite

from config.settings import RESULTS_DB_PATH
from utils.decorators import retry_on_error
from utils.models import SweepRowEntry, SweepRunEntry

if TYPE_CHECKING:
    from utils.bench import SweepResult

logger = logging.getLogger("eqpbench.database")


class Database:
    """
    Async results database.

    Schema:
    - **sweep_runs**: One row per sweep.
      Columns: run_id (PK), dataset, method, metric, n_qubits, shots, slope,
      intercept, r2, cov, mean_rmse, created_at.
    - **sweep_rows**: Per-size aggregates of a sweep.
      Columns: run_id, size, mean_rmse, std_rmse, count, failures.
    """

    def __init__(self, db_path: Union[str, Path] = RESULTS_DB_PATH):
        """
        Initialize the database instance.

        Args:
            db_path: SQLite file path (':memory:' for a transient store).
        """
        self.db_path = str(db_path)
        self._conn: Optional[aiosqlite.Connection] = None
        self._lock = asyncio.Lock()

    @retry_on_error()
    async def connect(self) -> None:
        """Open the connection (creating parent directories) and create tables."""
        if self.db_path != ":memory:":
            Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)
        self._conn = await aiosqlite.connect(self.db_path)
        self._conn.row_factory = aiosqlite.Row
        await self._create_tables()
        logger.info(f"Results database connected: {self.db_path}")

    async def close(self) -> None:
        """Close the database connection."""
        if self._conn:
            await self._conn.close()
            self._conn = None
            logger.info("Results database connection closed")

    async def _create_tables(self) -> None:
        """Create tables and indexes if they don't exist."""
        async with self._lock:
            await self._conn.execute(  # type: ignore
                """
                CREATE TABLE IF NOT EXISTS sweep_runs (
                    run_id INTEGER PRIMARY KEY AUTOINCREMENT,
                    dataset TEXT NOT NULL,
                    method TEXT NOT NULL,
                    metric TEXT NOT NULL,
                    n_qubits INTEGER NOT NULL,
                    shots INTEGER,
                    slope REAL,
                    intercept REAL,
                    r2 REAL,
                    cov REAL,
                    mean_rmse REAL,
                    created_at REAL NOT NULL
                )
            """
            )

            await self._conn.execute(  # type: ignore
                """
                CREATE TABLE IF NOT EXISTS sweep_rows (
                    run_id INTEGER NOT NULL REFERENCES sweep_runs(run_id),
                    size INTEGER NOT NULL,
                    mean_rmse REAL,
                    std_rmse REAL,
                    count INTEGER NOT NULL,
                    failures INTEGER NOT NULL,
                    PRIMARY KEY (run_id, size)
                )
            """
            )

            await self._conn.execute(  # type: ignore
                """
                CREATE INDEX IF NOT EXISTS idx_runs_dataset
                ON sweep_runs(dataset, method, metric)
            """
            )

            await self._conn.commit()  # type: ignore
            logger.debug("Results tables initialized")

    async def save_sweep(self, dataset: str, result: "SweepResult") -> Optional[int]:
        """
        Store a sweep and its per-size rows.

        Args:
            dataset: Dataset directory the sweep ran on.
            result: Aggregated sweep.

        Returns:
            The new run id, or None if the write failed.
        """
        try:
            async with self._lock:
                cursor = await self._conn.execute(  # type: ignore
                    """
                    INSERT INTO sweep_runs (dataset, method, metric, n_qubits, shots, slope,
                                            intercept, r2, cov, mean_rmse, created_at)
                    VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                    """,
                    (
                        dataset,
                        result.method,
                        result.metric,
                        result.n_qubits,
                        result.shots,
                        result.trend.slope,
                        result.trend.intercept,
                        result.trend.r2,
                        result.cov,
                        result.overall_mean,
                        time.time(),
                    ),
                )
                run_id = cursor.lastrowid

                await self._conn.executemany(  # type: ignore
                    """
                    INSERT INTO sweep_rows (run_id, size, mean_rmse, std_rmse, count, failures)
                    VALUES (?, ?, ?, ?, ?, ?)
                    """,
                    [
                        (run_id, size, mean, std, count, failures)
                        for size, mean, std, count, failures in zip(
                            result.sizes, result.mean, result.std, result.count, result.failures
                        )
                    ],
                )
                await self._conn.commit()  # type: ignore

                logger.debug(f"Saved sweep run {run_id} ({result.method}/{result.metric})")
                return run_id

        except Exception as e:
            logger.error(f"Error saving sweep: {e}", exc_info=True)
            if self._conn is not None:
                # Drop the run header when its rows could not be written
                await self._conn.rollback()
            return None

    async def load_latest_runs(self, dataset: str) -> List[SweepRunEntry]:
        """
        Latest run of every (method, metric) pair for a dataset.

        Returns:
            Runs ordered by method then metric; empty on error.
        """
        try:
            async with self._lock:
                cursor = await self._conn.execute(  # type: ignore
                    """
                    SELECT * FROM sweep_runs
                    WHERE run_id IN (
                        SELECT MAX(run_id) FROM sweep_runs
                        WHERE dataset = ?
                        GROUP BY method, metric
                    )
                    ORDER BY method, metric
                    """,
                    (dataset,),
                )
                rows = await cursor.fetchall()
                return [SweepRunEntry(**dict(row)) for row in rows]

        except Exception as e:
            logger.error(f"Error loading sweep runs: {e}", exc_info=True)
            return []

    async def load_rows(self, run_id: int) -> List[SweepRowEntry]:
        """Per-size rows of one run, ordered by size; empty on error."""
        try:
            async with self._lock:
                cursor = await self._conn.execute(  # type: ignore
                    "SELECT * FROM sweep_rows WHERE run_id = ? ORDER BY size",
                    (run_id,),
                )
                rows = await cursor.fetchall()
                return [SweepRowEntry(**dict(row)) for row in rows]

        except Exception as e:
            logger.error(f"Error loading sweep rows: {e}", exc_info=True)
            return []

    async def delete_dataset_runs(self, dataset: str) -> bool:
        """
        Delete every run recorded for a dataset.

        Returns:
            True if successful, False otherwise.
        """
        try:
            async with self._lock:
                await self._conn.execute(  # type: ignore
                    "DELETE FROM sweep_rows WHERE run_id IN "
                    "(SELECT run_id FROM sweep_runs WHERE dataset = ?)",
                    (dataset,),
                )
                await self._conn.execute(  # type: ignore
                    "DELETE FROM sweep_runs WHERE dataset = ?", (dataset,)
                )
                await self._conn.commit()  # type: ignore
                logger.info(f"Deleted sweep runs for {dataset}")
                return True

        except Exception as e:
            logger.error(f"Error deleting sweep runs: {e}", exc_info=True)
            return False


# Global database instance
_db_instance: Optional[Database] = None
_db_init_lock: Optional[asyncio.Lock] = None


async def get_database(db_path: Union[str, Path, None] = None) -> Database:
    """
    Get global database instance (Singleton pattern).

    Initializes and connects if not already connected. Uses double-checked
    locking so concurrent callers share one connection.

    Args:
        db_path: Path used when the instance is first created.

    Returns:
        The connected Database instance.
    """
    global _db_instance, _db_init_lock

    if _db_init_lock is None:
        _db_init_lock = asyncio.Lock()

    if _db_instance is None:
        async with _db_init_lock:
            if _db_instance is None:
                instance = Database(db_path if db_path is not None else RESULTS_DB_PATH)
                await instance.connect()
                # Only assign after the connection is fully established
                _db_instance = instance

    return _db_instance


async def close_database() -> None:
    """Close global database instance and cleanup resources."""
    global _db_instance, _db_init_lock
    if _db_instance is not None:
        await _db_instance.close()
        _db_instance = None
    _db_init_lock = None
