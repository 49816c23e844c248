"""
SQLite storage shared by the run manifest.
"""

from abc import ABC, abstractmethod
from contextlib import contextmanager
from pathlib import Path
import sqlite3
from typing import Any, Generic, Iterator, Optional, Sequence, TypeVar


T = TypeVar("T")


class DB:
    """A lightweight SQLite3 database handler."""

    def __init__(self, database: str | Path, **kwargs):
        """A lightweight SQLite3 database handler.

        Args:
            database (str | Path): Location of the database file, created (with its parents) if missing.
        """
        self.database = str(database)
        self.kwargs = kwargs
        self.conn: Optional[sqlite3.Connection] = None
        Path(self.database).parent.mkdir(parents=True, exist_ok=True)

    @contextmanager
    def connect(self) -> Iterator[sqlite3.Connection]:
        """Connection committed on success, rolled back on error, closed in both cases."""
        try:
            with sqlite3.connect(self.database, **self.kwargs) as conn:
                conn.row_factory = sqlite3.Row
                self.conn = conn
                yield conn
        finally:
            if self.conn:
                self.conn.close()
                self.conn = None


class DBTable(Generic[T], ABC):
    """A table whose rows map one-to-one to objects of type `T`."""

    def __init__(self, db: DB, table_name: str, schema: str, key_column: str):
        """
        Args:
            db (DB): Database holding the table.
            table_name (str): Table's name.
            schema (str): Column definitions, used when the table does not exist yet.
            key_column (str): Primary key column, also the default ordering of `select`.
        """
        self.db = db
        self.table_name = table_name
        self.key_column = key_column
        with self.db.connect() as conn:
            conn.execute(f"CREATE TABLE IF NOT EXISTS {self.table_name} ({schema})")

    @abstractmethod
    def row_factory(self, x: T) -> dict[str, Any]:
        """Convert an object to a row."""

    @abstractmethod
    def obj_factory(self, row: sqlite3.Row) -> T:
        """Convert a row to an object."""

    def insert(self, x: T) -> None:
        """Insert an object, replacing the row with the same key."""
        row = self.row_factory(x)
        columns = ", ".join(row)
        variables = ", ".join("?" * len(row))
        sql_statement = f"INSERT OR REPLACE INTO {self.table_name} ({columns}) VALUES ({variables})"
        with self.db.connect() as conn:
            conn.execute(sql_statement, list(row.values()))

    def select(self, where: str = "", params: Sequence[Any] = ()) -> list[T]:
        """Objects matching an optional `WHERE` clause, ordered by key.

        Args:
            where (str, optional): SQL condition with `?` placeholders. Defaults to every row.
            params (Sequence[Any], optional): Values of the placeholders.
        """
        condition = f" WHERE {where}" if where else ""
        sql_statement = f"SELECT * FROM {self.table_name}{condition} ORDER BY {self.key_column}"
        with self.db.connect() as conn:
            rows = conn.execute(sql_statement, tuple(params)).fetchall()
        return [self.obj_factory(row) for row in rows]

    def update(self, values: dict[str, Any], where: str, params: Sequence[Any] = ()) -> None:
        assignments = ", ".join(f"{column} = ?" for column in values)
        sql_statement = f"UPDATE {self.table_name} SET {assignments} WHERE {where}"
        with self.db.connect() as conn:
            conn.execute(sql_statement, [*values.values(), *params])

    @staticmethod
    def row_to_dict(row: sqlite3.Row, fields_to_exclude: tuple[str, ...] = ("created",)) -> dict[str, Any]:
        """Cast a row to a dictionary, without the bookkeeping columns."""
        return {key: row[key] for key in row.keys() if key not in fields_to_exclude}
