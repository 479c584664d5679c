"""Terminal output helpers: rich when it can render, plain print otherwise."""

from __future__ import annotations

import logging
from typing import Any, Sequence

try:
    from rich.console import Console
    from rich.logging import RichHandler
    from rich.markup import escape
    from rich.panel import Panel
    from rich.table import Table
except ImportError:  # pragma: no cover
    Console = None  # type: ignore[assignment,misc]


def get_console() -> Any:
    return Console(highlight=False) if Console is not None else None


def setup_logging(level: str = "INFO") -> logging.Logger:
    """Route the ``softerr`` logger hierarchy through one handler."""
    root = logging.getLogger("softerr")
    root.setLevel(level.upper())
    root.handlers.clear()
    if Console is not None:
        handler: logging.Handler = RichHandler(
            console=Console(stderr=True), show_path=False, rich_tracebacks=False
        )
        handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    else:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root.addHandler(handler)
    return root


def print_table(
    console: Any, title: str, columns: Sequence[str], rows: Sequence[Sequence[Any]]
) -> None:
    try:
        if console is None:
            raise UnicodeEncodeError("ascii", "", 0, 1, "no rich console")
        table = Table(title=title, title_style="bold")
        for i, col in enumerate(columns):
            table.add_column(col, justify="left" if i == 0 else "right")
        for row in rows:
            table.add_row(*(str(v) for v in row))
        console.print(table)
    except UnicodeEncodeError:
        print(f"\n=== {title} ===")
        print("\t".join(columns))
        for row in rows:
            print("\t".join(str(v) for v in row))


def print_panel(console: Any, title: str, lines: Sequence[str], style: str = "blue") -> None:
    try:
        if console is None:
            raise UnicodeEncodeError("ascii", "", 0, 1, "no rich console")
        console.print(Panel.fit("\n".join(lines), title=title, border_style=style))
    except UnicodeEncodeError:
        print(f"\n=== {title} ===")
        for line in lines:
            print(f"  {line}")


def print_error(console: Any, message: str) -> None:
    try:
        if console is None:
            raise UnicodeEncodeError("ascii", "", 0, 1, "no rich console")
        console.print(f"[bold red]error:[/bold red] {escape(message)}", markup=True, soft_wrap=True)
    except UnicodeEncodeError:
        print(f"error: {message}")
