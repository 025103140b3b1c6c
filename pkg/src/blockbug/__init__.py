"""blockbug: a headless omniscient + interrogative debugger for a Scratch-like
block language.

Typical entry points:

- :func:`blockbug.model.parse_project` to load a project,
- :class:`blockbug.vm.Vm` to execute it deterministically,
- :class:`blockbug.control.Controller` for time travel and breakpoints,
- :mod:`blockbug.questions` / :mod:`blockbug.answers` for the question tree,
- :class:`blockbug.session.Session` for the line-delimited command protocol,
- ``blockbug`` CLI (run / serve / trace) for everything scriptable.
"""

from .errors import BlockbugError
from .model import (
    Block,
    Category,
    Project,
    Target,
    block_lookup,
    opcode_category,
    parse_project,
    serialize_project,
    validate_project,
)

__version__ = "0.1.0"

__all__ = [
    "Block",
    "BlockbugError",
    "Category",
    "Project",
    "Target",
    "block_lookup",
    "opcode_category",
    "parse_project",
    "serialize_project",
    "validate_project",
    "__version__",
]
