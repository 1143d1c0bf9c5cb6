"""Run-summary JSON files kept under the trace directory."""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

logger = logging.getLogger(__name__)


class ResultStore:
    """
    Save, read and list run summaries as ``<name>.json`` files.

    Used by the CLI to persist one summary per run next to its trace.
    """

    def __init__(self, base_path: Union[str, Path] = "./traces"):
        """
        Initialize the store.

        Args:
            base_path: Directory holding the summaries (created if missing)
        """
        self.base_path = Path(base_path).resolve()
        self.base_path.mkdir(parents=True, exist_ok=True)

    def path_for(self, name: str) -> Path:
        return self.base_path / f"{name}.json"

    def save_summary(self, name: str, content: Dict[str, Any]) -> Path:
        """Write ``content`` as indented JSON and return the file path."""
        path = self.path_for(name)
        with path.open("w", encoding="utf-8") as handle:
            json.dump(content, handle, indent=2, ensure_ascii=False)
            handle.write("\n")
        logger.info("Summary saved to %s", path)
        return path

    def read_summary(self, name: str) -> Optional[Dict[str, Any]]:
        """Load a summary, or None when no file of that name exists."""
        path = self.path_for(name)
        if not path.exists():
            logger.warning("No summary named %s in %s", name, self.base_path)
            return None
        with path.open("r", encoding="utf-8") as handle:
            return json.load(handle)

    def list_summaries(self) -> List[str]:
        return sorted(path.stem for path in self.base_path.glob("*.json"))
