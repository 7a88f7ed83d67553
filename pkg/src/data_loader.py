"""
Data Loader Module
Handles loading, validation and writing of state documents, experiment
specs, sweep grids, trajectories and tables
"""

import json
import logging
import shutil
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import pandas as pd

from src.configuration import SolitonState
from src.conserved import ConservedSnapshot
from src.detectors import EventFlag
from src.dynamics import IntegratorOptions, TrajectoryRecord
from src.errors import ConfigError, HWMError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

STATE_FIELDS = ['m0', 'poles', 'velocities', 'spins']


def dumps(doc: Any) -> str:
    """Canonical one-line JSON: sorted keys, no padding"""
    return json.dumps(doc, sort_keys=True, separators=(',', ':'), allow_nan=False)


class DataLoader:
    """Load and validate input documents, write run outputs"""

    def __init__(self, output_dir: Optional[PathLike] = None):
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.cache = {}

    # ---- inputs -----------------------------------------------------------

    def load_document(self, path: PathLike) -> Dict:
        """Read a JSON object from disk; ConfigError when unreadable"""
        path = Path(path)
        if str(path) in self.cache:
            return self.cache[str(path)]
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                doc = json.load(handle)
        except FileNotFoundError:
            raise ConfigError(f"input file not found: {path}", path=str(path))
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path}: {e}", path=str(path))
        if not isinstance(doc, dict):
            raise ConfigError(f"{path} must hold a JSON object", path=str(path))
        self.cache[str(path)] = doc
        return doc

    def validate_document(self, doc: Dict, required_fields: List[str]) -> Tuple[bool, str]:
        """Validate that a document has the required fields"""
        if not doc:
            return False, "Document is empty"

        missing = [name for name in required_fields if name not in doc]
        if missing:
            return False, f"Missing fields: {missing}"

        return True, "Document validation passed"

    def load_state(self, path: PathLike) -> SolitonState:
        """Parse a state checkpoint; malformed documents are configuration errors"""
        doc = self.load_document(path)
        ok, message = self.validate_document(doc, STATE_FIELDS)
        if not ok and doc:
            raise ConfigError(f"{path}: {message}", path=str(path))
        try:
            return SolitonState.from_json_dict(doc)
        except HWMError as e:
            raise ConfigError(f"{path}: {e.message}", path=str(path))

    def load_spec(self, path: PathLike):
        """Parse an experiment spec document"""
        from src.experiments import ExperimentSpec

        return ExperimentSpec.from_dict(self.load_document(path))

    def load_grid(self, path: PathLike) -> Tuple[Dict, Dict[str, List]]:
        """
        Parse a sweep document

        Returns:
            (template spec document, grid mapping parameter name to values)
        """
        doc = self.load_document(path)
        ok, message = self.validate_document(doc, ['template', 'grid'])
        if not ok:
            raise ConfigError(f"{path}: {message}", path=str(path))
        grid = doc['grid']
        if not isinstance(grid, dict) or not grid:
            raise ConfigError("sweep grid must be a non-empty object")
        for name, values in grid.items():
            if not isinstance(values, list) or not values:
                raise ConfigError(f"grid entry {name!r} must be a non-empty list", field=name)
        return doc['template'], grid

    # ---- trajectories -----------------------------------------------------

    def write_trajectory(self, record: TrajectoryRecord, path: PathLike) -> Path:
        """
        One JSON line per sample ({"t", "state", "diagnostics"}) and a
        closing line with the event, options and step statistics
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='\n') as handle:
            for sample, diag in zip(record.samples, record.diagnostics()):
                line = {'t': sample.t, 'state': sample.to_json_dict(), 'diagnostics': diag.to_json_dict()}
                handle.write(dumps(line) + '\n')
            footer = {
                'event': record.event.to_dict() if record.event else None,
                'options': record.options.to_dict(),
                'stats': record.stats,
            }
            handle.write(dumps(footer) + '\n')
        logger.info("wrote %d samples to %s", len(record.samples), path)
        return path

    def read_trajectory(self, path: PathLike) -> TrajectoryRecord:
        """Rebuild a TrajectoryRecord from a JSONL file"""
        path = Path(path)
        samples, diagnostics, footer = [], [], None
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                for number, raw in enumerate(handle, start=1):
                    if not raw.strip():
                        continue
                    line = json.loads(raw)
                    if 'state' in line:
                        samples.append(SolitonState.from_json_dict(line['state']))
                        diagnostics.append(ConservedSnapshot.from_json_dict(line['diagnostics']))
                    elif 'event' in line:
                        footer = line
                    else:
                        raise ConfigError(f"{path}:{number}: unrecognised trajectory line")
        except FileNotFoundError:
            raise ConfigError(f"trajectory file not found: {path}", path=str(path))
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSONL in {path}: {e}", path=str(path))

        if not samples or footer is None:
            raise ConfigError(f"{path} is not a complete trajectory", path=str(path))
        event = EventFlag.from_dict(footer['event']) if footer['event'] else None
        options = IntegratorOptions(**footer.get('options', {}))
        return TrajectoryRecord(samples, options, event, dict(footer.get('stats', {})), diagnostics)

    # ---- other outputs ----------------------------------------------------

    def _target(self, name: PathLike) -> Path:
        path = Path(name)
        if not path.is_absolute() and self.output_dir is not None:
            path = self.output_dir / path
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def write_table(self, df: pd.DataFrame, name: PathLike) -> Path:
        path = self._target(name)
        df.to_csv(path, index=False, float_format='%.12g', lineterminator='\n')
        logger.info("wrote table with %d rows to %s", len(df), path)
        return path

    def write_json(self, doc: Dict, name: PathLike) -> Path:
        path = self._target(name)
        with open(path, 'w', encoding='utf-8', newline='\n') as handle:
            json.dump(doc, handle, sort_keys=True, indent=2, allow_nan=False)
            handle.write('\n')
        return path

    def write_text(self, text: str, name: PathLike) -> Path:
        path = self._target(name)
        path.write_text(text if text.endswith('\n') else text + '\n', encoding='utf-8')
        return path

    def write_provenance(self, sources: Iterable[PathLike]) -> List[Path]:
        """Copy every input document into <output_dir>/provenance"""
        if self.output_dir is None:
            return []
        copies = []
        for source in sources:
            source = Path(source)
            target = self._target(Path('provenance') / source.name)
            shutil.copyfile(source, target)
            copies.append(target)
        return copies
