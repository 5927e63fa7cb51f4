"""Result files: commented CSV tables, cached matrix pairs and the run manifest"""

import csv
import io
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from prefect.logging import get_logger
from pydantic import BaseModel, Field

from prefect_octacage._version import __version__
from prefect_octacage.assembly import MatrixKind, MatrixPair
from prefect_octacage.config import CageConfig, config_hash, echo_config
from prefect_octacage.eigensolver import Spectrum

MANIFEST_NAME = "manifest.json"

logger = get_logger("octacage.results")


class RunManifest(BaseModel):
    """
    Record of one CLI run and the files it wrote.
    """

    config_hash: str = Field(default=..., description="Hash of the run configuration.")
    subcommand: str = Field(default=..., description="The subcommand that ran.")
    config_path: Optional[str] = Field(
        default=None, description="Configuration file the run was started with."
    )
    outputs: List[str] = Field(default_factory=list, description="Written files.")
    wall_time: float = Field(default=0.0, description="Elapsed seconds.")
    quadrature_nodes: int = Field(
        default=0, description="Volume nodes carrying a non-zero weight."
    )
    volume_integrations: int = Field(
        default=0, description="Number of vectorized volume integrations."
    )
    summary: Dict[str, float] = Field(
        default_factory=dict, description="Headline numbers of the run."
    )
    version: str = Field(default=__version__, description="Package version.")


def _format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def table_header(
    subcommand: str, config: CageConfig, notes: Optional[Mapping[str, object]] = None
) -> List[str]:
    """
    Comment lines written above every table; `notes` become `key: value` lines.
    """
    lines = [
        f"prefect-octacage {__version__}",
        f"subcommand: {subcommand}",
        f"config_hash: {config_hash(config)}",
    ]
    lines += [f"config: {line}" for line in echo_config(config).splitlines()]
    lines += [f"{key}: {_format_cell(value)}" for key, value in (notes or {}).items()]
    lines.append(f"created: {datetime.now(timezone.utc).isoformat()}")
    return [f"# {line}" for line in lines]


def write_table(
    path,
    columns: Sequence[str],
    rows: Iterable[Sequence],
    subcommand: str,
    config: CageConfig,
    notes: Optional[Mapping[str, object]] = None,
) -> Path:
    """
    Writes a CSV table preceded by `#` comment lines.

    The body holds only the header row and the data, with floats written by `repr`,
    so identical inputs give byte-identical bodies.

    Args:
        path: Target file; parent directories are created.
        columns: Column names.
        rows: Data rows.
        subcommand: Recorded in the comments.
        config: Echoed into the comments together with its hash.
        notes: Extra `key: value` comment lines, such as derived results.

    Returns:
        The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = io.StringIO()
    writer = csv.writer(body, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(value) for value in row])
    header = "\n".join(table_header(subcommand, config, notes)) + "\n"
    path.write_text(header + body.getvalue())
    logger.info("Wrote %s", path)
    return path


def read_table(path) -> Tuple[List[str], List[str], List[List[str]]]:
    """
    Reads a table written by `write_table`.

    Returns:
        The comment lines (without `# `), the column names and the rows as strings.
    """
    comments, body = [], []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            comments.append(line[2:])
        else:
            body.append(line)
    rows = list(csv.reader(body))
    return comments, rows[0], rows[1:]


def table_body(path) -> str:
    """
    The table without its comment lines.
    """
    return "".join(
        line
        for line in Path(path).read_text().splitlines(keepends=True)
        if not line.startswith("#")
    )


_PAIR_ARRAYS = (
    "hamiltonian",
    "overlap",
    "hamiltonian_errors",
    "overlap_errors",
    "z_nodes",
    "z_weights",
    "z_overlaps",
)


def save_matrix_pair(pair: MatrixPair, path) -> Path:
    """
    Stores a matrix pair as `.npz` with its metadata as embedded JSON.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {
        name: getattr(pair, name)
        for name in _PAIR_ARRAYS
        if getattr(pair, name) is not None
    }
    metadata = pair.dict(exclude=set(_PAIR_ARRAYS))
    metadata["kind"] = pair.kind.value
    metadata["dimension"] = pair.dimension
    with path.open("wb") as stream:
        np.savez(stream, metadata=np.array(json.dumps(metadata)), **arrays)
    logger.info("Cached %d-dimensional matrix pair at %s", pair.dimension, path)
    return path


def load_matrix_pair(path) -> MatrixPair:
    """
    Loads a matrix pair written by `save_matrix_pair`.
    """
    with np.load(Path(path), allow_pickle=False) as data:
        metadata = json.loads(str(data["metadata"]))
        arrays = {name: data[name] for name in _PAIR_ARRAYS if name in data.files}
    metadata.pop("dimension", None)
    metadata["kind"] = MatrixKind(metadata["kind"])
    return MatrixPair(**metadata, **arrays)


_SPECTRUM_ARRAYS = ("eigenvalues", "coefficients", "overlap_eigenvalues")


def save_spectrum(spectrum: Spectrum, path) -> Path:
    """
    Stores a spectrum as `.npz` next to its matrix pair.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metadata = spectrum.dict(exclude=set(_SPECTRUM_ARRAYS))
    with path.open("wb") as stream:
        np.savez(
            stream,
            metadata=np.array(json.dumps(metadata)),
            **{name: getattr(spectrum, name) for name in _SPECTRUM_ARRAYS},
        )
    return path


def load_spectrum(path) -> Spectrum:
    """
    Loads a spectrum written by `save_spectrum`.
    """
    with np.load(Path(path), allow_pickle=False) as data:
        metadata = json.loads(str(data["metadata"]))
        arrays = {name: data[name] for name in _SPECTRUM_ARRAYS}
    return Spectrum(**metadata, **arrays)


def write_manifest(manifest: RunManifest, output_dir) -> Path:
    """
    Writes `manifest.json` into `output_dir`.
    """
    path = Path(output_dir) / MANIFEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.json(indent=2) + "\n")
    return path
