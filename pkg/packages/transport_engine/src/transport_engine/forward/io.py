import logging

from core.errors import SchemaMismatchError
from core.models import ResponseArtifact
from core.repositories import ArtifactRepository
from core.types import BoundarySign
from transport_engine.forward.response import RESPONSE_COLUMNS, AlbedoResponse
from transport_engine.geometry import BoundaryGrid, Domain

logger = logging.getLogger(__name__)


def save_response(
    repository: ArtifactRepository,
    name: str,
    response: AlbedoResponse,
    config_hash: str = "",
    phantom_hash: str = "",
) -> None:
    """Write the response CSV and its JSON sidecar."""
    repository.save_table(name, RESPONSE_COLUMNS, response.to_rows(), response.artifact(config_hash, phantom_hash))
    logger.info(f"Saved response {name} (N = {response.order}, {response.backend.value})")


def load_response(repository: ArtifactRepository, name: str, domain: Domain) -> AlbedoResponse:
    """Read a response back; the grid is rebuilt from the sidecar on ``domain``."""
    rows, artifact = repository.load_table(name, ResponseArtifact)
    if rows and tuple(rows[0].keys()) != RESPONSE_COLUMNS:
        raise SchemaMismatchError(f"{name} has columns {list(rows[0].keys())}, expected {list(RESPONSE_COLUMNS)}")
    meta = artifact.grid
    grid = BoundaryGrid.build(
        domain,
        meta.boundary_nodes,
        meta.angle_nodes,
        meta.time_bins,
        meta.horizon,
        sign=BoundarySign.OUTGOING,
        tangent_cutoff=meta.tangent_cutoff,
    )
    return AlbedoResponse.from_rows(grid, rows, artifact)
