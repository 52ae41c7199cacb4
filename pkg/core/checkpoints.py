import io
import logging
import os

import numpy as np
from numpy.typing import NDArray
from sqlalchemy import create_engine, select
from sqlalchemy.orm import selectinload

from config.constants import CHECKPOINT_DB
from core.bellman_engine import LayerArtifacts, SolveArtifacts
from core.gp_surrogate import GpSurrogate, PolicySurrogate
from db.base import Base
from db.database_manager import DatabaseManager
from db.solve_layer import SolveLayer
from db.surrogate_record import SurrogateRecord
from models.market import ControlBox
from models.strategy import StrategyKind


def _npy(arr: NDArray) -> bytes:
    buffer = io.BytesIO()
    np.save(buffer, np.asarray(arr), allow_pickle=False)
    return buffer.getvalue()


def _from_npy(blob: bytes) -> NDArray:
    return np.load(io.BytesIO(blob), allow_pickle=False)


def _npz(record: dict[str, NDArray]) -> bytes:
    buffer = io.BytesIO()
    np.savez(buffer, **record)
    return buffer.getvalue()


def _from_npz(blob: bytes) -> dict[str, NDArray]:
    with np.load(io.BytesIO(blob), allow_pickle=False) as archive:
        return {key: archive[key] for key in archive.files}


class CheckpointStore:
    """Fitted layers keyed by (kind, t, config hash), cached in memory."""

    def __init__(
        self,
        database_manager: DatabaseManager,
        box: ControlBox,
        logger: logging.Logger,
    ) -> None:
        self.database_manager = database_manager
        self.box = box
        self.logger = logger
        self.cache: dict[tuple[int, int, str], LayerArtifacts] = {}

    def _to_layer(self, row: SolveLayer) -> LayerArtifacts:
        surrogates = {
            s.role: GpSurrogate.from_record(_from_npz(s.payload))
            for s in row.surrogates
        }
        policy_roles = sorted(
            (role for role in surrogates if role.startswith("policy:")),
            key=lambda role: int(role.split(":")[1]),
        )
        return LayerArtifacts(
            t=row.t,
            value=surrogates["value"],
            policy=PolicySurrogate(
                components=tuple(surrogates[role] for role in policy_roles),
                box=self.box,
            ),
            features=_from_npy(row.features),
            values=_from_npy(row.values),
            controls=_from_npy(row.controls),
            converged=_from_npy(row.converged),
        )

    def load_layer(
        self, kind: StrategyKind, t: int, config_hash: str
    ) -> LayerArtifacts | None:
        key = (kind.db_repr, t, config_hash)
        if layer := self.cache.get(key):
            return layer
        with self.database_manager as db:
            stmt = (
                select(SolveLayer)
                .options(selectinload(SolveLayer.surrogates))
                .where(
                    SolveLayer.kind == kind.db_repr,
                    SolveLayer.t == t,
                    SolveLayer.config_hash == config_hash,
                )
            )
            row = db.execute(stmt).scalars().first()
            self.logger.debug(f"Checkpoint lookup {kind.str_repr} t={t}: {row}")
            if row is None:
                return None
            layer = self._to_layer(row)
        self.cache[key] = layer
        return layer

    def save_layer(
        self, kind: StrategyKind, config_hash: str, layer: LayerArtifacts
    ) -> None:
        with self.database_manager as db:
            stale = db.execute(
                select(SolveLayer).where(
                    SolveLayer.kind == kind.db_repr,
                    SolveLayer.t == layer.t,
                    SolveLayer.config_hash == config_hash,
                )
            ).scalars()
            for old in stale.all():
                db.delete(old)
            db.flush()
            row = SolveLayer(
                kind=kind.db_repr,
                t=layer.t,
                config_hash=config_hash,
                design_count=int(layer.values.size),
                mean_value=float(layer.values.mean()),
                nonconverged=layer.nonconverged,
                features=_npy(layer.features),
                values=_npy(layer.values),
                controls=_npy(layer.controls),
                converged=_npy(layer.converged),
            )
            row.surrogates.append(
                SurrogateRecord(role="value", payload=_npz(layer.value.to_record()))
            )
            for i, component in enumerate(layer.policy.components):
                row.surrogates.append(
                    SurrogateRecord(
                        role=f"policy:{i}", payload=_npz(component.to_record())
                    )
                )
            db.add(row)
        self.cache[(kind.db_repr, layer.t, config_hash)] = layer
        self.logger.info(f"Saved checkpoint {kind.str_repr} t={layer.t}")

    def load_artifacts(
        self, kind: StrategyKind, config_hash: str, horizon: int
    ) -> SolveArtifacts:
        """Every stored layer of one solve; missing layers are left out."""
        artifacts = SolveArtifacts(kind, horizon, config_hash=config_hash)
        for t in range(horizon):
            if layer := self.load_layer(kind, t, config_hash):
                artifacts.layers[t] = layer
        return artifacts


def open_store(
    checkpoint_dir: str, box: ControlBox, logger: logging.Logger, echo: bool = False
) -> CheckpointStore:
    os.makedirs(checkpoint_dir, exist_ok=True)
    url = f"sqlite:///{os.path.join(checkpoint_dir, CHECKPOINT_DB)}"
    engine = create_engine(url, echo=echo, hide_parameters=True)
    Base.metadata.create_all(bind=engine)
    return CheckpointStore(DatabaseManager(engine, logger), box, logger)
