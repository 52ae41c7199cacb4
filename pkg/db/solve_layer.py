from typing import TYPE_CHECKING

from sqlalchemy import LargeBinary, UniqueConstraint
from sqlalchemy.orm import Mapped, mapped_column, relationship
from db.base import Base

if TYPE_CHECKING:
    from db.surrogate_record import SurrogateRecord


class SolveLayer(Base):
    __tablename__ = "solve_layers"
    __table_args__ = (UniqueConstraint("kind", "t", "config_hash"),)
    id: Mapped[int] = mapped_column(primary_key=True)
    kind: Mapped[int] = mapped_column(nullable=False)
    t: Mapped[int] = mapped_column(nullable=False)
    config_hash: Mapped[str] = mapped_column(nullable=False)
    design_count: Mapped[int] = mapped_column(nullable=False)
    mean_value: Mapped[float] = mapped_column(nullable=False)
    nonconverged: Mapped[int] = mapped_column(nullable=False, default=0)
    # .npy blobs
    features: Mapped[bytes] = mapped_column(LargeBinary, nullable=False)
    values: Mapped[bytes] = mapped_column(LargeBinary, nullable=False)
    controls: Mapped[bytes] = mapped_column(LargeBinary, nullable=False)
    converged: Mapped[bytes] = mapped_column(LargeBinary, nullable=False)

    surrogates: Mapped[list["SurrogateRecord"]] = relationship(
        back_populates="layer", cascade="all, delete-orphan"
    )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "t": self.t,
            "config_hash": self.config_hash,
            "design_count": self.design_count,
            "mean_value": self.mean_value,
            "nonconverged": self.nonconverged,
        }

    def __repr__(self) -> str:
        return (
            f"SolveLayer(id={self.id}, kind={self.kind}, t={self.t}, "
            f"config_hash={self.config_hash}, design_count={self.design_count})"
        )
