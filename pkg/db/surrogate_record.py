from typing import TYPE_CHECKING

from sqlalchemy import LargeBinary
from sqlalchemy.orm import Mapped, mapped_column, relationship
from sqlalchemy.schema import ForeignKey
from db.base import Base

if TYPE_CHECKING:
    from db.solve_layer import SolveLayer


class SurrogateRecord(Base):
    __tablename__ = "surrogates"
    id: Mapped[int] = mapped_column(primary_key=True)
    layer_id: Mapped[int] = mapped_column(
        ForeignKey("solve_layers.id", ondelete="CASCADE"), nullable=False
    )
    # "value" or "policy:<coordinate>"
    role: Mapped[str] = mapped_column(nullable=False)
    # .npz archive of GpSurrogate.to_record()
    payload: Mapped[bytes] = mapped_column(LargeBinary, nullable=False)

    layer: Mapped["SolveLayer"] = relationship(back_populates="surrogates")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "layer_id": self.layer_id,
            "role": self.role,
        }

    def __repr__(self) -> str:
        return (
            f"SurrogateRecord(id={self.id}, layer_id={self.layer_id}, role={self.role})"
        )
