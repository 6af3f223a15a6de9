import json
from datetime import datetime
from sqlalchemy import Column, Integer, String, Float, Text, DateTime, ForeignKey
from sqlalchemy.orm import relationship
from backend.database.connection import Base


class SweepRun(Base):
    __tablename__ = "sweep_runs"

    id = Column(Integer, primary_key=True)
    scenario_name = Column(String(128), nullable=False)
    homes = Column(Integer, nullable=False)
    horizon = Column(Integer, nullable=False)
    schemes = Column(String(64), nullable=False)  # comma separated, e.g. "LM,SG1"
    settings_json = Column(Text, default="{}")
    created_at = Column(DateTime, default=datetime.utcnow)

    # Relationships
    points = relationship(
        "SweepPoint",
        back_populates="run",
        cascade="all, delete-orphan",
        order_by="SweepPoint.id",
    )

    def __repr__(self):
        return f"<SweepRun(id={self.id}, scenario={self.scenario_name}, schemes={self.schemes})>"

    @property
    def settings(self):
        return json.loads(self.settings_json or "{}")

    def to_dict(self, with_points=False):
        data = {
            "id": self.id,
            "scenario": self.scenario_name,
            "homes": self.homes,
            "horizon": self.horizon,
            "schemes": self.schemes.split(","),
            "settings": self.settings,
            "created_at": self.created_at.isoformat() if self.created_at else None,
            "points": len(self.points),
        }
        if with_points:
            data["rows"] = [p.to_dict() for p in self.points]
        return data


class SweepPoint(Base):
    __tablename__ = "sweep_points"

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey("sweep_runs.id", ondelete="CASCADE"), nullable=False)
    capacity = Column(Float, nullable=False)
    scheme = Column(String(8), nullable=False)
    label = Column(String(64), nullable=False)
    rel_vital = Column(Float, nullable=False)
    rel_comfort = Column(Float, nullable=False)
    iters_to_best = Column(Integer, default=0)
    wall_s = Column(Float, default=0.0)

    # Relationships
    run = relationship("SweepRun", back_populates="points")

    def __repr__(self):
        return f"<SweepPoint(run_id={self.run_id}, {self.scheme} C={self.capacity}, class={self.label})>"

    def to_dict(self):
        return {
            "capacity": self.capacity,
            "scheme": self.scheme,
            "class": self.label,
            "rel_vital": self.rel_vital,
            "rel_comfort": self.rel_comfort,
            "iters_to_best": self.iters_to_best,
            "wall_s": self.wall_s,
        }
