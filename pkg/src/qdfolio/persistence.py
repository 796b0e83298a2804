"""On-disk formats: archive JSONL, estimates JSON, run manifests, snapshots.

Floats are serialized with Python's shortest-roundtrip repr, so a save/load
cycle reproduces every numeric field bit-exactly and identical runs produce
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import time
import uuid
from dataclasses import dataclass

import numpy as np

from .behavior import CvtPartition
from .core import Estimates, Portfolio, RiskReturnPoint
from .engine import Archive, QdConfig, Snapshot


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Estimates
# ---------------------------------------------------------------------------


def estimates_to_json(est: Estimates, names=None) -> str:
    return json.dumps(
        {
            "names": list(names) if names is not None else None,
            "mu": est.mu.tolist(),
            "sigma": est.sigma.tolist(),
        }
    )


def save_estimates(path, est: Estimates, names=None) -> None:
    with open(path, "w") as f:
        f.write(estimates_to_json(est, names))


def load_estimates(path) -> tuple[Estimates, list[str] | None]:
    with open(path) as f:
        d = json.load(f)
    return Estimates(mu=np.array(d["mu"]), sigma=np.array(d["sigma"])), d.get("names")


def estimates_checksum(est: Estimates) -> str:
    return sha256_text(estimates_to_json(est))


# ---------------------------------------------------------------------------
# Archive JSONL
# ---------------------------------------------------------------------------


def save_archive(path, a: Archive, estimates_checksum_: str | None = None, universe_checksum: str | None = None) -> None:
    """One header line (config, reference portfolio, partition, checksums)
    followed by one JSON record per occupied niche."""
    header = {
        "config": a.config.to_dict(),
        "w0": a.w0.weights.tolist(),
        "rr0": [a.rr0.mu, a.rr0.sigma],
        "eval_count": a.eval_count,
        "estimates_sha256": estimates_checksum_,
        "universe_sha256": universe_checksum,
        "partition": a.partition.to_dict(),
    }
    with open(path, "w") as f:
        f.write(json.dumps(header) + "\n")
        for i in np.flatnonzero(a.occupied):
            rec = {
                "niche": int(i),
                "centroid": a.partition.centroids[i].tolist(),
                "weights": a.weights[i].tolist(),
                "fitness": float(a.fitness[i]),
                "mu": float(a.mu[i]),
                "sigma": float(a.sigma[i]),
                "near_optimal": bool(a.near_optimal[i]),
            }
            f.write(json.dumps(rec) + "\n")


def load_archive(path) -> Archive:
    with open(path) as f:
        header = json.loads(f.readline())
        cfg = QdConfig.from_dict(header["config"])
        partition = CvtPartition.from_dict(header["partition"])
        w0 = Portfolio(weights=np.array(header["w0"]))
        rr0 = RiskReturnPoint(mu=header["rr0"][0], sigma=header["rr0"][1])
        a = Archive(partition, len(w0), w0, rr0, cfg)
        a.eval_count = int(header["eval_count"])
        for line in f:
            rec = json.loads(line)
            i = int(rec["niche"])
            a.occupied[i] = True
            a.weights[i] = rec["weights"]
            a.fitness[i] = rec["fitness"]
            a.mu[i] = rec["mu"]
            a.sigma[i] = rec["sigma"]
            a.near_optimal[i] = rec["near_optimal"]
            a.bd[i] = _descriptor_from_record(cfg, rec)
    return a


def _descriptor_from_record(cfg: QdConfig, rec: dict) -> np.ndarray:
    # B1 descriptors equal the weights; B2 descriptors are recomputable from
    # the universe, but the archive file does not carry it, so the stored
    # centroid is used as the slot's descriptor anchor. Consumers needing
    # exact B2 descriptors should recompute them from weights and metadata.
    if cfg.behavior == "B1":
        return np.array(rec["weights"], dtype=float)
    return np.array(rec["centroid"], dtype=float)


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------


def save_snapshots_csv(path, snapshots: list[Snapshot]) -> None:
    with open(path, "w") as f:
        f.write("eval_count,coverage_mod,qd_score1,qd_score_mod\n")
        for s in snapshots:
            f.write(f"{s.eval_count},{s.coverage_mod!r},{s.qd_score1!r},{s.qd_score_mod!r}\n")


def load_snapshots_csv(path) -> list[Snapshot]:
    out = []
    with open(path) as f:
        next(f)
        for line in f:
            ec, cov, q1, qm = line.strip().split(",")
            out.append(Snapshot(int(ec), float(cov), float(q1), float(qm)))
    return out


# ---------------------------------------------------------------------------
# Run manifest
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    config: QdConfig
    estimates_sha256: str | None
    universe_sha256: str | None
    archive_path: str
    metrics_path: str | None
    wall_seconds: float
    run_id: str

    @classmethod
    def fresh(cls, config, estimates_sha256, universe_sha256, archive_path, metrics_path, wall_seconds):
        return cls(
            config=config,
            estimates_sha256=estimates_sha256,
            universe_sha256=universe_sha256,
            archive_path=str(archive_path),
            metrics_path=str(metrics_path) if metrics_path else None,
            wall_seconds=wall_seconds,
            run_id=uuid.uuid4().hex,
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(
                {
                    "config": self.config.to_dict(),
                    "estimates_sha256": self.estimates_sha256,
                    "universe_sha256": self.universe_sha256,
                    "archive_path": self.archive_path,
                    "metrics_path": self.metrics_path,
                    "wall_seconds": self.wall_seconds,
                    "run_id": self.run_id,
                },
                f,
                indent=2,
            )

    @classmethod
    def load(cls, path, verify: bool = True) -> "RunManifest":
        with open(path) as f:
            d = json.load(f)
        m = cls(
            config=QdConfig.from_dict(d["config"]),
            estimates_sha256=d["estimates_sha256"],
            universe_sha256=d["universe_sha256"],
            archive_path=d["archive_path"],
            metrics_path=d["metrics_path"],
            wall_seconds=d["wall_seconds"],
            run_id=d["run_id"],
        )
        if verify:
            a = load_archive(m.archive_path)
            # Stored checksums are validated against the referenced archive header.
            with open(m.archive_path) as f:
                header = json.loads(f.readline())
            if header.get("estimates_sha256") != m.estimates_sha256:
                raise ValueError("estimates checksum in manifest does not match archive header")
            if header.get("universe_sha256") != m.universe_sha256:
                raise ValueError("universe checksum in manifest does not match archive header")
            del a
        return m
