"""
Pair records and the dataset manifest written by ``prepare``.
"""
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from dataset.io import DATASET_INFO_FILE, PAIRS_FILE
from utils.exceptions import DataLoadError

MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class PairRecord:
    src_id: str
    tgt_id: str

    @property
    def pair_id(self) -> str:
        return f"{self.src_id}:{self.tgt_id}"

    def reversed(self) -> "PairRecord":
        return PairRecord(self.tgt_id, self.src_id)


@dataclass
class DatasetManifest:
    """Prepared dataset description."""
    root: str
    split: str = "train"
    resolution: Tuple[int, int] = (128, 64)
    identity_disjoint: bool = True
    pairs: List[PairRecord] = field(default_factory=list)
    cache_dir: Optional[str] = None
    dropped: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def image_ids(self) -> List[str]:
        """Image ids referenced by any pair, in first-seen order."""
        seen: Dict[str, None] = {}
        for pair in self.pairs:
            seen.setdefault(pair.src_id)
            seen.setdefault(pair.tgt_id)
        return list(seen)

    def with_reverse_pairs(self) -> "DatasetManifest":
        """Add (b, a) for every (a, b) pair not already present."""
        existing = set(self.pairs)
        pairs = list(self.pairs)
        for pair in self.pairs:
            if pair.reversed() not in existing:
                pairs.append(pair.reversed())
                existing.add(pair.reversed())
        return DatasetManifest(self.root, self.split, self.resolution, self.identity_disjoint,
                               pairs, self.cache_dir, list(self.dropped))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["resolution"] = list(self.resolution)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DatasetManifest":
        return cls(
            root=data["root"],
            split=data.get("split", "train"),
            resolution=tuple(data.get("resolution", (128, 64))),
            identity_disjoint=bool(data.get("identity_disjoint", True)),
            pairs=[PairRecord(p["src_id"], p["tgt_id"]) for p in data.get("pairs", [])],
            cache_dir=data.get("cache_dir"),
            dropped=list(data.get("dropped", [])),
        )


def save_manifest(manifest: DatasetManifest, directory: str) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, MANIFEST_FILE)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest.to_dict(), f, indent=2)
    return path


def load_manifest(path: str) -> DatasetManifest:
    """Load a manifest from a file or from a directory containing manifest.json."""
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST_FILE)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return DatasetManifest.from_dict(json.load(f))
    except OSError as e:
        raise DataLoadError(path, "manifest", str(e))
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise DataLoadError(path, "manifest", f"malformed manifest: {e}")


def read_pairs_file(path: str) -> List[PairRecord]:
    """Read ``<src_id> <tgt_id>`` lines; blank lines and ``#`` comments are skipped."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise DataLoadError(path, "pairs", str(e))
    pairs = []
    for number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise DataLoadError(path, "pairs", f"line {number}: expected '<src_id> <tgt_id>'")
        pairs.append(PairRecord(tokens[0], tokens[1]))
    return pairs


def write_pairs_file(path: str, pairs: List[PairRecord]) -> str:
    with open(path, "w", encoding="utf-8") as f:
        for pair in pairs:
            f.write(f"{pair.src_id} {pair.tgt_id}\n")
    return path


def read_dataset_info(root: str) -> Dict[str, Any]:
    """Optional dataset-level metadata; empty when absent."""
    path = os.path.join(root, DATASET_INFO_FILE)
    if not os.path.isfile(path):
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise DataLoadError(path, "dataset info", str(e))


def manifest_from_dataset(root: str, resolution: Tuple[int, int]) -> DatasetManifest:
    """Initial manifest listing every pair of a raw dataset directory."""
    info = read_dataset_info(root)
    pairs = read_pairs_file(os.path.join(root, PAIRS_FILE))
    return DatasetManifest(
        root=os.path.abspath(root),
        split=info.get("split", "train"),
        resolution=tuple(info.get("resolution", resolution)),
        identity_disjoint=bool(info.get("identity_disjoint", True)),
        pairs=pairs,
    )
