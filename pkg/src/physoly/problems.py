"""Multi-part physics problems and their scoring rubrics.

Problems are authored as a directory holding a ``problem.yaml`` manifest,
markdown statement files, and image assets. Rubrics are standalone YAML
files. All point values are integer centipoints (hundredths of a point) so
that rubric sums are exact; see :func:`parse_points`.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

MANIFEST_NAME = "problem.yaml"
MEDIA_KINDS = ("png", "jpeg", "pdf-page")


class ProblemError(Exception):
    """Base for problem/rubric loading failures."""


class MissingManifest(ProblemError):
    pass


class ManifestError(ProblemError):
    pass


class DuplicateSubpartId(ProblemError):
    def __init__(self, subpart_id: str):
        super().__init__(f"duplicate subpart id: {subpart_id}")
        self.subpart_id = subpart_id


class DanglingAssetRef(ProblemError):
    def __init__(self, subpart_id: str, asset_id: str):
        super().__init__(f"subpart {subpart_id} references unknown asset {asset_id!r}")
        self.subpart_id = subpart_id
        self.asset_id = asset_id


class RubricError(ProblemError):
    pass


class EmptyPart(RubricError):
    def __init__(self, part_id: str):
        super().__init__(f"rubric part {part_id} has no scoring points")
        self.part_id = part_id


class TotalMismatch(RubricError):
    def __init__(self, part_id: str, declared: int, computed: int):
        super().__init__(
            f"rubric part {part_id}: declared total {format_points(declared)} "
            f"but points sum to {format_points(computed)}"
        )
        self.part_id = part_id
        self.declared = declared
        self.computed = computed


def parse_points(text: str | int) -> int:
    """Parse a decimal point value like ``"2.2"`` into integer centipoints (220).

    Pure string arithmetic; floats never enter. At most two fraction digits.
    """
    if isinstance(text, bool):
        raise ManifestError(f"not a point value: {text!r}")
    if isinstance(text, int):
        if text < 0:
            raise ManifestError(f"not a point value: {text!r}")
        return text * 100
    whole, _, frac = text.strip().partition(".")
    if not whole.isdigit() or (frac and not frac.isdigit()) or len(frac) > 2:
        raise ManifestError(f"not a point value: {text!r}")
    return int(whole) * 100 + int(frac.ljust(2, "0") or "0")


def format_points(centi: int) -> str:
    """Render centipoints as the shortest exact decimal (220 -> "2.2")."""
    whole, frac = divmod(centi, 100)
    if frac == 0:
        return str(whole)
    if frac % 10 == 0:
        return f"{whole}.{frac // 10}"
    return f"{whole}.{frac:02d}"


@dataclass(frozen=True)
class Constant:
    symbol: str
    value: str
    unit: str


@dataclass(frozen=True)
class ImageAsset:
    id: str
    path: Path
    media_kind: str
    caption: str | None = None

    def __post_init__(self) -> None:
        if self.media_kind not in MEDIA_KINDS:
            raise ManifestError(f"asset {self.id}: unknown media kind {self.media_kind!r}")

    def read_bytes(self) -> bytes:
        return self.path.read_bytes()


@dataclass(frozen=True)
class SubPart:
    """One sub-question, e.g. id "T1.C.1", with its statement text."""

    id: str
    statement: str
    asset_refs: tuple[str, ...] = ()
    max_points: int = 0

    def __post_init__(self) -> None:
        if not self.id:
            raise ManifestError("subpart id must be non-empty")
        if not self.statement.strip():
            raise ManifestError(f"subpart {self.id}: statement must be non-empty")
        if self.max_points < 0:
            raise ManifestError(f"subpart {self.id}: max_points must be >= 0")


@dataclass(frozen=True)
class Problem:
    id: str
    title: str
    subparts: tuple[SubPart, ...]
    assets: tuple[ImageAsset, ...] = ()
    constants: tuple[Constant, ...] = ()

    def __post_init__(self) -> None:
        if not self.subparts:
            raise ManifestError(f"problem {self.id}: needs at least one subpart")
        seen: set[str] = set()
        for sp in self.subparts:
            if sp.id in seen:
                raise DuplicateSubpartId(sp.id)
            seen.add(sp.id)
        asset_ids = {a.id for a in self.assets}
        for sp in self.subparts:
            for ref in sp.asset_refs:
                if ref not in asset_ids:
                    raise DanglingAssetRef(sp.id, ref)

    def asset(self, asset_id: str) -> ImageAsset:
        for a in self.assets:
            if a.id == asset_id:
                return a
        raise KeyError(asset_id)

    @property
    def subpart_ids(self) -> tuple[str, ...]:
        return tuple(sp.id for sp in self.subparts)


@dataclass(frozen=True)
class ScoringPoint:
    id: str
    description: str
    value: int  # centipoints, > 0

    def __post_init__(self) -> None:
        if self.value <= 0:
            raise RubricError(f"scoring point {self.id}: value must be > 0")


@dataclass(frozen=True)
class PartRubric:
    id: str
    total: int  # centipoints
    points: tuple[ScoringPoint, ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise EmptyPart(self.id)
        computed = sum(p.value for p in self.points)
        if computed != self.total:
            raise TotalMismatch(self.id, self.total, computed)


@dataclass(frozen=True)
class Rubric:
    problem_id: str
    parts: tuple[PartRubric, ...]

    def __post_init__(self) -> None:
        part_ids = [p.id for p in self.parts]
        if len(part_ids) != len(set(part_ids)):
            raise RubricError(f"rubric {self.problem_id}: duplicate part ids")
        point_ids = [pt.id for part in self.parts for pt in part.points]
        if len(point_ids) != len(set(point_ids)):
            raise RubricError(f"rubric {self.problem_id}: duplicate scoring point ids")

    @property
    def total(self) -> int:
        return sum(p.total for p in self.parts)

    @property
    def point_ids(self) -> frozenset[str]:
        return frozenset(pt.id for part in self.parts for pt in part.points)


@dataclass(frozen=True)
class Issue:
    """A validation finding; kind is one of the ISSUE_* constants."""

    kind: str
    subject: str
    message: str


ISSUE_UNMATCHED_RUBRIC_PART = "unmatched-rubric-part"
ISSUE_UNREADABLE_ASSET = "unreadable-asset"


def _require(mapping: dict[str, Any], key: str, context: str) -> Any:
    if key not in mapping:
        raise ManifestError(f"{context}: missing required key {key!r}")
    return mapping[key]


def load_problem(directory: Path | str) -> Problem:
    """Load and validate a problem directory.

    The manifest declares subparts (statement files live next to it) and
    image assets; asset paths resolve relative to the directory and must be
    readable at load time.
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise MissingManifest(f"no {MANIFEST_NAME} in {directory}")
    try:
        raw = yaml.safe_load(manifest_path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ManifestError(f"{manifest_path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ManifestError(f"{manifest_path}: manifest must be a mapping")

    assets = []
    for entry in raw.get("assets", []) or []:
        path = directory / str(_require(entry, "path", "asset"))
        asset = ImageAsset(
            id=str(_require(entry, "id", "asset")),
            path=path,
            media_kind=str(_require(entry, "media_kind", "asset")),
            caption=entry.get("caption"),
        )
        if not path.is_file():
            raise ManifestError(f"asset {asset.id}: file not found: {path}")
        assets.append(asset)

    subparts = []
    for entry in _require(raw, "subparts", "manifest") or []:
        sp_id = str(_require(entry, "id", "subpart"))
        statement_file = directory / str(_require(entry, "statement_file", f"subpart {sp_id}"))
        if not statement_file.is_file():
            raise ManifestError(f"subpart {sp_id}: statement file not found: {statement_file}")
        subparts.append(
            SubPart(
                id=sp_id,
                statement=statement_file.read_text(encoding="utf-8"),
                asset_refs=tuple(str(r) for r in entry.get("asset_refs", []) or []),
                max_points=parse_points(_require(entry, "max_points", f"subpart {sp_id}")),
            )
        )

    constants = tuple(
        Constant(str(c["symbol"]), str(c["value"]), str(c.get("unit", "")))
        for c in raw.get("constants", []) or []
    )

    return Problem(
        id=str(_require(raw, "id", "manifest")),
        title=str(raw.get("title", "")),
        subparts=tuple(subparts),
        assets=tuple(assets),
        constants=constants,
    )


def load_rubric(path: Path | str) -> Rubric:
    """Load a rubric file; per-part declared totals must equal the point sums."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise RubricError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise RubricError(f"{path}: rubric must be a mapping")

    parts = []
    for entry in _require(raw, "parts", "rubric") or []:
        part_id = str(_require(entry, "id", "rubric part"))
        points = tuple(
            ScoringPoint(
                id=str(_require(p, "id", f"point in {part_id}")),
                description=str(p.get("description", "")),
                value=parse_points(_require(p, "value", f"point in {part_id}")),
            )
            for p in entry.get("points", []) or []
        )
        if not points:
            raise EmptyPart(part_id)
        parts.append(
            PartRubric(
                id=part_id,
                total=parse_points(_require(entry, "total", f"part {part_id}")),
                points=points,
            )
        )
    return Rubric(problem_id=str(_require(raw, "problem_id", "rubric")), parts=tuple(parts))


def validate_problem(problem: Problem, rubric: Rubric) -> list[Issue]:
    """Cross-check a problem against its rubric.

    Returns an empty list iff every rubric part id prefixes at least one
    subpart id and all asset files are readable. Issues are reported, never
    raised.
    """
    issues: list[Issue] = []
    for part in rubric.parts:
        if not any(sp.id == part.id or sp.id.startswith(part.id + ".") for sp in problem.subparts):
            issues.append(
                Issue(
                    kind=ISSUE_UNMATCHED_RUBRIC_PART,
                    subject=part.id,
                    message=f"rubric part {part.id} matches no subpart of {problem.id}",
                )
            )
    for asset in problem.assets:
        try:
            with open(asset.path, "rb") as fh:
                fh.read(1)
        except OSError as exc:
            issues.append(
                Issue(
                    kind=ISSUE_UNREADABLE_ASSET,
                    subject=asset.id,
                    message=f"asset {asset.id} unreadable: {exc}",
                )
            )
    return issues
