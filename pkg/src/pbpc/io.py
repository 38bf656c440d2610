"""Instance files, run manifests, and atomic file output."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable

from pbpc.errors import InvalidInputError, ValidationError
from pbpc.market import MarketInstance, Producer, validate_instance

FORMAT_VERSION = 1


def _exact(value: Any, what: str) -> Fraction:
    """Parse a supply given as [num, den], an int, a "p/q" or decimal string, or a JSON number."""
    try:
        if isinstance(value, list) and len(value) == 2 and all(isinstance(v, int) for v in value):
            return Fraction(value[0], value[1])
        if isinstance(value, bool):
            raise TypeError
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, float):
            # repr gives the shortest decimal that round-trips, so 0.3 -> 3/10
            return Fraction(Decimal(repr(value)))
        if isinstance(value, str):
            return Fraction(value.strip())
    except (ZeroDivisionError, ValueError, TypeError, InvalidOperation):
        pass
    raise InvalidInputError(f"{what}: cannot read {value!r} as an exact number")


def _cost(value: Any, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise InvalidInputError(f"{what}: cost {value!r} is not an integer")
    q = _exact(value, what)
    if q.denominator != 1:
        raise InvalidInputError(f"{what}: cost {value!r} is not an integer")
    return int(q)


def instance_to_dict(inst: MarketInstance) -> dict:
    return {
        "format": FORMAT_VERSION,
        "name": inst.name,
        "max_bid": inst.max_bid,
        "producers": [
            {"supply": [p.supply.numerator, p.supply.denominator], "cost": p.cost}
            for p in inst.producers
        ],
    }


def instance_from_dict(data: Any, validate: bool = True) -> MarketInstance:
    """Read an instance; every validation problem is reported in one :class:`ValidationError`."""
    if not isinstance(data, dict):
        raise InvalidInputError("instance file must hold a JSON object")
    missing = [k for k in ("max_bid", "producers") if k not in data]
    if missing:
        raise InvalidInputError(f"instance is missing {', '.join(missing)}")
    if not isinstance(data["producers"], list):
        raise InvalidInputError("producers must be a list")
    max_bid = _cost(data["max_bid"], "max_bid")
    producers = []
    for i, entry in enumerate(data["producers"]):
        what = f"producer {i}"
        if isinstance(entry, list) and len(entry) == 3:
            supply, cost = _exact(entry[:2], what), _cost(entry[2], what)
        elif isinstance(entry, dict) and {"supply", "cost"} <= entry.keys():
            supply, cost = _exact(entry["supply"], what), _cost(entry["cost"], what)
        else:
            raise InvalidInputError(
                f"{what}: expected {{supply, cost}} or [numerator, denominator, cost]"
            )
        producers.append(Producer(supply, cost))
    inst = MarketInstance(str(data.get("name", "instance")), max_bid, tuple(producers))
    if validate:
        report = validate_instance(inst)
        if not report.ok:
            raise ValidationError(list(report.problems))
    return inst


def canonical_json(inst: MarketInstance) -> str:
    return json.dumps(instance_to_dict(inst), sort_keys=True, separators=(",", ":"))


def instance_digest(inst: MarketInstance) -> str:
    """Stable sha256 of the instance content. The name is excluded."""
    data = instance_to_dict(inst)
    del data["name"]
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def save_instance(inst: MarketInstance, path: str | os.PathLike) -> Path:
    return atomic_write_text(path, json.dumps(instance_to_dict(inst), indent=2) + "\n")


def load_instance(path: str | os.PathLike) -> MarketInstance:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return instance_from_dict(data)


def write_csv(path: str | os.PathLike, lines: Iterable[str]) -> Path:
    return atomic_write_text(path, "".join(line + "\n" for line in lines))


def load_profile(path: str | os.PathLike) -> list:
    """Read a bid profile: a list of ints (pure) or of ``{bid: probability}`` maps (mixed).

    Mixed probabilities use the same exact formats as supplies.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON ({exc.msg})") from None
    if isinstance(data, dict):
        data = data.get("profile", data.get("bids"))
    if not isinstance(data, list) or not data:
        raise InvalidInputError(f"{path}: profile must be a non-empty list")
    if all(isinstance(b, int) and not isinstance(b, bool) for b in data):
        return data
    if all(isinstance(d, dict) for d in data):
        out = []
        for i, d in enumerate(data):
            try:
                out.append({int(b): _exact(w, f"agent {i}") for b, w in d.items()})
            except ValueError:
                raise InvalidInputError(f"agent {i}: bids must be integers") from None
        return out
    raise InvalidInputError(f"{path}: profile entries must be all ints or all objects")


@dataclass
class RunManifest:
    tool_version: str
    instance_name: str
    instance_digest: str
    instance: dict
    config: dict
    seed: int | None
    started: str
    finished: str = ""
    outputs: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"
