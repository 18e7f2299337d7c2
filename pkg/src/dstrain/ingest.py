"""Data ingestion: VOC annotation XML, class counts, and detection files.

Lets the fusion and metrics stacks run offline on the outputs of any external
detector. The detection interchange format is one whitespace-delimited record
per line (``image_id class_name score x_min y_min x_max y_max``) with an
equivalent JSON form for tooling.
"""

from __future__ import annotations

import json
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from xml.dom import minidom

from .errors import (
    InvalidBoxError,
    MalformedXmlError,
    MissingFieldError,
    OutOfRangeError,
    ParseError,
)
from .metrics import Box


@dataclass(frozen=True)
class VocObject:
    class_name: str
    box: Box
    difficult: bool = False


@dataclass(frozen=True)
class Annotation:
    image_id: str
    objects: tuple[VocObject, ...]


@dataclass(frozen=True)
class DetectionRecord:
    image_id: str
    class_name: str
    score: float
    box: Box

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise OutOfRangeError(f"score must lie in [0, 1], got {self.score!r}")


def _required_text(parent: ET.Element, path: str, context: str) -> str:
    node = parent.find(path)
    if node is None or node.text is None or not node.text.strip():
        raise MissingFieldError(f"missing field {context}/{path}")
    return node.text.strip()


def _box_from_bndbox(bndbox: ET.Element) -> Box:
    coords = {}
    for key in ("xmin", "ymin", "xmax", "ymax"):
        text = _required_text(bndbox, key, "object/bndbox")
        try:
            coords[key] = float(text)
        except ValueError:
            raise ParseError(f"object/bndbox/{key} is not numeric: {text!r}") from None
    if coords["xmin"] >= coords["xmax"] or coords["ymin"] >= coords["ymax"]:
        raise InvalidBoxError(
            f"invalid box: ({coords['xmin']}, {coords['ymin']}, "
            f"{coords['xmax']}, {coords['ymax']})"
        )
    return Box(coords["xmin"], coords["ymin"], coords["xmax"], coords["ymax"])


def parse_voc_annotation(xml_text: str) -> Annotation:
    """Parse one VOC annotation document; objects keep document order."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as err:
        raise MalformedXmlError(f"not well-formed XML: {err}") from None
    if root.tag != "annotation":
        raise MalformedXmlError(f"expected <annotation> root, got <{root.tag}>")
    image_id = _required_text(root, "filename", "annotation")
    objects = []
    for obj in root.findall("object"):
        name = _required_text(obj, "name", "object")
        bndbox = obj.find("bndbox")
        if bndbox is None:
            raise MissingFieldError("missing field object/bndbox")
        difficult_node = obj.find("difficult")
        difficult = (
            difficult_node is not None
            and (difficult_node.text or "").strip() == "1"
        )
        objects.append(VocObject(name, _box_from_bndbox(bndbox), difficult))
    return Annotation(image_id, tuple(objects))


def serialize_voc_annotation(annotation: Annotation) -> str:
    """Minimal VOC XML for an Annotation; parses back to an equal value."""
    root = ET.Element("annotation")
    ET.SubElement(root, "filename").text = annotation.image_id
    for obj in annotation.objects:
        node = ET.SubElement(root, "object")
        ET.SubElement(node, "name").text = obj.class_name
        ET.SubElement(node, "difficult").text = "1" if obj.difficult else "0"
        bnd = ET.SubElement(node, "bndbox")
        ET.SubElement(bnd, "xmin").text = repr(obj.box.x_min)
        ET.SubElement(bnd, "ymin").text = repr(obj.box.y_min)
        ET.SubElement(bnd, "xmax").text = repr(obj.box.x_max)
        ET.SubElement(bnd, "ymax").text = repr(obj.box.y_max)
    return minidom.parseString(ET.tostring(root)).toprettyxml(indent="  ")


def load_voc_directory(directory: str) -> list[Annotation]:
    """Parse every .xml file in a directory, sorted by filename."""
    annotations = []
    for name in sorted(os.listdir(directory)):
        if not name.endswith(".xml"):
            continue
        with open(os.path.join(directory, name), encoding="utf-8") as fh:
            annotations.append(parse_voc_annotation(fh.read()))
    return annotations


def class_instance_counts(
    annotations, include_difficult: bool = True
) -> dict[str, int]:
    """Total object instances per class name across the given annotations."""
    counts: dict[str, int] = {}
    for annotation in annotations:
        for obj in annotation.objects:
            if not include_difficult and obj.difficult:
                continue
            counts[obj.class_name] = counts.get(obj.class_name, 0) + 1
    return counts


def _record_from_fields(fields: list[str], where: str) -> DetectionRecord:
    if len(fields) != 7:
        raise ParseError(f"{where}: expected 7 fields, got {len(fields)}")
    image_id, class_name = fields[0], fields[1]
    try:
        score, x_min, y_min, x_max, y_max = (float(v) for v in fields[2:])
    except ValueError:
        raise ParseError(f"{where}: non-numeric field") from None
    if x_min >= x_max or y_min >= y_max:
        raise InvalidBoxError(f"{where}: invalid box")
    return DetectionRecord(image_id, class_name, score, Box(x_min, y_min, x_max, y_max))


def load_detections(text: str, fmt: str = "auto") -> list[DetectionRecord]:
    """Load detection records from delimited text or the JSON equivalent."""
    if fmt == "auto":
        stripped = text.lstrip()
        fmt = "json" if stripped.startswith("[") else "text"
    if fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ParseError(f"invalid JSON detections: {err}") from None
        records = []
        for i, entry in enumerate(data):
            try:
                box = entry["box"]
                fields = [
                    str(entry["image_id"]), str(entry["class_name"]),
                    str(entry["score"]),
                    str(box[0]), str(box[1]), str(box[2]), str(box[3]),
                ]
            except (KeyError, TypeError, IndexError) as err:
                raise ParseError(f"record {i}: missing field {err}") from None
            records.append(_record_from_fields(fields, f"record {i}"))
        return records
    if fmt != "text":
        raise ParseError(f"unknown detections format {fmt!r}")
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        records.append(_record_from_fields(line.split(), f"line {lineno}"))
    return records


def serialize_detections(records, fmt: str = "text") -> str:
    """Write records back out; load(serialize(x)) == x."""
    if fmt == "text":
        lines = [
            f"{r.image_id} {r.class_name} {r.score!r} "
            f"{r.box.x_min!r} {r.box.y_min!r} {r.box.x_max!r} {r.box.y_max!r}"
            for r in records
        ]
        return "\n".join(lines) + ("\n" if lines else "")
    if fmt == "json":
        return json.dumps(
            [
                {
                    "image_id": r.image_id,
                    "class_name": r.class_name,
                    "score": r.score,
                    "box": [r.box.x_min, r.box.y_min, r.box.x_max, r.box.y_max],
                }
                for r in records
            ],
            indent=2,
        ) + "\n"
    raise ParseError(f"unknown detections format {fmt!r}")
