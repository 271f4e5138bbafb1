"""
Plain-XML Reading Helpers

Shared by the scenario, demand, detector and signal parsers. Errors are
raised as XMLParseError (not well-formed) or SchemaError (missing or
invalid attribute) so that every parser reports problems the same way.
"""

import re
import xml.etree.ElementTree as ET
from typing import Any, Callable, Dict, Iterable, Optional, Type, TypeVar

from pydantic import BaseModel, ValidationError

from vanetsim.exceptions import SchemaError, XMLParseError

M = TypeVar("M", bound=BaseModel)

_DECLARATION = re.compile(r"^\s*<\?xml[^>]*\?>", re.IGNORECASE)
_FRAGMENT_ROOT = "fragment"


def parse_document(text: str, source: str, fragment: bool = False) -> ET.Element:
    """
    Parse an XML document and return its root element.

    Args:
        text: Document text
        source: Name used in error messages (usually the file path)
        fragment: Accept several top-level elements (as in bare tlLogic listings)
            by wrapping them in a synthetic root

    Raises:
        XMLParseError: If the text is not well-formed
    """
    body = text
    if fragment:
        body = f"<{_FRAGMENT_ROOT}>{_DECLARATION.sub('', text, count=1)}</{_FRAGMENT_ROOT}>"
    try:
        return ET.fromstring(body)
    except ET.ParseError as exc:
        line, column = exc.position
        reason = str(exc).split(":")[0]
        raise XMLParseError(source, line, column, reason) from exc


def require_attr(element: ET.Element, name: str, source: Optional[str] = None) -> str:
    value = element.get(name)
    if value is None:
        raise SchemaError(element.tag, name, "missing required attribute", source)
    return value


def read_number(
    element: ET.Element,
    name: str,
    source: Optional[str] = None,
    default: Any = None,
    cast: Callable[[str], Any] = float,
    required: bool = False,
) -> Any:
    """
    Read a numeric attribute.

    Returns ``default`` when the attribute is absent and not required.

    Raises:
        SchemaError: If the attribute is required and missing, or not a number
    """
    raw = element.get(name)
    if raw is None:
        if required:
            raise SchemaError(element.tag, name, "missing required attribute", source)
        return default
    try:
        return cast(raw.strip())
    except ValueError:
        kind = "an integer" if cast is int else "a number"
        raise SchemaError(element.tag, name, f"expected {kind}, got '{raw}'", source)


def split_ids(raw: str) -> list:
    """Split a whitespace separated id list (``edges="a b c"``)."""
    return raw.split()


def build_model(
    model_cls: Type[M],
    element: str,
    source: Optional[str],
    attr_names: Optional[Dict[str, str]] = None,
    default_attr: str = "*",
    **values: Any,
) -> M:
    """
    Construct a pydantic model from attribute values, reporting failures as SchemaError.

    Args:
        model_cls: Model to build
        element: Element name for the error message
        source: File name for the error message
        attr_names: Mapping from model field names to XML attribute names
        default_attr: Attribute blamed for model-level validation errors
        **values: Field values

    Raises:
        SchemaError: Naming the element and attribute of the first validation error
    """
    try:
        return model_cls(**values)
    except ValidationError as exc:
        error = exc.errors()[0]
        loc = error.get("loc") or ()
        field = str(loc[0]) if loc else ""
        attribute = (attr_names or {}).get(field, field) or default_attr
        reason = str(error.get("msg", "invalid value"))
        reason = reason.removeprefix("Value error, ")
        raise SchemaError(element, attribute, reason, source) from exc


def to_document(root_tag: str, children: Iterable[ET.Element]) -> str:
    """Serialize elements under a new root as an indented document."""
    root = ET.Element(root_tag)
    root.extend(children)
    ET.indent(root, space="    ")
    return ET.tostring(root, encoding="unicode") + "\n"


def fmt(value: float) -> str:
    """Attribute text for a number; integral floats keep their trailing .0."""
    return repr(float(value))
