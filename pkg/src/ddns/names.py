"""Domain names, ledger asset paths and the binding between them.

DNS names are lowercase and least-specific-last (``www.xxx.ddns``).  On the
ledger the same name is an uppercase asset path rooted at the top-level name with the
subdomain labels appended most-specific-last (``XXX/WWW``).  The root suffix
itself (``ddns``) is implied and never stored.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .cid import SENTINEL_DEACTIVATED, SENTINEL_INITIAL, is_valid_cid
from .errors import (
    EmptyLabel,
    IllegalCharacter,
    InvalidCid,
    NotDdnsName,
    RootTooLong,
    SubpathTooLong,
    TooLong,
    ValidationFailure,
)

DEFAULT_ROOT_SUFFIX = "ddns"

MAX_LABEL_LEN = 63
MAX_NAME_LEN = 253
MAX_ROOT_LEN = 32
MAX_SUBPATH_LEN = 30

_LABEL_RE = re.compile(r"^[a-z0-9](?:[a-z0-9-]*[a-z0-9])?$")
# Lenient labels come off the wire for names we only forward; anything
# printable except the separator is tolerated there.
_LENIENT_LABEL_RE = re.compile(r"^[\x21-\x2d\x2f-\x7e]+$")
_ASSET_SEGMENT_RE = re.compile(r"^[A-Z0-9._]+$")


@dataclass(frozen=True)
class DomainName:
    labels: tuple[str, ...]

    def __str__(self) -> str:
        return ".".join(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def tld(self) -> str:
        return self.labels[-1]

    def is_under(self, suffix: str) -> bool:
        return bool(self.labels) and self.labels[-1] == suffix.lower()


def parse_domain_name(text: str, *, strict: bool = True) -> DomainName:
    """Split ``text`` into lowercase labels.

    With ``strict`` (the default) every label must be a hostname label:
    ``[a-z0-9-]``, 1-63 characters, no leading or trailing hyphen.  Non-strict
    parsing only enforces lengths and is used for names received off the wire
    that are merely forwarded upstream (``_dmarc.example.com`` and friends).
    """
    if not text:
        raise EmptyLabel("empty domain name")
    if text.endswith("."):
        text = text[:-1]
        if not text:
            raise EmptyLabel("empty domain name")
    if len(text) > MAX_NAME_LEN:
        raise TooLong(f"name is {len(text)} characters, limit {MAX_NAME_LEN}")
    labels = tuple(text.lower().split("."))
    pattern = _LABEL_RE if strict else _LENIENT_LABEL_RE
    for label in labels:
        if not label:
            raise EmptyLabel(f"empty label in {text!r}")
        if len(label) > MAX_LABEL_LEN:
            raise TooLong(f"label {label!r} exceeds {MAX_LABEL_LEN} characters")
        if not pattern.match(label):
            raise IllegalCharacter(f"label {label!r} has illegal characters")
    return DomainName(labels)


@dataclass(frozen=True)
class AssetPath:
    root: str
    subpath: tuple[str, ...] = ()

    def __str__(self) -> str:
        return "/".join((self.root, *self.subpath))

    @property
    def is_root(self) -> bool:
        return not self.subpath

    @property
    def parent(self) -> AssetPath | None:
        if not self.subpath:
            return None
        return AssetPath(self.root, self.subpath[:-1])

    def child(self, segment: str) -> AssetPath:
        return AssetPath(self.root, (*self.subpath, segment.upper()))

    @classmethod
    def parse(cls, text: str) -> AssetPath:
        """Parse ``ROOT/SEG/...`` and validate it."""
        root, *rest = text.split("/")
        path = cls(root, tuple(rest))
        validate_asset_path(path)
        return path


def validate_asset_path(path: AssetPath) -> None:
    """Raise a :class:`ValidationFailure` subclass unless ``path`` is legal."""
    if not path.root:
        raise EmptyLabel("asset root is empty")
    for seg in (path.root, *path.subpath):
        if not seg:
            raise EmptyLabel(f"empty segment in {path}")
        if not _ASSET_SEGMENT_RE.match(seg):
            raise IllegalCharacter(f"asset segment {seg!r} has illegal characters")
    if len(path.root) > MAX_ROOT_LEN:
        raise RootTooLong(f"root {path.root!r} is {len(path.root)} characters, limit {MAX_ROOT_LEN}")
    sub_len = sum(len(seg) for seg in path.subpath)
    if sub_len > MAX_SUBPATH_LEN:
        raise SubpathTooLong(f"subpath of {path} is {sub_len} characters, limit {MAX_SUBPATH_LEN}")


def domain_to_asset_path(name: DomainName, root_suffix: str = DEFAULT_ROOT_SUFFIX) -> AssetPath:
    """``www.xxx.ddns`` -> ``XXX/WWW``; ``a.b.xxx.ddns`` -> ``XXX/B/A``."""
    if not name.is_under(root_suffix):
        raise NotDdnsName(f"{name} is not under .{root_suffix}")
    if len(name) < 2:
        raise NotDdnsName(f"{name} is the bare root suffix")
    rest = name.labels[:-1]
    path = AssetPath(rest[-1].upper(), tuple(label.upper() for label in reversed(rest[:-1])))
    validate_asset_path(path)
    return path


def asset_path_to_domain(path: AssetPath, root_suffix: str = DEFAULT_ROOT_SUFFIX) -> DomainName:
    validate_asset_path(path)
    labels = (*(seg.lower() for seg in reversed(path.subpath)), path.root.lower(), root_suffix)
    return parse_domain_name(".".join(labels))


class BindingState(enum.Enum):
    INITIAL = "initial"
    ACTIVE = "active"
    DEACTIVATED = "deactivated"


@dataclass(frozen=True)
class Binding:
    """Current association of an asset with a record file.

    The two sentinel hashes used on the ledger are states here, not content
    ids; :attr:`ledger_text` produces the on-ledger representation.
    """

    state: BindingState
    cid: str | None = None

    def __post_init__(self) -> None:
        if self.state is BindingState.ACTIVE:
            if self.cid is None or not is_valid_cid(self.cid):
                raise InvalidCid(f"not a valid content id: {self.cid!r}")
        elif self.cid is not None:
            raise ValidationFailure(f"{self.state.value} binding carries no cid")

    @classmethod
    def initial(cls) -> Binding:
        return cls(BindingState.INITIAL)

    @classmethod
    def active(cls, cid: str) -> Binding:
        return cls(BindingState.ACTIVE, cid)

    @classmethod
    def deactivated(cls) -> Binding:
        return cls(BindingState.DEACTIVATED)

    @property
    def ledger_text(self) -> str:
        if self.state is BindingState.INITIAL:
            return SENTINEL_INITIAL
        if self.state is BindingState.DEACTIVATED:
            return SENTINEL_DEACTIVATED
        assert self.cid is not None
        return self.cid

    @classmethod
    def from_ledger_text(cls, text: str) -> Binding:
        if text == SENTINEL_INITIAL:
            return cls.initial()
        if text == SENTINEL_DEACTIVATED:
            return cls.deactivated()
        return cls.active(text)

    def __str__(self) -> str:
        return self.ledger_text
