"""The packet-program IR: field paths, value expressions, instructions,
and the sender/receiver function units that group them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class FieldPath:
    layer: str          # "ip", "icmp", ... or "state"
    name: str           # normalized field name, dotted for state vars

    def __str__(self) -> str:
        return f"{self.layer}.{self.name}"


# -- value expressions -------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class FieldRef:
    path: FieldPath                 # read from the packet being built


@dataclass(frozen=True)
class InputField:
    path: FieldPath                 # read from the received packet


@dataclass(frozen=True)
class ProviderRef:
    key: str                        # OS/clock/address provider value


@dataclass(frozen=True)
class OriginalData:
    """The received datagram's IP header plus its first n payload bits."""
    include_header: bool = True
    payload_bits: int = 64


ValueExpr = Union[Const, FieldRef, InputField, ProviderRef, OriginalData]


# -- conditions ---------------------------------------------------------------


@dataclass(frozen=True)
class Compare:
    lhs: ValueExpr
    op: str                         # == != >= <= > <
    rhs: ValueExpr


@dataclass(frozen=True)
class AnyOf:
    operands: tuple                 # disjunction of conditions


@dataclass(frozen=True)
class AllOf:
    operands: tuple


CondExpr = Union[Compare, AnyOf, AllOf]


# -- checksum range ------------------------------------------------------------

END_OF_MESSAGE = "end_of_message"
END_OF_HEADER = "end_of_header"


@dataclass(frozen=True)
class ChecksumRange:
    start: FieldPath                # anchor: checksum covers from this field on
    end: str = END_OF_MESSAGE      # end_of_message | end_of_header | bytes:<n>

    def fixed_bytes(self) -> Optional[int]:
        if self.end.startswith("bytes:"):
            return int(self.end.split(":", 1)[1])
        return None


# -- instructions ---------------------------------------------------------------


@dataclass(frozen=True)
class SetField:
    path: FieldPath
    value: ValueExpr


@dataclass(frozen=True)
class CopyField:
    dst: FieldPath
    src: ValueExpr


@dataclass(frozen=True)
class SwapFields:
    a: FieldPath
    b: FieldPath


@dataclass(frozen=True)
class ComputeChecksum:
    dst: FieldPath
    range: ChecksumRange


@dataclass(frozen=True)
class If:
    cond: CondExpr
    then: tuple                     # tuple[Instruction, ...]


@dataclass(frozen=True)
class Call:
    function: str
    args: tuple = ()


@dataclass(frozen=True)
class Comment:
    text: str


Instruction = Union[SetField, CopyField, SwapFields, ComputeChecksum, If,
                    Call, Comment]


# -- units and program -----------------------------------------------------------


@dataclass
class FunctionUnit:
    name: str                       # protocol_message_role
    protocol: str
    message: str
    role: str                       # "sender" | "receiver"
    body: list = field(default_factory=list)
    advice_before: list = field(default_factory=list)

    def instructions(self) -> list:
        return list(self.advice_before) + list(self.body)


@dataclass
class PacketProgram:
    units: dict = field(default_factory=dict)     # name -> FunctionUnit
    layouts: list = field(default_factory=list)   # HeaderLayout list

    def unit_names(self) -> list[str]:
        return sorted(self.units)
