"""Minimal EXIF reader for focal-length tags.

Walks JPEG segments to the APP1 ``Exif`` block (or accepts a bare TIFF
stream), then IFD0 and the Exif sub-IFD.  Every read is bounds-checked
against the supplied buffer; malformed input raises :class:`ExifError`.
"""

import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from ..errors import InputError

TAG_IMAGE_WIDTH = 0x0100
TAG_MAKE = 0x010F
TAG_MODEL = 0x0110
TAG_EXIF_IFD = 0x8769
TAG_FOCAL_LENGTH = 0x920A
TAG_PIXEL_X_DIMENSION = 0xA002
TAG_FOCAL_35MM = 0xA405

TYPE_BYTE, TYPE_ASCII, TYPE_SHORT, TYPE_LONG, TYPE_RATIONAL = 1, 2, 3, 4, 5
TYPE_SIZES = {1: 1, 2: 1, 3: 2, 4: 4, 5: 8, 6: 1, 7: 1, 8: 2, 9: 4, 10: 8, 11: 4, 12: 8}

MAX_IFD_ENTRIES = 4096


class ExifError(InputError):
    """Parse failure; ``code`` names the cause."""

    NOT_IMAGE = "not_image"
    NO_EXIF = "no_exif"
    BAD_HEADER = "bad_header"
    BAD_OFFSET = "bad_offset"
    ZERO_DENOMINATOR = "zero_denominator"
    MISSING_FOCAL = "missing_focal"

    def __init__(self, code, message):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class FocalMetadata:
    focal_length_mm: tuple  # (numerator, denominator)
    focal_35mm_equiv: Optional[int] = None
    image_width_px: Optional[int] = None
    make: Optional[str] = None
    model: Optional[str] = None

    @property
    def focal_mm(self):
        num, den = self.focal_length_mm
        return num / den

    @property
    def focal_fraction(self):
        return Fraction(*self.focal_length_mm)


class _Reader:
    def __init__(self, buf, order):
        self.buf = buf
        self.order = order

    def _unpack(self, fmt, offset):
        size = struct.calcsize(fmt)
        if offset < 0 or offset + size > len(self.buf):
            raise ExifError(ExifError.BAD_OFFSET,
                            f"read of {size} bytes at {offset} exceeds {len(self.buf)}")
        return struct.unpack_from(self.order + fmt, self.buf, offset)[0]

    def u16(self, offset):
        return self._unpack("H", offset)

    def u32(self, offset):
        return self._unpack("I", offset)

    def bytes_at(self, offset, n):
        if offset < 0 or n < 0 or offset + n > len(self.buf):
            raise ExifError(ExifError.BAD_OFFSET, f"range {offset}+{n} out of bounds")
        return self.buf[offset:offset + n]


def find_tiff(data):
    """Return the TIFF stream embedded in JPEG ``data`` or ``data`` itself."""
    data = bytes(data)
    if data[:4] in (b"II*\x00", b"MM\x00*"):
        return data
    if data[:6] == b"Exif\x00\x00":
        return data[6:]
    if data[:2] != b"\xff\xd8":
        raise ExifError(ExifError.NOT_IMAGE, "neither a JPEG stream nor a TIFF header")
    pos = 2
    n = len(data)
    while pos + 4 <= n:
        if data[pos] != 0xFF:
            raise ExifError(ExifError.NO_EXIF, f"lost segment sync at byte {pos}")
        marker = data[pos + 1]
        if marker == 0xFF:
            # fill byte
            pos += 1
            continue
        if marker in (0xD9, 0xDA):
            break
        if 0xD0 <= marker <= 0xD7 or marker == 0x01:
            pos += 2
            continue
        length = int.from_bytes(data[pos + 2:pos + 4], "big")
        if length < 2 or pos + 2 + length > n:
            raise ExifError(ExifError.NO_EXIF, f"truncated segment 0x{marker:02X} at {pos}")
        payload = data[pos + 4:pos + 2 + length]
        if marker == 0xE1 and payload[:6] == b"Exif\x00\x00":
            return payload[6:]
        pos += 2 + length
    raise ExifError(ExifError.NO_EXIF, "no APP1 Exif segment")


def _read_ifd(reader, offset):
    """Map tag -> (type, count, value_offset) for one IFD."""
    count = reader.u16(offset)
    if count > MAX_IFD_ENTRIES:
        raise ExifError(ExifError.BAD_OFFSET, f"implausible IFD entry count {count}")
    entries = {}
    for k in range(count):
        base = offset + 2 + 12 * k
        tag = reader.u16(base)
        typ = reader.u16(base + 2)
        n = reader.u32(base + 4)
        size = TYPE_SIZES.get(typ, 0) * n
        # values of 4 bytes or less are stored inline
        value_offset = base + 8 if size <= 4 else reader.u32(base + 8)
        entries.setdefault(tag, (typ, n, value_offset))
    return entries


def _short_or_long(reader, entry):
    typ, n, off = entry
    if n < 1:
        return None
    if typ == TYPE_SHORT:
        return reader.u16(off)
    if typ == TYPE_LONG:
        return reader.u32(off)
    return None


def _ascii(reader, entry):
    typ, n, off = entry
    if typ != TYPE_ASCII or n == 0:
        return None
    raw = reader.bytes_at(off, n).split(b"\x00", 1)[0]
    return raw.decode("latin-1").strip() or None


def parse_exif_focal(data):
    """Extract focal-length metadata from JPEG or TIFF bytes.

    Raises
    ------
    ExifError
        ``code`` is one of ``not_image``, ``no_exif``, ``bad_header``,
        ``bad_offset``, ``zero_denominator`` or ``missing_focal``.
    """
    tiff = find_tiff(data)
    if len(tiff) < 8:
        raise ExifError(ExifError.BAD_HEADER, "TIFF header shorter than 8 bytes")
    if tiff[:2] == b"II":
        order = "<"
    elif tiff[:2] == b"MM":
        order = ">"
    else:
        raise ExifError(ExifError.BAD_HEADER, f"unknown byte order {tiff[:2]!r}")
    reader = _Reader(tiff, order)
    if reader.u16(2) != 42:
        raise ExifError(ExifError.BAD_HEADER, "bad TIFF magic")
    ifd0 = _read_ifd(reader, reader.u32(4))

    make = _ascii(reader, ifd0[TAG_MAKE]) if TAG_MAKE in ifd0 else None
    model = _ascii(reader, ifd0[TAG_MODEL]) if TAG_MODEL in ifd0 else None
    width = _short_or_long(reader, ifd0[TAG_IMAGE_WIDTH]) if TAG_IMAGE_WIDTH in ifd0 else None

    if TAG_EXIF_IFD not in ifd0:
        raise ExifError(ExifError.MISSING_FOCAL, "no Exif sub-IFD")
    exif_ptr = _short_or_long(reader, ifd0[TAG_EXIF_IFD])
    if exif_ptr is None:
        raise ExifError(ExifError.BAD_OFFSET, "Exif IFD pointer has wrong type")
    exif = _read_ifd(reader, exif_ptr)

    entry = exif.get(TAG_FOCAL_LENGTH)
    if entry is None:
        raise ExifError(ExifError.MISSING_FOCAL, "FocalLength tag absent")
    typ, n, off = entry
    if typ != TYPE_RATIONAL or n < 1:
        raise ExifError(ExifError.MISSING_FOCAL, "FocalLength tag is not a RATIONAL")
    num, den = reader.u32(off), reader.u32(off + 4)
    if den == 0:
        raise ExifError(ExifError.ZERO_DENOMINATOR, "FocalLength denominator is zero")
    if num == 0:
        raise ExifError(ExifError.MISSING_FOCAL, "FocalLength is zero (unknown)")

    f35 = None
    if TAG_FOCAL_35MM in exif:
        f35 = _short_or_long(reader, exif[TAG_FOCAL_35MM]) or None
    if TAG_PIXEL_X_DIMENSION in exif:
        width = _short_or_long(reader, exif[TAG_PIXEL_X_DIMENSION]) or width
    return FocalMetadata((num, den), f35, width or None, make, model)
