"""File-backed IP -> GeoInfo resolution with longest-prefix matching.

The database is a CSV with header ``cidr,country,lat,lon,is_vpn,asn``; rows are
hand-authorable, which keeps test fixtures trivial to write and diff.
"""

from __future__ import annotations

import csv
import ipaddress
import logging
from dataclasses import dataclass
from pathlib import Path

from .types import GeoInfo, GeoPoint, UNKNOWN_GEO

log = logging.getLogger(__name__)

CSV_HEADER = ["cidr", "country", "lat", "lon", "is_vpn", "asn"]

_Network = ipaddress.IPv4Network | ipaddress.IPv6Network


class GeoIpDbError(ValueError):
    """Raised when the database file is missing or malformed."""


@dataclass(frozen=True)
class GeoIpRecord:
    cidr: _Network
    country: str
    latitude: float
    longitude: float
    is_vpn: bool
    asn: int

    def to_geo_info(self) -> GeoInfo:
        return GeoInfo(
            point=GeoPoint(self.latitude, self.longitude),
            country=self.country,
            is_vpn=self.is_vpn,
            asn=self.asn,
        )


def _parse_bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no", ""):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


class GeoIpProvider:
    """Read-only lookup index over a loaded record set.

    Records are bucketed by (ip version, prefix length); lookups probe prefix
    lengths from most to least specific, so the longest match always wins.
    """

    def __init__(self, records: list[GeoIpRecord]):
        self._records = list(records)
        self._index: dict[tuple[int, int], dict[int, GeoIpRecord]] = {}
        seen: dict[_Network, GeoIpRecord] = {}
        for rec in records:
            if rec.cidr in seen:
                log.warning("duplicate CIDR %s: last record wins", rec.cidr)
            seen[rec.cidr] = rec
        for rec in seen.values():
            key = (rec.cidr.version, rec.cidr.prefixlen)
            self._index.setdefault(key, {})[int(rec.cidr.network_address)] = rec
        self._prefixes_by_version: dict[int, list[int]] = {}
        for version, prefixlen in self._index:
            self._prefixes_by_version.setdefault(version, []).append(prefixlen)
        for lens in self._prefixes_by_version.values():
            lens.sort(reverse=True)

    @property
    def record_count(self) -> int:
        return len(self._records)

    def lookup(self, ip: str) -> GeoInfo:
        """Resolve an IP to GeoInfo; unknown IPs map to the ZZ/(0,0) sentinel."""
        addr = ipaddress.ip_address(ip)
        max_len = addr.max_prefixlen
        addr_int = int(addr)
        for prefixlen in self._prefixes_by_version.get(addr.version, ()):
            mask = ((1 << prefixlen) - 1) << (max_len - prefixlen) if prefixlen else 0
            rec = self._index[(addr.version, prefixlen)].get(addr_int & mask)
            if rec is not None:
                return rec.to_geo_info()
        return UNKNOWN_GEO


def parse_geoip_row(row: list[str], line_no: int) -> GeoIpRecord:
    if len(row) != len(CSV_HEADER):
        raise GeoIpDbError(f"line {line_no}: expected {len(CSV_HEADER)} columns, got {len(row)}")
    cidr_raw, country, lat_raw, lon_raw, vpn_raw, asn_raw = row
    try:
        cidr = ipaddress.ip_network(cidr_raw.strip(), strict=False)
        lat = float(lat_raw)
        lon = float(lon_raw)
        is_vpn = _parse_bool(vpn_raw)
        asn = int(asn_raw) if asn_raw.strip() else 0
    except ValueError as exc:
        raise GeoIpDbError(f"line {line_no}: {exc}") from exc
    if not -90.0 <= lat <= 90.0:
        raise GeoIpDbError(f"line {line_no}: latitude {lat} outside [-90, 90]")
    if not -180.0 <= lon <= 180.0:
        raise GeoIpDbError(f"line {line_no}: longitude {lon} outside [-180, 180]")
    country = country.strip().upper()
    if not (len(country) == 2 and country.isalpha()):
        raise GeoIpDbError(f"line {line_no}: country {country!r} is not ISO-3166 alpha-2")
    return GeoIpRecord(cidr=cidr, country=country, latitude=lat, longitude=lon,
                       is_vpn=is_vpn, asn=asn)


def load_geoip_db(path: str | Path) -> GeoIpProvider:
    """Load a CSV database; malformed rows fail fast with their line number."""
    path = Path(path)
    if not path.exists():
        raise GeoIpDbError(f"geoip database not found: {path}")
    records: list[GeoIpRecord] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if line_no == 1:
                if [c.strip() for c in row] != CSV_HEADER:
                    raise GeoIpDbError(
                        f"line 1: header must be exactly {','.join(CSV_HEADER)}"
                    )
                continue
            records.append(parse_geoip_row(row, line_no))
    provider = GeoIpProvider(records)
    log.info("loaded %d geoip records from %s", provider.record_count, path)
    return provider
