# =============================================================================
# Stakhanov Output
# =============================================================================
#
# Emission of tidy CSV tables and JSON summaries. Every file starts with the
# metadata of the run (version, config hash, seed) so outputs can be traced
# back to the configuration that produced them.
#
from typing import Iterable, Optional, Sequence, Any, Dict

import json
import casanova
from os import makedirs
from os.path import join
from dataclasses import dataclass, field
from casanova import TabularRecord
from casanova.utils import ensure_open

from stakhanov.types import JSONDict

METADATA_PREFIX = "#"

# Undefined values, e.g. a relative presence index without any woman
UNDEFINED_VALUE = "-"


class OutputRecord(TabularRecord):
    _serializer_options = {
        **TabularRecord._serializer_options,
        "none_value": UNDEFINED_VALUE,
    }


@dataclass
class RunMetadata:
    version: str
    config_hash: str
    seed: int
    share_basis: Optional[str] = None
    overrides: Dict[str, Any] = field(default_factory=dict)

    def as_comment(self) -> str:
        return "%sstakhanov_version=%s;config_hash=%s;seed=%i" % (
            METADATA_PREFIX,
            self.version,
            self.config_hash,
            self.seed,
        )

    def as_dict(self) -> JSONDict:
        d = {
            "stakhanov_version": self.version,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "overrides": self.overrides,
        }

        if self.share_basis is not None:
            d["share_basis"] = self.share_basis

        return d


class OutputDirectory(object):
    def __init__(self, path: str, metadata: RunMetadata):
        self.path = path
        self.metadata = metadata
        self.written = []

        makedirs(path, exist_ok=True)

    def write_csv(
        self, name: str, fieldnames: Sequence[str], rows: Iterable
    ) -> str:
        target = join(self.path, name)

        with ensure_open(target, mode="w", newline="") as f:
            f.write(self.metadata.as_comment() + "\n")
            writer = casanova.InferringWriter(
                f,
                fieldnames=list(fieldnames),
                none_value=UNDEFINED_VALUE,
                lineterminator="\n",
            )
            writer.writerows(rows)

        self.written.append(name)
        return target

    def write_records(self, name: str, record_class, records: Iterable) -> str:
        return self.write_csv(name, record_class.fieldnames(), records)

    def write_json(self, name: str, data: JSONDict) -> str:
        target = join(self.path, name)

        payload = {"metadata": self.metadata.as_dict(), **data}

        with ensure_open(target, mode="w", newline="") as f:
            json.dump(payload, f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write("\n")

        self.written.append(name)
        return target

