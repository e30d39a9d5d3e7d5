import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass

from . import __version__


@dataclass(frozen=True)
class RunStamp:
    tool_version: str
    config_digest: str
    seed: int
    created_utc: str

    def to_dict(self):
        return asdict(self)


def config_digest(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def make_stamp(config, seed):
    """Stamp an output. ``SOURCE_DATE_EPOCH`` pins the timestamp for reproducible reruns."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else time.time()
    created = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))
    return RunStamp(__version__, config_digest(config), int(seed), created)
