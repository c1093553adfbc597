import os
import shutil
import logging
import zipfile
import urllib.request
from urllib.error import URLError
from typing import Optional

from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from .audit import AuditLogger

logger = logging.getLogger(__name__)

# name -> (url, file name inside the archive or None for plain files, local name)
DATASETS = {
    "text8": ("http://mattmahoney.net/dc/text8.zip", "text8", "text8"),
    "questions-words": (
        "https://raw.githubusercontent.com/tmikolov/word2vec/master/questions-words.txt",
        None,
        "questions-words.txt",
    ),
}


@retry(
    retry=retry_if_exception_type((URLError, ConnectionError, TimeoutError)),
    stop=stop_after_attempt(3),
    wait=wait_exponential(multiplier=1, min=2, max=10)
)
def _download(url: str, target: str):
    logger.info(f"Downloading {url}...")
    partial = target + ".part"
    with urllib.request.urlopen(url, timeout=60) as response, open(partial, "wb") as out:
        shutil.copyfileobj(response, out)
    os.replace(partial, target)


def fetch_dataset(name: str, dest_dir: str, audit: Optional[AuditLogger] = None) -> str:
    """
    Downloads a known dataset into dest_dir (skipped when already present)
    and returns the local path of the usable file.
    """
    if name not in DATASETS:
        raise ValueError(f"Unknown dataset {name!r}; known: {sorted(DATASETS)}")
    url, member, local_name = DATASETS[name]
    os.makedirs(dest_dir, exist_ok=True)
    target = os.path.join(dest_dir, local_name)
    if os.path.exists(target):
        logger.info(f"{name} already present at {target}")
        return target

    if member is None:
        _download(url, target)
    else:
        archive = os.path.join(dest_dir, os.path.basename(url))
        if not os.path.exists(archive):
            _download(url, archive)
        with zipfile.ZipFile(archive) as zf:
            zf.extract(member, dest_dir)
        extracted = os.path.join(dest_dir, member)
        if extracted != target:
            os.replace(extracted, target)

    logger.info(f"{name} ready at {target}")
    if audit:
        audit.log_event("FETCH", f"{name} -> {target}", "SUCCESS")
    return target
