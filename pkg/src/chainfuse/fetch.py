"""Best-effort download of public benchmark datasets (ARFF + XML pairs).

Dataset hosting for the classic multi-label benchmarks moves around, so the
built-in URL registry is a list of candidates tried in order, and any entry
can be overridden with an explicit URL.  Zip archives are searched for one
``.arff``/``.xml`` pair; direct file URLs are saved as-is.
"""

from __future__ import annotations

import io
import urllib.request
import zipfile
from pathlib import Path

#: candidate zip URLs per dataset, tried in order
DATASET_URLS: dict[str, tuple[str, ...]] = {
    name: (
        f"https://www.uco.es/kdis/mllresources/assets/downloads/full/{title}.zip",
        f"https://downloads.sourceforge.net/project/mulan/datasets/{name}.zip",
    )
    for name, title in {
        "emotions": "Emotions",
        "scene": "Scene",
        "yeast": "Yeast",
        "cal500": "CAL500",
        "image": "Image",
        "enron": "Enron",
        "genbase": "Genbase",
        "medical": "Medical",
        "langlog": "Langlog",
        "virusgo": "VirusGO",
        "water-quality": "Water-quality",
        "gnegativego": "GnegativeGO",
        "gpositivego": "GpositiveGO",
    }.items()
}


class FetchError(RuntimeError):
    pass


def _download(url: str, timeout: float) -> bytes:
    with urllib.request.urlopen(url, timeout=timeout) as response:
        return response.read()


def _pick_member(names: list[str], suffix: str, prefer: str) -> str | None:
    candidates = [n for n in names if n.lower().endswith(suffix)]
    if not candidates:
        return None
    exact = [n for n in candidates if Path(n).stem.lower() == prefer.lower()]
    if exact:
        return exact[0]
    return max(candidates, key=len)


def extract_pair(archive: bytes, name: str, dest: Path) -> tuple[Path, Path]:
    """Pull one .arff and one .xml out of a zip into dest/<name>.{arff,xml}."""
    dest.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(io.BytesIO(archive)) as zf:
        names = [n for n in zf.namelist() if not n.endswith("/")]
        arff_member = _pick_member(names, ".arff", name)
        xml_member = _pick_member(names, ".xml", name)
        if arff_member is None or xml_member is None:
            raise FetchError(
                f"archive for {name!r} lacks an .arff/.xml pair (members: {names})"
            )
        arff_path = dest / f"{name}.arff"
        xml_path = dest / f"{name}.xml"
        arff_path.write_bytes(zf.read(arff_member))
        xml_path.write_bytes(zf.read(xml_member))
    return arff_path, xml_path


def fetch_dataset(
    name: str,
    dest: Path,
    url: str | None = None,
    timeout: float = 60.0,
) -> tuple[Path, Path]:
    """Fetch <name>.arff and <name>.xml into dest; returns the two paths.

    ``url`` may point at a zip archive or directly at an .arff file (in
    which case the matching .xml is fetched by swapping the suffix).
    Already-present files are kept.
    """
    name = name.lower()
    dest = Path(dest)
    arff_path = dest / f"{name}.arff"
    xml_path = dest / f"{name}.xml"
    if arff_path.exists() and xml_path.exists():
        return arff_path, xml_path

    candidates = (url,) if url else DATASET_URLS.get(name)
    if not candidates:
        raise FetchError(
            f"no known source for dataset {name!r}; pass an explicit URL"
        )
    errors = []
    for candidate in candidates:
        try:
            if candidate.lower().endswith(".arff"):
                dest.mkdir(parents=True, exist_ok=True)
                arff_path.write_bytes(_download(candidate, timeout))
                xml_path.write_bytes(
                    _download(candidate[: -len(".arff")] + ".xml", timeout)
                )
                return arff_path, xml_path
            return extract_pair(_download(candidate, timeout), name, dest)
        except Exception as exc:
            errors.append(f"{candidate}: {type(exc).__name__}: {exc}")
    raise FetchError(
        f"could not fetch dataset {name!r}; tried:\n  " + "\n  ".join(errors)
    )
