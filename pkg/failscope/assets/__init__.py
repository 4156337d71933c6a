from pathlib import Path

ASSET_DIR = Path(__file__).parent
BUNDLED_MISSIONS = ("m1", "m2", "m3")


def controller_path(version: str = "v1") -> Path:
    """Path of a bundled controller program, `v1` or `v2`."""
    path = ASSET_DIR / f"controller_{version}.asm"
    if not path.exists():
        raise FileNotFoundError(f"no bundled controller {version!r}")
    return path


def mission_path(mission_id: str) -> Path:
    path = ASSET_DIR / f"{mission_id}.txt"
    if not path.exists():
        raise FileNotFoundError(f"no bundled mission {mission_id!r}")
    return path
