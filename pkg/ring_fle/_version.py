# Version of the ring-fle package, reported by ``ring-fle --version``.

version = "0.1.0"


def get_versions():
    return {
        "version": version,
        "full-revisionid": None,
        "dirty": False,
        "error": None,
        "date": None,
    }
