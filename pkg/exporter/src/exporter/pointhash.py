"""Point-prompt hashing for score-map filenames.

Must stay string-identical to the pipeline's scheme: score maps are
looked up by `<hash>.tns` and any divergence is a silent cache miss.
"""

import hashlib


def point_hash(points):
    """First 16 hex chars of SHA-256 over "x1,y1;x2,y2;..." with (x, y)
    integer pairs sorted lexicographically."""
    canon = sorted((int(x), int(y)) for x, y in points)
    key = ";".join(f"{x},{y}" for x, y in canon)
    return hashlib.sha256(key.encode("ascii")).hexdigest()[:16]
