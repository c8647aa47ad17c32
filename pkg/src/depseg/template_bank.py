"""Template bank: mask-aware pooled descriptors from annotated frames.

A descriptor is the mean of token vectors under a mask downsampled to the
token grid, L2-normalized. One descriptor per (frame, class); descriptors
are collected per class into the bank used at inference time.

Bank file format (External Interface, bytes):
    b"DEPSEGBANK1\\n"
    b"dim=<D> classes=<K>\\n"
    per class: b"class=<id> count=<L>\\n" + L raw f32-LE D-vectors
    optional trailing lines b"frame=<id>\\n"
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger("depseg.bank")

BANK_MAGIC = b"DEPSEGBANK1\n"


class EmptySupportError(ValueError):
    """Mask has no covered token cells; the class is skipped for this frame."""


class BankFormatError(ValueError):
    pass


@dataclass
class TemplateBank:
    dim: int
    classes: dict = field(default_factory=dict)  # class_id -> list of unit f32 vectors
    meta: list = field(default_factory=list)     # source frame ids

    def add(self, class_id, descriptor):
        descriptor = np.asarray(descriptor, dtype=np.float32)
        if descriptor.shape != (self.dim,):
            raise ValueError(f"descriptor dim {descriptor.shape} != ({self.dim},)")
        self.classes.setdefault(int(class_id), []).append(descriptor)

    def class_ids(self):
        return sorted(self.classes)

    def counts(self):
        return {c: len(v) for c, v in sorted(self.classes.items())}

    def n_templates(self):
        return sum(len(v) for v in self.classes.values())


def downsample_mask(mask, h_tok, w_tok):
    """Majority-vote downsampling to the token grid: cell true iff >= 0.5 of
    its pixel rectangle is covered. If that empties a mask that has source
    coverage, the single best-covered cell is set instead so rare thin
    classes are not lost."""
    mask = np.asarray(mask, dtype=bool)
    if h_tok < 1 or w_tok < 1:
        raise ValueError("token grid dims must be >= 1")
    h, w = mask.shape
    frac = np.zeros((h_tok, w_tok), dtype=np.float64)
    row_edges = [(i * h) // h_tok for i in range(h_tok + 1)]
    col_edges = [(j * w) // w_tok for j in range(w_tok + 1)]
    for i in range(h_tok):
        for j in range(w_tok):
            block = mask[row_edges[i] : row_edges[i + 1], col_edges[j] : col_edges[j + 1]]
            frac[i, j] = block.mean() if block.size else 0.0
    out = frac >= 0.5
    if not out.any() and mask.any():
        out[np.unravel_index(np.argmax(frac), frac.shape)] = True
    return out


def pooled_descriptor(tokens, mask):
    """Mean token vector over true cells, then L2-normalized."""
    tokens = np.asarray(tokens, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if tokens.shape[:2] != mask.shape:
        raise ValueError("token grid and mask spatial shapes differ")
    z = mask.sum()
    if z == 0:
        raise EmptySupportError("mask covers no token cells")
    mean = tokens[mask].sum(axis=0) / z
    norm = np.linalg.norm(mean)
    if norm == 0:
        raise EmptySupportError("pooled descriptor is the zero vector")
    return (mean / norm).astype(np.float32)


def register_frame(tokens, gt, classes=None):
    """One descriptor per class present in the ground-truth map.

    Returns (class_id, descriptor) pairs, class ids ascending. Classes whose
    pooled descriptor cannot be formed are skipped with a log note.
    """
    gt = np.asarray(gt)
    h_tok, w_tok = tokens.shape[:2]
    present = sorted(int(c) for c in np.unique(gt))
    if classes is not None:
        present = [c for c in present if c in classes]
    out = []
    for c in present:
        dmask = downsample_mask(gt == c, h_tok, w_tok)
        try:
            out.append((c, pooled_descriptor(tokens, dmask)))
        except EmptySupportError:
            log.info("class %d: empty token support, skipped for this frame", c)
    return out


def build_bank(frames):
    """Assemble a bank from (frame_id, tokens, gt) triples."""
    bank = None
    for frame_id, tokens, gt in frames:
        if bank is None:
            bank = TemplateBank(dim=int(tokens.shape[2]))
        elif bank.dim != tokens.shape[2]:
            raise ValueError(
                f"token dim {tokens.shape[2]} of {frame_id} != bank dim {bank.dim}"
            )
        for c, desc in register_frame(tokens, gt):
            bank.add(c, desc)
        bank.meta.append(frame_id)
    if bank is None:
        raise ValueError("no frames to register")
    return bank


def subsample_bank(bank, fraction, seed=0):
    """Keep max(1, round(fraction * L_c)) templates per class, chosen
    uniformly without replacement. fraction 1 is the identity."""
    if not (0 < fraction <= 1):
        raise ValueError("fraction must be in (0, 1]")
    if not bank.classes:
        raise ValueError("empty bank")
    if fraction == 1:
        return TemplateBank(
            dim=bank.dim,
            classes={c: list(v) for c, v in bank.classes.items()},
            meta=list(bank.meta),
        )
    rng = np.random.default_rng(seed)
    out = TemplateBank(dim=bank.dim, meta=list(bank.meta))
    for c in sorted(bank.classes):
        templates = bank.classes[c]
        if not templates:
            out.classes[c] = []
            continue
        n_keep = max(1, int(round(fraction * len(templates))))
        idx = sorted(rng.choice(len(templates), size=n_keep, replace=False).tolist())
        out.classes[c] = [templates[i] for i in idx]
    return out


def save_bank(bank, path):
    with open(path, "wb") as f:
        f.write(BANK_MAGIC)
        f.write(f"dim={bank.dim} classes={len(bank.classes)}\n".encode("ascii"))
        for c in sorted(bank.classes):
            templates = bank.classes[c]
            f.write(f"class={c} count={len(templates)}\n".encode("ascii"))
            for t in templates:
                f.write(np.asarray(t, dtype="<f4").tobytes())
        for fid in bank.meta:
            f.write(f"frame={fid}\n".encode("ascii"))


def _read_line(buf, pos):
    end = buf.find(b"\n", pos)
    if end < 0:
        raise BankFormatError("unterminated header line")
    return buf[pos:end].decode("ascii", errors="replace"), end + 1


def load_bank(path):
    with open(path, "rb") as f:
        buf = f.read()
    if not buf.startswith(BANK_MAGIC):
        raise BankFormatError(f"{path}: bad bank magic")
    pos = len(BANK_MAGIC)
    header, pos = _read_line(buf, pos)
    try:
        kv = dict(item.split("=", 1) for item in header.split())
        dim, n_classes = int(kv["dim"]), int(kv["classes"])
    except (KeyError, ValueError) as e:
        raise BankFormatError(f"{path}: bad header {header!r}") from e
    bank = TemplateBank(dim=dim)
    for _ in range(n_classes):
        line, pos = _read_line(buf, pos)
        try:
            kv = dict(item.split("=", 1) for item in line.split())
            cid, count = int(kv["class"]), int(kv["count"])
        except (KeyError, ValueError) as e:
            raise BankFormatError(f"{path}: bad class line {line!r}") from e
        nbytes = count * dim * 4
        if len(buf) - pos < nbytes:
            raise BankFormatError(f"{path}: truncated templates for class {cid}")
        vecs = np.frombuffer(buf[pos : pos + nbytes], dtype="<f4").reshape(count, dim)
        pos += nbytes
        bank.classes[cid] = [v.copy() for v in vecs]
        for v in bank.classes[cid]:
            if abs(float(np.linalg.norm(v)) - 1.0) > 1e-5:
                raise BankFormatError(
                    f"{path}: template of class {cid} is not unit-norm"
                )
    while pos < len(buf):
        line, pos = _read_line(buf, pos)
        if line.startswith("frame="):
            bank.meta.append(line[len("frame="):])
        elif line:
            raise BankFormatError(f"{path}: unexpected trailing line {line!r}")
    return bank
