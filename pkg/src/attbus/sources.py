"""Image sources: directory-based sequence feeding and a synthetic scene
generator that emits its own ground truth.

Stamps are derived from the frame index (stamp_ns = index * 1e9 / fps),
never from the wall clock, so recorded experiments replay exactly.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .errors import InvariantViolation, NoFramesFound, UnreadableFile
from .messages import BoundingBox, Header, ImageMsg, ObjectFoa
from .pnm import read_pnm

log = logging.getLogger("attbus.sources")


def stamp_step_ns(fps: float) -> int:
    if not fps > 0:
        raise ValueError("fps must be > 0")
    return round(1e9 / fps)


class SequenceSource:
    """Feeds PGM/PPM frames from a directory in lexicographic order."""

    def __init__(self, directory, pattern: str = "*", fps: float = 30.0,
                 loop: bool = False, frame_id: str = "seq"):
        self.directory = Path(directory)
        self.files = sorted(self.directory.glob(pattern))
        if not self.files:
            raise NoFramesFound(f"{self.directory}/{pattern} matched no files")
        self.fps = fps
        self.step_ns = stamp_step_ns(fps)
        self.loop = loop
        self.frame_id = frame_id
        self._file_index = 0
        self._frame_index = 0
        self._dims = None
        self._bad = set()

    def next_frame(self) -> ImageMsg | None:
        """Next frame, or None at end of stream (never None when looping)."""
        while True:
            if self._file_index >= len(self.files):
                if not self.loop or len(self._bad) == len(self.files):
                    if self._frame_index == 0:
                        raise NoFramesFound(f"no readable frames in {self.directory}")
                    return None
                self._file_index = 0
            path = self.files[self._file_index]
            self._file_index += 1
            try:
                a = read_pnm(path)
            except UnreadableFile as e:
                log.warning("skipping %s", e)
                self._bad.add(path)
                continue
            dims = a.shape[:2]
            if self._dims is None:
                self._dims = dims
            elif dims != self._dims:
                raise InvariantViolation(
                    f"{path}: frame is {dims[1]}x{dims[0]}, sequence is "
                    f"{self._dims[1]}x{self._dims[0]}"
                )
            header = Header(stamp_ns=self._frame_index * self.step_ns,
                            frame_id=self.frame_id)
            self._frame_index += 1
            return ImageMsg.from_array(a, header)


class SyntheticScene:
    """Moving bright square over a flat background, plus optional static
    distractor squares and seeded uniform noise. Emits (frame, gt-bbox);
    the ground truth is None while the target is scripted out of view.
    """

    def __init__(self, width: int, height: int, side: int = 20,
                 pos=(10, 10), vel=(0, 0), background: int = 128,
                 level: int = 255, distractors=(), noise: int = 0,
                 seed: int = 0, fps: float = 30.0,
                 vanish_at: int | None = None, reappear_at: int | None = None,
                 frame_id: str = "scene"):
        if not (1 <= side <= min(width, height)):
            raise ValueError("target must fit inside the frame")
        if not (0 <= pos[0] <= width - side and 0 <= pos[1] <= height - side):
            raise ValueError("target start position out of bounds")
        self.width = width
        self.height = height
        self.side = side
        self.x, self.y = float(pos[0]), float(pos[1])
        self.vx, self.vy = float(vel[0]), float(vel[1])
        self.background = background
        self.level = level
        self.distractors = list(distractors)  # (x, y, side, level)
        self.noise = int(noise)
        self.fps = fps
        self.step_ns = stamp_step_ns(fps)
        self.vanish_at = vanish_at
        self.reappear_at = reappear_at
        self.frame_id = frame_id
        self.frame_index = 0
        self._rng = np.random.Generator(np.random.PCG64(seed))

    def _visible(self) -> bool:
        if self.vanish_at is None or self.frame_index < self.vanish_at:
            return True
        return self.reappear_at is not None and self.frame_index >= self.reappear_at

    def step(self):
        a = np.full((self.height, self.width), self.background, dtype=np.int16)
        for dx, dy, ds, dl in self.distractors:
            a[int(dy):int(dy) + int(ds), int(dx):int(dx) + int(ds)] = dl
        gt = None
        if self._visible():
            x, y = int(round(self.x)), int(round(self.y))
            a[y:y + self.side, x:x + self.side] = self.level
            gt_header = Header(stamp_ns=self.frame_index * self.step_ns,
                               frame_id=self.frame_id)
            gt = ObjectFoa(gt_header, BoundingBox(x, y, self.side, self.side), 1.0)
        if self.noise:
            a = a + self._rng.integers(-self.noise, self.noise + 1,
                                       a.shape, dtype=np.int16)
        img = ImageMsg.from_array(
            np.clip(a, 0, 255).astype(np.uint8),
            Header(stamp_ns=self.frame_index * self.step_ns, frame_id=self.frame_id),
        )
        self._advance()
        self.frame_index += 1
        return img, gt

    def _advance(self):
        nx = self.x + self.vx
        ny = self.y + self.vy
        if nx < 0:
            nx = -nx
            self.vx = -self.vx
        if nx + self.side > self.width:
            nx = 2 * (self.width - self.side) - nx
            self.vx = -self.vx
        if ny < 0:
            ny = -ny
            self.vy = -self.vy
        if ny + self.side > self.height:
            ny = 2 * (self.height - self.side) - ny
            self.vy = -self.vy
        self.x, self.y = nx, ny
