"""Recording manifest for the public drive-end bearing corpus.

Ten classes: the normal condition plus nine single-point faults (inner
raceway, rolling ball, outer raceway at three diameters), each pooling all
four motor loads.  Outer-race faults at 0.007" and 0.021" were recorded at
three sensor orifice positions, which is why those classes carry roughly
three times the windows of the others; the 0.014" outer fault exists only at
the centred position.

``expected_samples`` records the drive-end channel length each conversion
expects; with 2048-sample non-overlapping windows the per-class window
counts land exactly on the published 80/20 split totals (9000 train,
2255 test).
"""

from dataclasses import dataclass

WINDOW = 2048

FAULT_TYPES = ("NC", "inner", "ball", "outer")

# label -> (fault type, diameter in inches); diameter 0 for the normal class
LABEL_SCHEME = {
    0: ("NC", 0.0),
    1: ("inner", 0.007),
    2: ("inner", 0.014),
    3: ("inner", 0.021),
    4: ("ball", 0.007),
    5: ("ball", 0.014),
    6: ("ball", 0.021),
    7: ("outer", 0.007),
    8: ("outer", 0.014),
    9: ("outer", 0.021),
}

CLASS_NAMES = ["NC", "F1", "F2", "F3", "F4", "F5", "F6", "F7", "F8", "F9"]


@dataclass(frozen=True)
class Recording:
    file_id: int
    fault_type: str
    diameter: float
    load: int
    label: int
    position: str  # outer-race sensor orifice ("@6", "@3", "@12"), else ""
    expected_samples: int

    @property
    def filename(self) -> str:
        return f"{self.file_id}.mat"

    @property
    def channel_key(self) -> str:
        return f"X{self.file_id:03d}_DE_time"

    @property
    def expected_windows(self) -> int:
        return self.expected_samples // WINDOW


def _tail(file_id: int) -> int:
    # sub-window leftover the converter must discard; varied but reproducible
    return (file_id * 97) % WINDOW


def _group(label, ids, windows, position=""):
    fault_type, diameter = LABEL_SCHEME[label]
    return [
        Recording(
            file_id=fid,
            fault_type=fault_type,
            diameter=diameter,
            load=load,
            label=label,
            position=position,
            expected_samples=count * WINDOW + _tail(fid),
        )
        for load, (fid, count) in enumerate(zip(ids, windows))
    ]


def _normal_baseline():
    # the four baseline recordings have well-known lengths
    fault_type, diameter = LABEL_SCHEME[0]
    lengths = {97: 243_938, 98: 483_903, 99: 483_903, 100: 485_643}
    return [
        Recording(file_id=fid, fault_type=fault_type, diameter=diameter,
                  load=load, label=0, position="", expected_samples=lengths[fid])
        for load, fid in enumerate((97, 98, 99, 100))
    ]


MANIFEST: list[Recording] = (
    _normal_baseline()
    + _group(1, (105, 106, 107, 108), (208, 208, 208, 207))
    + _group(2, (169, 170, 171, 172), (208, 208, 208, 208))
    + _group(3, (209, 210, 211, 212), (208, 208, 207, 207))
    + _group(4, (118, 119, 120, 121), (208, 208, 207, 207))
    + _group(5, (185, 186, 187, 188), (173, 173, 173, 172))
    + _group(6, (222, 223, 224, 225), (208, 208, 208, 208))
    + _group(7, (130, 131, 132, 133), (198, 198, 198, 197), "@6")
    + _group(7, (144, 145, 146, 147), (198, 197, 197, 197), "@3")
    + _group(7, (156, 157, 158, 159), (197, 197, 198, 197), "@12")
    + _group(8, (197, 198, 199, 200), (208, 208, 207, 207), "@6")
    + _group(9, (234, 235, 236, 237), (199, 199, 198, 198), "@6")
    + _group(9, (246, 247, 248, 249), (199, 198, 198, 199), "@3")
    + _group(9, (258, 259, 260, 261), (199, 198, 199, 198), "@12")
)


def windows_per_label() -> dict[int, int]:
    counts: dict[int, int] = {label: 0 for label in LABEL_SCHEME}
    for rec in MANIFEST:
        counts[rec.label] += rec.expected_windows
    return counts
