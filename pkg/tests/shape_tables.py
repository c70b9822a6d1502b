"""Expected (c, d, h, w) after each row of the architecture tables, keyed by node or block name.

Rows with a repeat count expand to one entry per repeated block. ``K`` stands
for the class count.
"""

K = "classes"


def _rep(prefix, start, count, shape):
    return [(f"{prefix}{i}", shape) for i in range(start, start + count)]


def _stage(stage, count, shape):
    return [(f"stage{stage}.{r}", shape) for r in range(count)]


SQUEEZENET = [
    ("stem.relu", (64, 16, 56, 56)),
    ("pool1", (64, 8, 28, 28)),
    ("fire2", (128, 8, 28, 28)),
    ("fire3", (128, 8, 28, 28)),
    ("pool2", (128, 4, 14, 14)),
    ("fire4", (256, 4, 14, 14)),
    ("fire5", (256, 4, 14, 14)),
    ("pool3", (256, 2, 7, 7)),
    ("fire6", (384, 2, 7, 7)),
    ("fire7", (384, 2, 7, 7)),
    ("pool4", (384, 1, 4, 4)),
    ("fire8", (512, 1, 4, 4)),
    ("fire9", (512, 1, 4, 4)),
    ("conv10", (K, 1, 4, 4)),
    ("avgpool", (K, 1, 1, 1)),
]

MOBILENET_V1 = (
    [("stem.relu", (32, 16, 56, 56)),
     ("block1", (64, 8, 28, 28)),
     ("block2", (128, 4, 14, 14)),
     ("block3", (128, 4, 14, 14)),
     ("block4", (256, 2, 7, 7)),
     ("block5", (256, 2, 7, 7)),
     ("block6", (512, 1, 4, 4))]
    + _rep("block", 7, 5, (512, 1, 4, 4))
    + [("block12", (1024, 1, 4, 4)),
       ("block13", (1024, 1, 4, 4)),
       ("avgpool", (1024, 1, 1, 1)),
       ("classifier", (K, 1, 1, 1))]
)

# the table prints 1024 for the pooled width; pooling keeps the 1280 channels of the conv before it
MOBILENET_V2 = (
    [("stem.relu", (32, 16, 56, 56)),
     ("block1", (16, 16, 56, 56))]
    + _rep("block", 2, 2, (24, 8, 28, 28))
    + _rep("block", 4, 3, (32, 4, 14, 14))
    + _rep("block", 7, 4, (64, 2, 7, 7))
    + _rep("block", 11, 3, (96, 2, 7, 7))
    + _rep("block", 14, 3, (160, 1, 4, 4))
    + [("block17", (320, 1, 4, 4)),
       ("last.relu", (1280, 1, 4, 4)),
       ("avgpool", (1280, 1, 1, 1)),
       ("classifier", (K, 1, 1, 1))]
)

SHUFFLENET_V1 = (
    [("stem.relu", (24, 16, 56, 56)), ("pool1", (24, 8, 28, 28))]
    + _stage(2, 4, (240, 4, 14, 14))
    + _stage(3, 8, (480, 2, 7, 7))
    + _stage(4, 4, (960, 1, 4, 4))
    + [("avgpool", (960, 1, 1, 1)), ("classifier", (K, 1, 1, 1))]
)


def shufflenet_v2(c1, c2, c3, c4):
    return (
        [("stem.relu", (24, 16, 56, 56)), ("pool1", (24, 8, 28, 28))]
        + _stage(2, 4, (c1, 4, 14, 14))
        + _stage(3, 8, (c2, 2, 7, 7))
        + _stage(4, 4, (c3, 1, 4, 4))
        + [("last.relu", (c4, 1, 4, 4)), ("avgpool", (c4, 1, 1, 1)), ("classifier", (K, 1, 1, 1))]
    )


SHUFFLENET_V2_CHANNEL_TABLE = {
    0.25: (32, 64, 128, 1024),
    0.5: (48, 96, 192, 1024),
    1.0: (116, 232, 464, 1024),
    1.5: (176, 352, 704, 1024),
    2.0: (244, 488, 976, 2048),
}

TABLES = {
    "squeezenet": SQUEEZENET,
    "mobilenet_v1": MOBILENET_V1,
    "mobilenet_v2": MOBILENET_V2,
    "shufflenet_v1": SHUFFLENET_V1,
    "shufflenet_v2": shufflenet_v2(*SHUFFLENET_V2_CHANNEL_TABLE[1.0]),
}


def expected(arch, classes=600, table=None):
    rows = TABLES[arch] if table is None else table
    return [(name, tuple(classes if v == K else v for v in shape)) for name, shape in rows]


def observed(graph, shapes, rows):
    """Shape at every table row from a per-node shape map; block rows resolve to the block's last node."""
    outputs = graph.block_outputs()
    return [(name, tuple(shapes[outputs.get(name, name)])) for name, _ in rows]
