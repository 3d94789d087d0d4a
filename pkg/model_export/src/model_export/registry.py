"""The nine supported classifiers and their tap-point assignments.

Each entry names the torchvision builder, the graph node to tap
(resolved against the model's traced node list at export time), the
human-readable role of that layer, and whether a rectifier guarantees
nonnegative activations at the tap.
"""

from __future__ import annotations

from dataclasses import dataclass

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class ModelEntry:
    builder: str  # torchvision.models attribute
    weights: str  # weights enum member for the pretrained variant
    tap: str  # exact node name or prefix, resolved at export time
    tap_role: str
    input_size: int
    nonnegative: bool


@dataclass(frozen=True)
class ExportRequest:
    model_id: str
    out_dir: str
    pretrained: bool = True
    verify: bool = True


MODEL_REGISTRY: dict[str, ModelEntry] = {
    "vgg16": ModelEntry(
        builder="vgg16",
        weights="VGG16_Weights.IMAGENET1K_V1",
        tap="features.29",  # rectifier after the last conv
        tap_role="last convolutional layer",
        input_size=224,
        nonnegative=True,
    ),
    "squeezenet_v1_1": ModelEntry(
        builder="squeezenet1_1",
        weights="SqueezeNet1_1_Weights.IMAGENET1K_V1",
        tap="classifier.2",  # rectifier after the final conv
        tap_role="last convolutional layer",
        input_size=224,
        nonnegative=True,
    ),
    "shufflenet_v2": ModelEntry(
        builder="shufflenet_v2_x1_0",
        weights="ShuffleNet_V2_X1_0_Weights.IMAGENET1K_V1",
        tap="conv5.2",  # rectifier of the final conv stage
        tap_role="last convolutional layer",
        input_size=224,
        nonnegative=True,
    ),
    "mobilenet_v3": ModelEntry(
        builder="mobilenet_v3_large",
        weights="MobileNet_V3_Large_Weights.IMAGENET1K_V1",
        tap="features.16",  # final conv stage; hardswish can dip below zero
        tap_role="last convolutional layer",
        input_size=224,
        nonnegative=False,
    ),
    "efficientnet_b0": ModelEntry(
        builder="efficientnet_b0",
        weights="EfficientNet_B0_Weights.IMAGENET1K_V1",
        tap="features.7",  # resolves to the last node of the final MBConv block
        tap_role="final MBConv6 block",
        input_size=224,
        nonnegative=False,  # projection conv+BN, no activation after it
    ),
    "inception_v3": ModelEntry(
        builder="inception_v3",
        weights="Inception_V3_Weights.IMAGENET1K_V1",
        tap="Mixed_7c",  # resolves to the block's concat output
        tap_role="Mixed 7c",
        input_size=299,
        nonnegative=True,
    ),
    "alexnet": ModelEntry(
        builder="alexnet",
        weights="AlexNet_Weights.IMAGENET1K_V1",
        tap="classifier.6",
        tap_role="last fully-connected layer",
        input_size=224,
        nonnegative=False,
    ),
    "resnet50": ModelEntry(
        builder="resnet50",
        weights="ResNet50_Weights.IMAGENET1K_V1",
        tap="avgpool",
        tap_role="final average pooling layer",
        input_size=224,
        nonnegative=True,
    ),
    "densenet121": ModelEntry(
        builder="densenet121",
        weights="DenseNet121_Weights.IMAGENET1K_V1",
        tap="features.denseblock4",  # resolves to the dense block's concat
        tap_role="final dense block",
        input_size=224,
        nonnegative=False,  # concat includes non-rectified conv outputs
    ),
}


def resolve_tap_node(node_names: list[str], tap: str) -> str:
    """Exact node name, or the last node under `tap` as a prefix."""
    if tap in node_names:
        return tap
    hits = [n for n in node_names if n.startswith(tap + ".")]
    if not hits:
        tail = ", ".join(node_names[-12:])
        raise KeyError(
            f"tap {tap!r} matches no graph node; last nodes available: {tail}"
        )
    return hits[-1]
