#!/usr/bin/env python3
"""Export truncated pretrained CNN backbones to ONNX for the feature extractor.

Each exported graph is the convolutional trunk of a torchvision model with the
classifier head removed: input is a batch of RGB images, output the final
pooled activation map, which the extractor flattens into feature vectors.

Requires torch and torchvision, which are deliberately not vendored:

    pip install torch torchvision

Typical use:

    python scripts/fetch_backbones.py --out models/
    histoml extract --manifest manifest.json --backbone vgg16 \
        --model-path models/vgg16.onnx

File names match the backbone ids the CLI and config files use.
"""

import argparse
import sys
from pathlib import Path

SUPPORTED = ["vgg16", "vgg19", "mobilenet", "densenet169", "densenet201"]


def build_trunk(name):
    import torchvision.models as models

    if name == "vgg16":
        net = models.vgg16(weights=models.VGG16_Weights.IMAGENET1K_V1)
        return net.features
    if name == "vgg19":
        net = models.vgg19(weights=models.VGG19_Weights.IMAGENET1K_V1)
        return net.features
    if name == "mobilenet":
        # torchvision ships no v1 MobileNet; the v2 feature stack is the
        # closest maintained stand-in.
        net = models.mobilenet_v2(weights=models.MobileNet_V2_Weights.IMAGENET1K_V1)
        return net.features
    if name == "densenet169":
        net = models.densenet169(weights=models.DenseNet169_Weights.IMAGENET1K_V1)
        return net.features
    if name == "densenet201":
        net = models.densenet201(weights=models.DenseNet201_Weights.IMAGENET1K_V1)
        return net.features
    raise ValueError(f"unsupported backbone {name!r}")


def export(name, out_dir, size, opset):
    import torch

    trunk = build_trunk(name).eval()
    dummy = torch.zeros(1, 3, size, size)
    with torch.no_grad():
        shape = tuple(trunk(dummy).shape)
    path = out_dir / f"{name}.onnx"
    torch.onnx.export(
        trunk,
        dummy,
        str(path),
        input_names=["input"],
        output_names=["features"],
        dynamic_axes={"input": {0: "batch"}, "features": {0: "batch"}},
        opset_version=opset,
    )
    flat = 1
    for d in shape[1:]:
        flat *= d
    print(f"wrote {path} (output {shape[1:]}, {flat} features per image)")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("models"), help="output directory")
    parser.add_argument(
        "--size", type=int, default=128, help="input image side length the graph is traced at"
    )
    parser.add_argument("--opset", type=int, default=13, help="ONNX opset version")
    parser.add_argument(
        "--backbones",
        nargs="+",
        default=SUPPORTED,
        choices=SUPPORTED,
        help="subset of backbones to export",
    )
    args = parser.parse_args()

    try:
        import torch  # noqa: F401
        import torchvision  # noqa: F401
    except ImportError as err:
        print(f"missing dependency: {err}", file=sys.stderr)
        print("install with: pip install torch torchvision", file=sys.stderr)
        return 1

    args.out.mkdir(parents=True, exist_ok=True)
    for name in args.backbones:
        export(name, args.out, args.size, args.opset)
    return 0


if __name__ == "__main__":
    sys.exit(main())
