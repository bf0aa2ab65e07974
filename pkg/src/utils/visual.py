from PIL import Image, ImageDraw
from pathlib import Path
from typing import List, Optional, Tuple
import numpy as np

# one colour per class, 1-based labels index into it cyclically
PALETTE = [(31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40), (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127)]


def gray_image(pixels: np.ndarray) -> Image.Image:
    """Min-max stretch of a float image to 8-bit gray"""
    pixels = np.asarray(pixels, dtype=float)
    lo, hi = float(pixels.min()), float(pixels.max())
    scaled = np.zeros_like(pixels) if hi == lo else (pixels - lo) / (hi - lo)
    return Image.fromarray((scaled * 255).round().astype(np.uint8), mode="L").convert("RGB")


def label_image(labels: np.ndarray) -> Image.Image:
    """Colour-coded 1-based labels"""
    palette = np.array(PALETTE, dtype=np.uint8)
    return Image.fromarray(palette[(np.asarray(labels) - 1) % len(PALETTE)], mode="RGB")


def save_label_panel(output_path, image: np.ndarray, panels: List[Tuple[str, np.ndarray]], title: Optional[str] = None) -> Path:
    """Side-by-side PNG of the image and one or more 1-based label maps"""
    tiles = [("Image", gray_image(image))] + [(name, label_image(labels)) for name, labels in panels]
    width, height = tiles[0][1].size

    combined = Image.new("RGB", (width * len(tiles), height), "white")
    draw = ImageDraw.Draw(combined)
    for i, (name, tile) in enumerate(tiles):
        if tile.size != (width, height):
            tile = tile.resize((width, height), Image.Resampling.NEAREST)
        combined.paste(tile, (i * width, 0))
        draw.text((i * width + 10, 10), name, fill="white")
        if i:
            draw.line([(i * width, 0), (i * width, height)], fill="gray", width=2)
    if title:
        draw.text((10, height - 20), title, fill="white")

    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    combined.save(output_path)
    print(f"📸 Label panel saved: {output_path}")
    return output_path
