"""Optional schematic raster of an observation (painter's algorithm).

Far objects are drawn first, near objects over them, projected into a simple
camera-facing view: horizontal position from the lateral offset, vertical
position and scale from distance. Output is a base64-encoded PNG for the wire
protocol's image slot. Requires Pillow (the "render" extra)."""

from __future__ import annotations

import base64
import io
import math

from avrsim.world import Observation, TABLE_CENTER

WIDTH, HEIGHT = 320, 240

PALETTE = {
    "gray": (135, 135, 135),
    "red": (200, 60, 50),
    "blue": (60, 90, 200),
    "green": (60, 160, 70),
    "brown": (130, 90, 50),
    "purple": (140, 70, 170),
    "cyan": (70, 180, 190),
    "yellow": (220, 200, 60),
}


def render_observation_png(observation: Observation) -> bytes:
    try:
        from PIL import Image, ImageDraw
    except ImportError as exc:
        raise RuntimeError(
            "schematic rendering needs Pillow; install the 'render' extra") from exc

    image = Image.new("RGB", (WIDTH, HEIGHT), (245, 245, 240))
    draw = ImageDraw.Draw(image)
    draw.rectangle([0, HEIGHT * 2 // 3, WIDTH, HEIGHT], fill=(225, 218, 205))

    camera = observation.camera
    cam = camera.position
    fx, fy = TABLE_CENTER[0] - cam[0], TABLE_CENTER[1] - cam[1]
    norm = math.sqrt(fx * fx + fy * fy)
    fx, fy = fx / norm, fy / norm
    lx, ly = -fy, fx

    def project(obj):
        dx, dy = obj.x - cam[0], obj.y - cam[1]
        lateral = dx * lx + dy * ly
        depth = dx * fx + dy * fy
        return lateral, depth

    ordered = sorted(observation.visible_objects(),
                     key=lambda o: -project(o)[1])
    for obj in ordered:
        lateral, depth = project(obj)
        scale = 90.0 / max(depth, 20.0)
        cx = WIDTH / 2 - lateral * (WIDTH / 120.0)
        cy = HEIGHT * 0.75 - (depth - 60.0) * 0.8
        r = obj.footprint_radius * scale
        h = obj.height * scale * (0.6 if camera.elevation == "high" else 1.0)
        color = PALETTE[obj.color]
        outline = (40, 40, 40)
        if obj.shape == "sphere":
            draw.ellipse([cx - r, cy - 2 * r, cx + r, cy], fill=color, outline=outline)
        elif obj.shape == "cube":
            draw.rectangle([cx - r, cy - h, cx + r, cy], fill=color, outline=outline)
        else:  # cylinder
            draw.rectangle([cx - r, cy - h, cx + r, cy], fill=color, outline=outline)
            draw.ellipse([cx - r, cy - h - r * 0.4, cx + r, cy - h + r * 0.4],
                         fill=color, outline=outline)

    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return buffer.getvalue()


def render_observation_b64(observation: Observation) -> str:
    return base64.b64encode(render_observation_png(observation)).decode("ascii")
