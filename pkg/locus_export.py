"""Writers for tangent conjugate locus meshes and sampled curves."""
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

from conjugate_locus import LocusSurface
from errors import ComputationError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.15g"


class LocusExporter:
    def __init__(self, float_format=FLOAT_FORMAT, pole_tol=1e-12):
        self.float_format = float_format
        self.pole_tol = pole_tol

    def is_periodic(self, phis):
        """True when the φ grid is uniform over one full turn without its endpoint"""
        if len(phis) < 3:
            return False
        spacing = phis[1] - phis[0]
        return bool(np.allclose(np.diff(phis), spacing, atol=1e-12)
                    and abs(len(phis) * spacing - 2.0 * math.pi) < 1e-9)

    def triangulate(self, surface: LocusSurface):
        """Vertices and 0-based triangles for a (θ, φ) grid, two per quad.

        Rows whose samples all coincide (θ = 0 or π) collapse to a single
        vertex, so the quads next to them become triangle fans.
        """
        n_theta, n_phi = surface.samples.shape[:2]
        vertices, row_index = [], []
        for row in surface.samples:
            if np.max(np.abs(row - row[0])) <= self.pole_tol * max(1.0, np.max(np.abs(row))):
                row_index.append([len(vertices)] * n_phi)
                vertices.append(row[0])
            else:
                row_index.append(list(range(len(vertices), len(vertices) + n_phi)))
                vertices.extend(row)

        wrap = self.is_periodic(surface.phis)
        columns = n_phi if wrap else n_phi - 1
        faces = []
        for i in range(n_theta - 1):
            for j in range(columns):
                j_next = (j + 1) % n_phi
                a, b = row_index[i][j], row_index[i][j_next]
                c, d = row_index[i + 1][j_next], row_index[i + 1][j]
                for triangle in ((a, d, c), (a, c, b)):
                    if len(set(triangle)) == 3:
                        faces.append(triangle)
        return np.array(vertices), np.array(faces, dtype=int).reshape(-1, 3)

    def write_obj(self, surface: LocusSurface, path):
        vertices, faces = self.triangulate(surface)
        if len(faces) == 0:
            raise ComputationError("surface grid is too small to triangulate")
        lines = [f"# tangent conjugate locus {surface.family.value}({surface.p}) "
                 f"kappa={surface.kappa:.15g} tau={surface.tau:.15g}"]
        lines.extend(f"v {x:.15g} {y:.15g} {z:.15g}" for x, y, z in vertices)
        lines.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in faces)
        path = Path(path)
        path.write_text("\n".join(lines) + "\n")
        logger.info("wrote %d vertices and %d faces to %s", len(vertices), len(faces), path)
        return path

    def write_locus_csv(self, surface: LocusSurface, path):
        frame = surface.to_frame()
        frame.to_csv(path, index=False, float_format=self.float_format)
        logger.info("wrote %d locus samples to %s", len(frame), path)
        return Path(path)

    def write_fcurve_csv(self, frame: pd.DataFrame, path):
        frame[["s", "f_theta_s"]].to_csv(path, index=False, float_format=self.float_format)
        logger.info("wrote f-curve with %d samples to %s", len(frame), path)
        return Path(path)

    def write_fcurve_json(self, frame: pd.DataFrame, path):
        frame[["s", "f_theta_s"]].to_json(path, orient="records", double_precision=15)
        logger.info("wrote f-curve with %d samples to %s", len(frame), path)
        return Path(path)
