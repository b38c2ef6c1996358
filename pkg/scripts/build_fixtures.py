"""Regenerate the bundled model fixtures in src/pkmdyn/data/.

The numbers below are synthetic but physically plausible; they are the only
place fixture geometry and inertia are defined. Run from the repo root:

    python scripts/build_fixtures.py
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "pkmdyn" / "data"

GSP = {
    "base_radius": 0.45,
    "platform_radius": 0.25,
    "base_angles_deg": [-12.0, 12.0, 108.0, 132.0, 228.0, 252.0],
    "platform_angles_deg": [-48.0, 48.0, 72.0, 168.0, 192.0, 288.0],
    "home_height": 0.55,
    "stroke": [-0.30, 0.35],  # prismatic travel about the home leg length
    "cylinder": {"mass": 1.2, "com": 0.18, "length": 0.36, "radius": 0.025},
    "piston": {"mass": 0.5, "com": -0.15, "length": 0.30, "radius": 0.015},
    "platform": {"mass": 4.0, "com_z": 0.02, "radius": 0.28, "thickness": 0.03},
    "gravity": [0.0, 0.0, -9.81],
    "sea_stiffness": 2.0e4,  # N/m
    "sea_motor_inertia": 0.8,  # reflected mass, kg
}

PLANAR = {
    "base_radius": 0.40,
    "base_angles_deg": [90.0, 210.0, 330.0],
    "proximal": {"length": 0.30, "mass": 0.40, "width": 0.03},
    "distal": {"length": 0.30, "mass": 0.30, "width": 0.02},
    "platform_mass": 0.25,
    "gravity": [0.0, -9.81, 0.0],
    "sea_stiffness": 50.0,  # N m / rad
    "sea_motor_inertia": 0.01,  # kg m^2
}


def hat(w):
    return np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def body_mass_matrix(mass, com, inertia_com):
    """6x6 mass matrix in (angular, linear) order about the body frame origin."""
    c = hat(np.asarray(com, dtype=float))
    M = np.zeros((6, 6))
    M[:3, :3] = np.asarray(inertia_com) - mass * c @ c
    M[:3, 3:] = mass * c
    M[3:, :3] = -mass * c
    M[3:, 3:] = mass * np.eye(3)
    return 0.5 * (M + M.T)


def cylinder_inertia(mass, length, radius):
    t = mass * (3 * radius**2 + length**2) / 12.0
    return np.diag([t, t, 0.5 * mass * radius**2])


def pose(R=None, p=None):
    return {
        "rotation": (np.eye(3) if R is None else np.asarray(R)).tolist(),
        "translation": (np.zeros(3) if p is None else np.asarray(p, dtype=float)).tolist(),
    }


def gsp_document(P, home_height=None):
    h = P["home_height"] if home_height is None else home_height
    p0 = np.array([0.0, 0.0, h])
    zero = np.zeros((6, 6)).tolist()
    cyl = P["cylinder"]
    pis = P["piston"]
    plat = P["platform"]
    M_cyl = body_mass_matrix(
        cyl["mass"], [0, 0, cyl["com"]], cylinder_inertia(cyl["mass"], cyl["length"], cyl["radius"])
    )
    M_pis = body_mass_matrix(
        pis["mass"], [0, 0, pis["com"]], cylinder_inertia(pis["mass"], pis["length"], pis["radius"])
    )
    M_plat = body_mass_matrix(
        plat["mass"],
        [0, 0, plat["com_z"]],
        cylinder_inertia(plat["mass"], plat["thickness"], plat["radius"]),
    )
    limbs = []
    n = len(P["base_angles_deg"])
    for k in range(n):
        al = math.radians(P["base_angles_deg"][k])
        be = math.radians(P["platform_angles_deg"][k])
        a = P["base_radius"] * np.array([math.cos(al), math.sin(al), 0.0])
        b = P["platform_radius"] * np.array([math.cos(be), math.sin(be), 0.0])
        leg = p0 + b - a
        L0 = float(np.linalg.norm(leg))
        d = leg / L0
        x = np.cross([0.0, 0.0, 1.0], d)
        x /= np.linalg.norm(x)
        y = np.cross(d, x)
        R = np.column_stack([x, y, d])
        joints = [
            {"screw": [1, 0, 0, 0, 0, 0], "ref_config": pose(R, a)},
            {"screw": [0, 1, 0, 0, 0, 0], "ref_config": pose()},
            {
                "screw": [0, 0, 0, 0, 0, 1],
                "ref_config": pose(None, [0, 0, L0]),
                "limits": [P["stroke"][0], P["stroke"][1]],
            },
            {"screw": [1, 0, 0, 0, 0, 0], "ref_config": pose()},
            {"screw": [0, 1, 0, 0, 0, 0], "ref_config": pose()},
            {
                "screw": np.concatenate([d, np.cross(b, d)]).tolist(),
                "ref_config": pose(R.T, -R.T @ b),
            },
        ]
        last = k == n - 1
        bodies = [zero, M_cyl.tolist(), M_pis.tolist()]
        if last:
            bodies += [zero, zero, M_plat.tolist()]
        limbs.append(
            {
                "joints": joints,
                "bodies": [{"mass_matrix": m} for m in bodies],
                "P_t": np.eye(6).tolist(),
                "D_t": np.eye(6).tolist(),
                "cut_joint_rows": [] if last else [3, 4, 5],
                "actuated_joint": 2,
            }
        )
    return {
        "dof": 6,
        "gravity": P["gravity"],
        "P_p": np.eye(6).tolist(),
        "sea": {
            "stiffness": [P["sea_stiffness"]] * n,
            "motor_inertia": [P["sea_motor_inertia"]] * n,
        },
        "limbs": limbs,
    }


def planar_document(P):
    l1 = P["proximal"]["length"]
    l2 = P["distal"]["length"]
    ee = np.zeros(3)
    P_p = np.zeros((6, 2))
    P_p[3, 0] = P_p[4, 1] = 1.0
    P_t = np.zeros((3, 6))
    P_t[0, 2] = P_t[1, 3] = P_t[2, 4] = 1.0
    D_t = P_t @ P_p

    def link(spec):
        m, l, w = spec["mass"], spec["length"], spec["width"]
        I = np.diag([m * w**2 / 12.0, m * (l**2 + w**2) / 12.0, m * (l**2 + w**2) / 12.0])
        return body_mass_matrix(m, [l / 2.0, 0, 0], I)

    M1 = link(P["proximal"])
    M2 = link(P["distal"])
    M_plat = np.zeros((6, 6))
    M_plat[3:, 3:] = P["platform_mass"] * np.eye(3)
    limbs = []
    n = len(P["base_angles_deg"])
    for k in range(n):
        al = math.radians(P["base_angles_deg"][k])
        A = P["base_radius"] * np.array([math.cos(al), math.sin(al), 0.0])
        # elbow-out two-link solution from A to the end-effector home point
        r = ee - A
        dist = float(np.linalg.norm(r))
        base_dir = math.atan2(r[1], r[0])
        alpha = math.acos((l1**2 + dist**2 - l2**2) / (2 * l1 * dist))
        phi1 = base_dir + alpha
        elbow = A + l1 * np.array([math.cos(phi1), math.sin(phi1), 0.0])
        e2 = ee - elbow
        phi12 = math.atan2(e2[1], e2[0])
        phi2 = phi12 - phi1
        phi3 = -phi12
        joints = [
            {"screw": [0, 0, 1, 0, 0, 0], "ref_config": pose(rot_z(phi1), A)},
            {"screw": [0, 0, 1, 0, 0, 0], "ref_config": pose(rot_z(phi2), [l1, 0, 0])},
            {"screw": [0, 0, 1, 0, 0, 0], "ref_config": pose(rot_z(phi3), [l2, 0, 0])},
        ]
        last = k == n - 1
        bodies = [M1, M2] + ([M_plat] if last else [])
        limbs.append(
            {
                "joints": joints,
                "bodies": [{"mass_matrix": m.tolist()} for m in bodies],
                "P_t": P_t.tolist(),
                "D_t": D_t.tolist(),
                "cut_joint_rows": [] if last else [2],
                "actuated_joint": 0,
            }
        )
    return {
        "dof": 2,
        "gravity": P["gravity"],
        "P_p": P_p.tolist(),
        "sea": {
            "stiffness": [P["sea_stiffness"]] * n,
            "motor_inertia": [P["sea_motor_inertia"]] * n,
        },
        "limbs": limbs,
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    docs = {
        "gsp": gsp_document(GSP),
        "gsp_flat": gsp_document(GSP, home_height=0.0),
        "planar_3rrr": planar_document(PLANAR),
    }
    for name, doc in docs.items():
        (OUT / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        print(f"wrote {name}.json")


if __name__ == "__main__":
    main()
