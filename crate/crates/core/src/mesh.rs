//! Structured discretizations of the unit cylinder and of the interval (0,1).
//!
//! The cylinder is meshed as a voxel mask: a tensor grid of hexahedra on
//! `[-1,1]^2 x [0,1]` keeps exactly the cells whose center lies strictly inside
//! the unit disk. Cells are congruent, so one 2x2x2 Gauss table serves every
//! cell. Constant-integrand identities are made mesh-independent by
//! normalizing energies with the discrete volume `measure` instead of pi.

use serde::Serialize;

use crate::error::{Error, Result};

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;

/// Shape values and physical gradients of the eight trilinear basis
/// functions at the eight Gauss points of a cell. Identical for every cell.
#[derive(Debug, Clone)]
pub struct QuadTables {
    /// `shape[g][c]`: value of basis `c` at Gauss point `g`.
    pub shape: [[f64; 8]; 8],
    /// `dshape[g][c]`: physical gradient (d/dx, d/dy, d/dz).
    pub dshape: [[[f64; 3]; 8]; 8],
    /// Integration weight of one Gauss point (hx*hx*hz / 8).
    pub weight: f64,
    /// Local z coordinate of each Gauss point within a slab, in [0, hz].
    pub z_offset: [f64; 8],
}

fn corner_bits(c: usize) -> (f64, f64, f64) {
    let sx = if c & 1 == 1 { 1.0 } else { -1.0 };
    let sy = if (c >> 1) & 1 == 1 { 1.0 } else { -1.0 };
    let sz = if (c >> 2) & 1 == 1 { 1.0 } else { -1.0 };
    (sx, sy, sz)
}

fn build_quad_tables(hx: f64, hz: f64) -> QuadTables {
    let mut shape = [[0.0; 8]; 8];
    let mut dshape = [[[0.0; 3]; 8]; 8];
    let mut z_offset = [0.0; 8];
    for g in 0..8 {
        let (gx, gy, gz) = corner_bits(g);
        let (xi, eta, zeta) = (gx * INV_SQRT3, gy * INV_SQRT3, gz * INV_SQRT3);
        z_offset[g] = 0.5 * hz * (1.0 + zeta);
        for c in 0..8 {
            let (sx, sy, sz) = corner_bits(c);
            let fx = 1.0 + sx * xi;
            let fy = 1.0 + sy * eta;
            let fz = 1.0 + sz * zeta;
            shape[g][c] = 0.125 * fx * fy * fz;
            dshape[g][c] = [
                0.125 * sx * fy * fz * (2.0 / hx),
                0.125 * fx * sy * fz * (2.0 / hx),
                0.125 * fx * fy * sz * (2.0 / hz),
            ];
        }
    }
    QuadTables {
        shape,
        dshape,
        weight: hx * hx * hz / 8.0,
        z_offset,
    }
}

/// Voxel mesh of the unit cylinder.
#[derive(Debug, Clone)]
pub struct CylinderMesh {
    pub nxy: usize,
    pub nz: usize,
    pub hx: f64,
    pub hz: f64,
    /// Retained 2D cells of the disk mask, as grid indices (ix, iy).
    pub mask2d: Vec<(usize, usize)>,
    /// Corner local-node ids of each retained 2D cell, ordered by the
    /// (dx, dy) bits: [(0,0), (1,0), (0,1), (1,1)].
    pub cells2d: Vec<[usize; 4]>,
    /// Grid indices of each retained 2D node.
    pub nodes2d: Vec<(usize, usize)>,
    /// In-plane coordinates of each retained 2D node.
    pub node_xy: Vec<(f64, f64)>,
    /// Transverse quadrature weight of each 2D node: (adjacent retained
    /// cells) * hx^2 / 4. Sums to `area2d`.
    pub node_weight2d: Vec<f64>,
    /// z coordinates of the nz+1 levels.
    pub z: Vec<f64>,
    /// Discrete cross-section area of the mask.
    pub area2d: f64,
    /// Discrete volume (area2d * 1); replaces pi in all normalizations.
    pub measure: f64,
    pub quad: QuadTables,
}

impl CylinderMesh {
    pub fn n2d_cells(&self) -> usize {
        self.mask2d.len()
    }

    pub fn n2d_nodes(&self) -> usize {
        self.nodes2d.len()
    }

    pub fn n_cells(&self) -> usize {
        self.nz * self.mask2d.len()
    }

    pub fn n_nodes(&self) -> usize {
        (self.nz + 1) * self.nodes2d.len()
    }

    /// Node ids of the plane z = 0.
    pub fn z0_nodes(&self) -> std::ops::Range<usize> {
        0..self.n2d_nodes()
    }

    /// Node ids of the plane z = 1.
    pub fn z1_nodes(&self) -> std::ops::Range<usize> {
        self.nz * self.n2d_nodes()..(self.nz + 1) * self.n2d_nodes()
    }

    /// The eight node ids of a cell, ordered by the (dx, dy, dz) corner bits.
    #[inline]
    pub fn cell_nodes(&self, cell: usize) -> [usize; 8] {
        let n2 = self.n2d_nodes();
        let iz = cell / self.mask2d.len();
        let j = cell % self.mask2d.len();
        let c = &self.cells2d[j];
        [
            iz * n2 + c[0],
            iz * n2 + c[1],
            iz * n2 + c[2],
            iz * n2 + c[3],
            (iz + 1) * n2 + c[0],
            (iz + 1) * n2 + c[1],
            (iz + 1) * n2 + c[2],
            (iz + 1) * n2 + c[3],
        ]
    }

    #[inline]
    pub fn cell_slab(&self, cell: usize) -> usize {
        cell / self.mask2d.len()
    }

    /// Coordinates of node `id`.
    pub fn node_coords(&self, id: usize) -> (f64, f64, f64) {
        let n2 = self.n2d_nodes();
        let (x, y) = self.node_xy[id % n2];
        (x, y, self.z[id / n2])
    }

    /// Lumped volume attached to each node: sum over adjacent cells of the
    /// cell volume / 8. Sums to `measure`.
    pub fn lumped_node_volume(&self) -> Vec<f64> {
        let mut vol = vec![0.0; self.n_nodes()];
        let cell_share = self.hx * self.hx * self.hz / 8.0;
        for cell in 0..self.n_cells() {
            for id in self.cell_nodes(cell) {
                vol[id] += cell_share;
            }
        }
        vol
    }

    /// Plain JSON dump (nodes, cells, boundary tags) for debugging.
    pub fn dump_json(&self) -> serde_json::Value {
        let nodes: Vec<[f64; 3]> = (0..self.n_nodes())
            .map(|i| {
                let (x, y, z) = self.node_coords(i);
                [x, y, z]
            })
            .collect();
        let cells: Vec<[usize; 8]> = (0..self.n_cells()).map(|c| self.cell_nodes(c)).collect();
        serde_json::json!({
            "nxy": self.nxy,
            "nz": self.nz,
            "hx": self.hx,
            "hz": self.hz,
            "measure": self.measure,
            "area2d": self.area2d,
            "nodes": nodes,
            "cells": cells,
            "z0_nodes": self.z0_nodes().collect::<Vec<_>>(),
            "z1_nodes": self.z1_nodes().collect::<Vec<_>>(),
        })
    }
}

/// Exactly symmetric grid coordinate: (2i - n) / n, so that mirrored indices
/// produce bit-exact negatives and the mask inherits the symmetry of the disk.
fn grid_coord(i: usize, n: usize) -> f64 {
    (2 * i as i64 - n as i64) as f64 / n as f64
}

fn cell_center(i: usize, n: usize) -> f64 {
    (2 * i as i64 + 1 - n as i64) as f64 / n as f64
}

/// Builds the voxel cylinder mesh. `nxy` cells span the transverse diameter,
/// `nz` cells the axis.
pub fn build_cylinder(nxy: usize, nz: usize) -> Result<CylinderMesh> {
    if nxy < 4 {
        return Err(Error::Mesh(format!("nxy must be at least 4 (got {nxy})")));
    }
    if nz < 2 {
        return Err(Error::Mesh(format!("nz must be at least 2 (got {nz})")));
    }
    let hx = 2.0 / nxy as f64;
    let hz = 1.0 / nz as f64;

    // Retained cells: center strictly inside the unit circle. Centers landing
    // exactly on the circle are excluded.
    let mut mask2d = Vec::new();
    for iy in 0..nxy {
        for ix in 0..nxy {
            let cx = cell_center(ix, nxy);
            let cy = cell_center(iy, nxy);
            if cx * cx + cy * cy < 1.0 {
                mask2d.push((ix, iy));
            }
        }
    }
    if mask2d.is_empty() {
        return Err(Error::Mesh("disk mask retained no cells".to_string()));
    }

    // Compact 2D node numbering over the corners of retained cells.
    let np = nxy + 1;
    let mut grid_to_local = vec![usize::MAX; np * np];
    let mut nodes2d = Vec::new();
    let mut cells2d = Vec::with_capacity(mask2d.len());
    for &(ix, iy) in &mask2d {
        let mut corner_ids = [0usize; 4];
        for (k, (dx, dy)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
            let g = (iy + dy) * np + (ix + dx);
            if grid_to_local[g] == usize::MAX {
                grid_to_local[g] = nodes2d.len();
                nodes2d.push((ix + dx, iy + dy));
            }
            corner_ids[k] = grid_to_local[g];
        }
        cells2d.push(corner_ids);
    }

    let node_xy: Vec<(f64, f64)> = nodes2d
        .iter()
        .map(|&(ix, iy)| (grid_coord(ix, nxy), grid_coord(iy, nxy)))
        .collect();

    let mut node_weight2d = vec![0.0; nodes2d.len()];
    let share = hx * hx / 4.0;
    for corners in &cells2d {
        for &c in corners {
            node_weight2d[c] += share;
        }
    }

    let area2d = mask2d.len() as f64 * hx * hx;
    let z: Vec<f64> = (0..=nz).map(|k| k as f64 / nz as f64).collect();

    Ok(CylinderMesh {
        nxy,
        nz,
        hx,
        hz,
        mask2d,
        cells2d,
        nodes2d,
        node_xy,
        node_weight2d,
        z,
        area2d,
        measure: area2d,
        quad: build_quad_tables(hx, hz),
    })
}

/// Uniform mesh of (0,1) with piecewise-linear elements and 2-point Gauss
/// quadrature per element.
#[derive(Debug, Clone, Serialize)]
pub struct IntervalMesh {
    pub nz: usize,
    pub h: f64,
    pub z: Vec<f64>,
}

impl IntervalMesh {
    pub fn n_nodes(&self) -> usize {
        self.nz + 1
    }

    /// The two Gauss points of element `e`, as (z, weight) pairs.
    pub fn gauss(&self, e: usize) -> [(f64, f64); 2] {
        let z0 = self.z[e];
        let half = 0.5 * self.h;
        [
            (z0 + half * (1.0 - INV_SQRT3), half),
            (z0 + half * (1.0 + INV_SQRT3), half),
        ]
    }

    /// Barycentric coordinate of `z` within element `e`, in [0, 1].
    pub fn local(&self, e: usize, z: f64) -> f64 {
        (z - self.z[e]) / self.h
    }
}

pub fn build_interval(nz: usize) -> Result<IntervalMesh> {
    if nz < 2 {
        return Err(Error::Mesh(format!("nz must be at least 2 (got {nz})")));
    }
    let z: Vec<f64> = (0..=nz).map(|k| k as f64 / nz as f64).collect();
    Ok(IntervalMesh {
        nz,
        h: 1.0 / nz as f64,
        z,
    })
}
