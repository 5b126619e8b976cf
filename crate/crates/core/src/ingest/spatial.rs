//! Point-to-polygon assignment through a uniform grid index.

use rayon::prelude::*;

use super::geometry::{BBox, BlockGroup, Point};

/// Uniform grid over the joint bounding box; each cell lists the polygons
/// whose bounding boxes overlap it.
pub struct GridIndex<'a> {
    bgs: &'a [BlockGroup],
    bounds: BBox,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

/// Cap on grid cells per axis.
const MAX_CELLS_PER_AXIS: usize = 2048;

impl<'a> GridIndex<'a> {
    /// Cell size is the median polygon bounding-box extent.
    pub fn new(bgs: &'a [BlockGroup]) -> Self {
        let bounds = bgs.iter().map(|b| b.bbox).reduce(BBox::union).expect("at least one block group");
        let mut sizes: Vec<f64> = bgs.iter().map(|b| b.bbox.width().max(b.bbox.height())).collect();
        sizes.sort_by(f64::total_cmp);
        let span = bounds.width().max(bounds.height());
        let floor = span / MAX_CELLS_PER_AXIS as f64;
        let mut cell = sizes[sizes.len() / 2].max(floor);
        if !(cell > 0.0) {
            cell = 1.0;
        }
        let nx = ((bounds.width() / cell).floor() as usize + 1).min(MAX_CELLS_PER_AXIS);
        let ny = ((bounds.height() / cell).floor() as usize + 1).min(MAX_CELLS_PER_AXIS);
        let mut index = Self { bgs, bounds, cell, nx, ny, cells: vec![Vec::new(); nx * ny] };
        for (k, bg) in bgs.iter().enumerate() {
            let (x0, y0) = index.cell_of((bg.bbox.min_x, bg.bbox.min_y));
            let (x1, y1) = index.cell_of((bg.bbox.max_x, bg.bbox.max_y));
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    index.cells[cy * nx + cx].push(k);
                }
            }
        }
        index
    }

    fn cell_of(&self, (x, y): Point) -> (usize, usize) {
        let cx = ((x - self.bounds.min_x) / self.cell).floor() as usize;
        let cy = ((y - self.bounds.min_y) / self.cell).floor() as usize;
        (cx.min(self.nx - 1), cy.min(self.ny - 1))
    }

    /// Index of the covering block group; boundary ties go to the smallest id.
    pub fn locate(&self, p: Point) -> Option<usize> {
        if !self.bounds.contains(p) {
            return None;
        }
        let (cx, cy) = self.cell_of(p);
        self.cells[cy * self.nx + cx]
            .iter()
            .copied()
            .filter(|&k| self.bgs[k].covers(p))
            .min_by(|&a, &b| self.bgs[a].id.cmp(&self.bgs[b].id))
    }
}

/// Assigns each point to the block group covering it, or `None`. Output
/// order follows input order regardless of thread scheduling.
pub fn assign_points(points: &[Point], bgs: &[BlockGroup]) -> Vec<Option<usize>> {
    if bgs.is_empty() {
        return vec![None; points.len()];
    }
    let index = GridIndex::new(bgs);
    points.par_iter().map(|&p| index.locate(p)).collect()
}

/// All-pairs scan with the same tie rule; reference for [`assign_points`].
pub fn assign_points_naive(points: &[Point], bgs: &[BlockGroup]) -> Vec<Option<usize>> {
    points
        .iter()
        .map(|&p| (0..bgs.len()).filter(|&k| bgs[k].covers(p)).min_by(|&a, &b| bgs[a].id.cmp(&bgs[b].id)))
        .collect()
}
