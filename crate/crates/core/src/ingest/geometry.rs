//! Planar polygon predicates on raw lon/lat coordinates.

/// Mean earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// `(x, y)` = `(lon, lat)`.
pub type Point = (f64, f64);
/// Closed ring: first vertex equals last.
pub type Ring = Vec<Point>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn of_rings(rings: &[Ring]) -> Self {
        let mut b = BBox { min_x: f64::INFINITY, min_y: f64::INFINITY, max_x: f64::NEG_INFINITY, max_y: f64::NEG_INFINITY };
        for &(x, y) in rings.iter().flatten() {
            b.min_x = b.min_x.min(x);
            b.min_y = b.min_y.min(y);
            b.max_x = b.max_x.max(x);
            b.max_y = b.max_y.max(y);
        }
        b
    }

    pub fn union(self, o: BBox) -> Self {
        BBox {
            min_x: self.min_x.min(o.min_x),
            min_y: self.min_y.min(o.min_y),
            max_x: self.max_x.max(o.max_x),
            max_y: self.max_y.max(o.max_y),
        }
    }

    pub fn contains(&self, (x, y): Point) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

/// Census block group polygon. Containment uses the even-odd rule over all
/// rings, so holes and multi-part geometries need no special casing.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGroup {
    pub id: String,
    pub rings: Vec<Ring>,
    /// Square meters.
    pub area: f64,
    pub bbox: BBox,
}

impl BlockGroup {
    /// Builds a block group, computing the area when not supplied.
    pub fn new(id: impl Into<String>, rings: Vec<Ring>, area: Option<f64>) -> Self {
        let area = area.unwrap_or_else(|| equirectangular_area(&rings));
        let bbox = BBox::of_rings(&rings);
        Self { id: id.into(), rings, area, bbox }
    }

    /// Interior or boundary point.
    pub fn covers(&self, p: Point) -> bool {
        self.bbox.contains(p) && (self.rings.iter().any(|r| on_ring(r, p)) || even_odd(&self.rings, p))
    }
}

/// Even-odd ray casting to the right of `p` over every ring.
pub fn even_odd(rings: &[Ring], (px, py): Point) -> bool {
    let mut inside = false;
    for ring in rings {
        for w in ring.windows(2) {
            let ((x1, y1), (x2, y2)) = (w[0], w[1]);
            if (y1 > py) != (y2 > py) {
                let x = x1 + (py - y1) * (x2 - x1) / (y2 - y1);
                if px < x {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

/// `p` lies on some edge of the ring.
pub fn on_ring(ring: &[Point], (px, py): Point) -> bool {
    ring.windows(2).any(|w| {
        let ((x1, y1), (x2, y2)) = (w[0], w[1]);
        let cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1);
        cross == 0.0 && px >= x1.min(x2) && px <= x1.max(x2) && py >= y1.min(y2) && py <= y1.max(y2)
    })
}

/// Signed shoelace area in coordinate units; positive for counter-clockwise.
pub fn signed_area(ring: &[Point]) -> f64 {
    ring.windows(2).map(|w| w[0].0 * w[1].1 - w[1].0 * w[0].1).sum::<f64>() / 2.0
}

/// Area in m² of the even-odd region, approximated on an equirectangular
/// projection about the mean latitude. Rings are combined by
/// orientation (outer counter-clockwise, holes clockwise) and the absolute
/// total is returned.
pub fn equirectangular_area(rings: &[Ring]) -> f64 {
    let pts: Vec<&Point> = rings.iter().flatten().collect();
    if pts.is_empty() {
        return 0.0;
    }
    let lat0 = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let k = EARTH_RADIUS_M.powi(2) * lat0.to_radians().cos() * (1f64.to_radians()).powi(2);
    rings.iter().map(|r| signed_area(r)).sum::<f64>().abs() * k
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, s: f64) -> Ring {
        vec![(x0, y0), (x0 + s, y0), (x0 + s, y0 + s), (x0, y0 + s), (x0, y0)]
    }

    #[test]
    fn interior_exterior_boundary() {
        let bg = BlockGroup::new("A", vec![square(0.0, 0.0, 1.0)], Some(1.0));
        assert!(bg.covers((0.5, 0.5)));
        assert!(!bg.covers((2.0, 2.0)));
        assert!(bg.covers((1.0, 0.5)));
        assert!(bg.covers((0.0, 0.0)));
    }

    #[test]
    fn hole_is_outside() {
        let mut hole = square(0.25, 0.25, 0.5);
        hole.reverse();
        let bg = BlockGroup::new("A", vec![square(0.0, 0.0, 1.0), hole], None);
        assert!(!bg.covers((0.5, 0.5)));
        assert!(bg.covers((0.1, 0.1)));
    }

    #[test]
    fn area_of_small_square_at_equator() {
        // 0.01° square at the equator: (R · 0.01 · π/180)² m²
        let a = equirectangular_area(&[square(0.0, -0.005, 0.01)]);
        let side = EARTH_RADIUS_M * 0.01f64.to_radians();
        assert!((a - side * side).abs() / (side * side) < 1e-6);
    }
}
