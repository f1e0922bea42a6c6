//! Node normalization into the unit cube and the leveled octree decomposition.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kernels::dist2;
use crate::Point3;

/// Affine map `x -> (x - center) / scale` into `[-0.5, 0.5]^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub center: Point3,
    pub scale: f64,
}

impl Normalization {
    pub fn identity() -> Self {
        Self {
            center: [0.0; 3],
            scale: 1.0,
        }
    }

    pub fn forward(&self, p: &Point3) -> Point3 {
        let mut out = [0.0; 3];
        for a in 0..3 {
            out[a] = (p[a] - self.center[a]) / self.scale;
        }
        out
    }

    pub fn backward(&self, p: &Point3) -> Point3 {
        let mut out = [0.0; 3];
        for a in 0..3 {
            out[a] = p[a] * self.scale + self.center[a];
        }
        out
    }

    /// Forward map followed by clamping into the closed cube. Used for the
    /// interpolation nodes themselves, where any excursion is rounding.
    pub fn forward_clamped(&self, p: &Point3) -> Point3 {
        let mut out = self.forward(p);
        for c in out.iter_mut() {
            *c = c.clamp(-0.5, 0.5);
        }
        out
    }
}

/// Maps nodes into `[-0.5, 0.5]^3`. The center is the midpoint of the
/// bounding box and the scale the maximum pairwise distance, so every
/// coordinate offset is at most half the scale.
pub fn normalize_nodes(points: &[Point3]) -> Result<(Vec<Point3>, Normalization)> {
    if points.is_empty() {
        return Err(Error::EmptyInput("cannot normalize an empty node set"));
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let center = [
        0.5 * (lo[0] + hi[0]),
        0.5 * (lo[1] + hi[1]),
        0.5 * (lo[2] + hi[2]),
    ];
    let scale = if points.len() == 1 {
        1.0
    } else {
        let q = max_pairwise_distance(points);
        if q <= 0.0 {
            return Err(Error::Domain("all nodes coincide".into()));
        }
        q
    };
    let norm = Normalization { center, scale };
    let out = points.iter().map(|p| norm.forward_clamped(p)).collect();
    Ok((out, norm))
}

/// Exact O(N^2) diameter of a point set.
pub fn max_pairwise_distance(points: &[Point3]) -> f64 {
    let mut best = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            best = best.max(dist2(p, q));
        }
    }
    best.sqrt()
}

/// Deepest level the octree may reach before construction gives up.
pub const MAX_LEVEL: usize = 64;

/// One nonempty cube of the decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct OctBox {
    pub level: usize,
    /// Integer grid position at this level, each component in `0..2^level`.
    pub coords: [u64; 3],
    pub lower: Point3,
    pub side: f64,
    /// Sorted node indices.
    pub nodes: Vec<usize>,
    /// Index of the parent within `levels[level - 1]`.
    pub parent: Option<usize>,
    /// Indices of the stored (nonempty) children within `levels[level + 1]`.
    pub children: Vec<usize>,
    /// Octant of this box inside its parent, `0..8`.
    pub octant: u8,
}

impl OctBox {
    pub fn center(&self) -> Point3 {
        let h = 0.5 * self.side;
        [self.lower[0] + h, self.lower[1] + h, self.lower[2] + h]
    }

    pub fn upper(&self) -> Point3 {
        [
            self.lower[0] + self.side,
            self.lower[1] + self.side,
            self.lower[2] + self.side,
        ]
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn contains(&self, p: &Point3) -> bool {
        let up = self.upper();
        (0..3).all(|a| p[a] >= self.lower[a] && p[a] <= up[a])
    }

    /// Hierarchical index: root is 0 and child `w` of box `k` is `8k + w`.
    /// `None` once the index no longer fits in 128 bits.
    pub fn morton(&self) -> Option<u128> {
        if self.level * 3 > 127 {
            return None;
        }
        let mut key: u128 = 0;
        for bit in (0..self.level).rev() {
            let w = ((self.coords[0] >> bit) & 1)
                | (((self.coords[1] >> bit) & 1) << 1)
                | (((self.coords[2] >> bit) & 1) << 2);
            key = key * 8 + w as u128;
        }
        Some(key)
    }
}

/// Child octant of `point` inside `b`: bit 0 is x, bit 1 is y, bit 2 is z, and
/// a coordinate exactly at the center goes to the upper half.
pub fn point_to_octant(b: &OctBox, point: &Point3) -> Result<u8> {
    if !b.contains(point) {
        return Err(Error::Logic(format!(
            "point ({}, {}, {}) lies outside box at level {} with lower corner {:?}",
            point[0], point[1], point[2], b.level, b.lower
        )));
    }
    let c = b.center();
    let mut w = 0u8;
    for a in 0..3 {
        if point[a] >= c[a] {
            w |= 1 << a;
        }
    }
    Ok(w)
}

#[derive(Debug, Clone)]
pub struct Octree {
    /// `levels[j]` holds every nonempty box at level `j`, ordered by parent and
    /// then by octant.
    pub levels: Vec<Vec<OctBox>>,
    pub capacity: usize,
    /// Number of node-to-box assignments made during construction.
    pub touches: usize,
    lookup: Vec<HashMap<[u64; 3], usize>>,
}

impl Octree {
    /// Builds the decomposition of already normalized nodes. A box is split
    /// into its nonempty octants whenever it holds more than `capacity` nodes.
    pub fn build(points: &[Point3], capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("octree capacity must be at least 1".into()));
        }
        if points.is_empty() {
            return Err(Error::EmptyInput("octree needs at least one node"));
        }
        if let Some(p) = points
            .iter()
            .find(|p| p.iter().any(|c| !(-0.5..=0.5).contains(c)))
        {
            return Err(Error::Domain(format!(
                "node ({}, {}, {}) is outside the normalized cube",
                p[0], p[1], p[2]
            )));
        }
        let root = OctBox {
            level: 0,
            coords: [0; 3],
            lower: [-0.5; 3],
            side: 1.0,
            nodes: (0..points.len()).collect(),
            parent: None,
            children: Vec::new(),
            octant: 0,
        };
        let mut touches = points.len();
        let mut levels = vec![vec![root]];
        loop {
            let j = levels.len() - 1;
            if levels[j].iter().all(|b| b.nodes.len() <= capacity) {
                break;
            }
            if j >= MAX_LEVEL {
                return Err(Error::LevelCap(MAX_LEVEL));
            }
            let mut next = Vec::new();
            for (k, parent) in levels[j].iter_mut().enumerate() {
                if parent.nodes.len() <= capacity {
                    continue;
                }
                let mut buckets: [Vec<usize>; 8] = Default::default();
                for &i in &parent.nodes {
                    let w = point_to_octant(parent, &points[i])?;
                    buckets[w as usize].push(i);
                    touches += 1;
                }
                let side = 0.5 * parent.side;
                for (w, nodes) in buckets.into_iter().enumerate() {
                    if nodes.is_empty() {
                        continue;
                    }
                    let bits = [w & 1, (w >> 1) & 1, (w >> 2) & 1];
                    let mut lower = parent.lower;
                    let mut coords = parent.coords;
                    for a in 0..3 {
                        lower[a] += bits[a] as f64 * side;
                        coords[a] = coords[a] * 2 + bits[a] as u64;
                    }
                    parent.children.push(next.len());
                    next.push(OctBox {
                        level: j + 1,
                        coords,
                        lower,
                        side,
                        nodes,
                        parent: Some(k),
                        children: Vec::new(),
                        octant: w as u8,
                    });
                }
            }
            levels.push(next);
        }
        let lookup = levels
            .iter()
            .map(|lvl| lvl.iter().enumerate().map(|(i, b)| (b.coords, i)).collect())
            .collect();
        Ok(Self {
            levels,
            capacity,
            touches,
            lookup,
        })
    }

    /// Finest level `n`.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn root(&self) -> &OctBox {
        &self.levels[0][0]
    }

    pub fn boxes(&self, level: usize) -> &[OctBox] {
        &self.levels[level]
    }

    pub fn node_count(&self) -> usize {
        self.root().nodes.len()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &OctBox> {
        self.levels.iter().flatten().filter(|b| b.is_leaf())
    }

    /// Box at `level` with the given grid coordinates, if it is stored.
    pub fn find(&self, level: usize, coords: [u64; 3]) -> Option<usize> {
        self.lookup.get(level)?.get(&coords).copied()
    }

    /// Stored boxes at the same level sharing a face, edge or corner with
    /// box `idx` (the box itself excluded).
    pub fn neighbors(&self, level: usize, idx: usize) -> Vec<usize> {
        let b = &self.levels[level][idx];
        let max = if level >= 64 { u64::MAX } else { (1u64 << level) - 1 };
        let mut out = Vec::new();
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let shift = |c: u64, d: i64| -> Option<u64> {
                        match d {
                            -1 => c.checked_sub(1),
                            1 => (c < max).then_some(c + 1),
                            _ => Some(c),
                        }
                    };
                    let (Some(x), Some(y), Some(z)) = (
                        shift(b.coords[0], dx),
                        shift(b.coords[1], dy),
                        shift(b.coords[2], dz),
                    ) else {
                        continue;
                    };
                    if let Some(i) = self.find(level, [x, y, z]) {
                        out.push(i);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// One line per box: `level k lower_x lower_y lower_z side count`, where
    /// `k` is the hierarchical index (or the in-level position when too deep).
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (j, lvl) in self.levels.iter().enumerate() {
            for (i, b) in lvl.iter().enumerate() {
                let k = b.morton().map(|m| m.to_string()).unwrap_or_else(|| i.to_string());
                let _ = writeln!(
                    s,
                    "{j} {k} {:?} {:?} {:?} {:?} {}",
                    b.lower[0],
                    b.lower[1],
                    b.lower[2],
                    b.side,
                    b.nodes.len()
                );
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> OctBox {
        OctBox {
            level: 0,
            coords: [0; 3],
            lower: [-0.5; 3],
            side: 1.0,
            nodes: vec![],
            parent: None,
            children: vec![],
            octant: 0,
        }
    }

    #[test]
    fn normalize_examples() {
        let (p, n) = normalize_nodes(&[[5.0, 5.0, 5.0]]).unwrap();
        assert_eq!(p, vec![[0.0; 3]]);
        assert_eq!(n.scale, 1.0);
        let (p, n) = normalize_nodes(&[[0.0; 3], [2.0, 0.0, 0.0]]).unwrap();
        assert_eq!(p, vec![[-0.5, 0.0, 0.0], [0.5, 0.0, 0.0]]);
        assert_eq!(n.center, [1.0, 0.0, 0.0]);
        assert_eq!(n.scale, 2.0);
        assert!(normalize_nodes(&[]).is_err());
    }

    #[test]
    fn skewed_cloud_stays_inside_cube() {
        // centroid-centred scaling would push the lone far node outside
        let mut pts = vec![[0.0, 0.0, 0.0]; 1];
        for i in 1..50 {
            pts.push([1e-3 * i as f64, 0.0, 0.0]);
        }
        pts.push([1.0, 0.0, 0.0]);
        let (p, _) = normalize_nodes(&pts).unwrap();
        assert!(p.iter().flatten().all(|c| (-0.5..=0.5).contains(c)));
    }

    #[test]
    fn octant_rules() {
        let b = unit_box();
        assert_eq!(point_to_octant(&b, &[0.0; 3]).unwrap(), 7);
        assert_eq!(point_to_octant(&b, &[-0.5; 3]).unwrap(), 0);
        assert_eq!(point_to_octant(&b, &[0.1, -0.2, 0.3]).unwrap(), 0b101);
        assert!(matches!(
            point_to_octant(&b, &[0.6, 0.0, 0.0]),
            Err(Error::Logic(_))
        ));
    }

    #[test]
    fn single_leaf_when_at_capacity() {
        let pts = vec![[0.1, 0.1, 0.1], [-0.2, 0.3, 0.0], [0.4, -0.4, 0.2]];
        let t = Octree::build(&pts, 3).unwrap();
        assert_eq!(t.depth(), 0);
        assert!(t.root().is_leaf());
    }

    #[test]
    fn octant_centres_split_once() {
        let mut pts = Vec::new();
        for w in 0..8 {
            let s = |b: usize| if (w >> b) & 1 == 1 { 0.25 } else { -0.25 };
            pts.push([s(0), s(1), s(2)]);
        }
        let t = Octree::build(&pts, 1).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(t.boxes(1).len(), 8);
        for (w, b) in t.boxes(1).iter().enumerate() {
            assert_eq!(b.nodes, vec![w]);
            assert_eq!(b.octant as usize, w);
            assert_eq!(b.morton(), Some(w as u128));
            assert_eq!(b.side, 0.5);
        }
        let dump = t.dump();
        assert_eq!(dump.lines().count(), 9);
        assert!(dump.starts_with("0 0 -0.5 -0.5 -0.5 1.0 8"));
    }

    #[test]
    fn coincident_nodes_hit_level_cap() {
        let pts = vec![[0.1, 0.1, 0.1], [0.1, 0.1, 0.1]];
        assert!(matches!(Octree::build(&pts, 1), Err(Error::LevelCap(64))));
    }

    #[test]
    fn neighbors_are_same_level_adjacent() {
        let mut pts = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    pts.push([
                        -0.375 + 0.25 * i as f64,
                        -0.375 + 0.25 * j as f64,
                        -0.375 + 0.25 * k as f64,
                    ]);
                }
            }
        }
        let t = Octree::build(&pts, 1).unwrap();
        assert_eq!(t.depth(), 2);
        let corner = t.find(2, [0, 0, 0]).unwrap();
        assert_eq!(t.neighbors(2, corner).len(), 7);
        let inner = t.find(2, [1, 1, 1]).unwrap();
        assert_eq!(t.neighbors(2, inner).len(), 26);
    }
}
