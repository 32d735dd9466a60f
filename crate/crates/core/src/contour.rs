//! Binary maps and outer-border following.
//!
//! Blobs are found in raster order. The first pixel of every unvisited
//! 8-connected component starts an outer border, which is traced with the
//! Suzuki–Abe border-following step; the component itself is then filled to
//! collect its pixels.

/// A boolean grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMap {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[y * width + x] = f(x, y);
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    #[inline]
    fn at(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

/// The outer border of one 8-connected blob.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    boundary: Vec<(usize, usize)>,
    pixels: Vec<(usize, usize)>,
    centroid: (f64, f64),
    bbox: BBox,
}

impl Contour {
    /// Border pixels in tracing order, starting at the top-left pixel.
    pub fn boundary(&self) -> &[(usize, usize)] {
        &self.boundary
    }

    /// All pixels of the blob, in fill order.
    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    /// Pixel count of the blob.
    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    /// Mean `(x, y)` of the blob's pixels.
    pub fn centroid(&self) -> (f64, f64) {
        self.centroid
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn start(&self) -> (usize, usize) {
        self.boundary[0]
    }
}

// Neighbour offsets in clockwise order (y grows downwards), starting west.
const NEIGHBOURS: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn direction(from: (isize, isize), to: (isize, isize)) -> usize {
    let delta = (to.0 - from.0, to.1 - from.1);
    NEIGHBOURS.iter().position(|&n| n == delta).expect("adjacent pixels")
}

fn offset(p: (isize, isize), dir: usize) -> (isize, isize) {
    (p.0 + NEIGHBOURS[dir].0, p.1 + NEIGHBOURS[dir].1)
}

/// Trace the outer border starting at `start`, whose west neighbour is
/// background.
fn follow_border(bin: &BinaryMap, start: (isize, isize)) -> Vec<(usize, usize)> {
    let as_usize = |p: (isize, isize)| (p.0 as usize, p.1 as usize);
    // Clockwise search from the west neighbour for the first foreground pixel.
    let Some(first) = (0..8).map(|k| offset(start, k)).find(|&(x, y)| bin.at(x, y)) else {
        return vec![as_usize(start)];
    };
    let mut boundary = Vec::new();
    let mut prev = first;
    let mut cur = start;
    loop {
        boundary.push(as_usize(cur));
        // Counter-clockwise from just after `prev` around `cur`.
        let k = direction(cur, prev);
        let next = (1..=8)
            .map(|i| offset(cur, (k + 8 - i) % 8))
            .find(|&(x, y)| bin.at(x, y))
            .expect("cur has at least one foreground neighbour");
        if next == start && cur == first {
            break;
        }
        prev = cur;
        cur = next;
    }
    boundary
}

/// Outer contours of all 8-connected blobs with at least `min_area` pixels,
/// largest first; equal areas are ordered by their top-left start pixel in
/// raster order.
pub fn extract_contours(bin: &BinaryMap, min_area: usize) -> Vec<Contour> {
    let (w, h) = (bin.width, bin.height);
    let mut visited = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !bin.get(x, y) || visited[y * w + x] {
                continue;
            }
            let boundary = follow_border(bin, (x as isize, y as isize));

            let mut pixels = Vec::new();
            let mut bbox = BBox { x0: x, y0: y, x1: x, y1: y };
            let (mut sx, mut sy) = (0usize, 0usize);
            visited[y * w + x] = true;
            stack.push((x, y));
            while let Some((px, py)) = stack.pop() {
                pixels.push((px, py));
                sx += px;
                sy += py;
                bbox.x0 = bbox.x0.min(px);
                bbox.x1 = bbox.x1.max(px);
                bbox.y0 = bbox.y0.min(py);
                bbox.y1 = bbox.y1.max(py);
                for &(dx, dy) in &NEIGHBOURS {
                    let (nx, ny) = (px as isize + dx, py as isize + dy);
                    if bin.at(nx, ny) {
                        let i = ny as usize * w + nx as usize;
                        if !visited[i] {
                            visited[i] = true;
                            stack.push((nx as usize, ny as usize));
                        }
                    }
                }
            }
            if pixels.len() < min_area.max(1) {
                continue;
            }
            let n = pixels.len() as f64;
            out.push(Contour {
                boundary,
                centroid: (sx as f64 / n, sy as f64 / n),
                pixels,
                bbox,
            });
        }
    }
    out.sort_by(|a, b| {
        b.area()
            .cmp(&a.area())
            .then_with(|| (a.start().1, a.start().0).cmp(&(b.start().1, b.start().0)))
    });
    out
}
