//! Marching-squares extraction of the `φ = 0` iso-contour.

use std::collections::HashMap;

use crate::grid::Grid;
use crate::scalar::Real;

/// Piecewise-linear curve through sub-pixel points `(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
    /// Closed loops repeat no point; the closing segment is implicit.
    pub closed: bool,
}

impl Polyline {
    pub fn length(&self) -> f64 {
        let seg = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
        let open: f64 = self.points.windows(2).map(|w| seg(w[0], w[1])).sum();
        match (self.closed, self.points.first(), self.points.last()) {
            (true, Some(&first), Some(&last)) => open + seg(last, first),
            _ => open,
        }
    }

    /// Iterates the segments, including the closing one for loops.
    pub fn segments(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        let n = self.points.len();
        let count = if self.closed && n > 1 { n } else { n.saturating_sub(1) };
        (0..count).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }
}

// Grid-edge key: horizontal edges (x,y)-(x+1,y) are even, vertical edges (x,y)-(x,y+1) odd.
#[inline]
fn h_edge(w: usize, x: usize, y: usize) -> usize {
    2 * (y * w + x)
}

#[inline]
fn v_edge(w: usize, x: usize, y: usize) -> usize {
    2 * (y * w + x) + 1
}

/// Polylines tracing `φ = 0`, interpolated linearly along grid edges. Pixels with
/// `φ < 0` are inside; saddle cells are resolved by the sign of the cell-center average.
/// Returns an empty set (and logs a warning) when `φ` has a single sign.
pub fn zero_contour<T: Real>(phi: &Grid<T>) -> Vec<Polyline> {
    let (w, h) = (phi.width(), phi.height());
    let inside = |x: usize, y: usize| *phi.get(x, y) < T::zero();
    let has_in = phi.as_slice().iter().any(|&v| v < T::zero());
    let has_out = phi.as_slice().iter().any(|&v| v >= T::zero());
    if !(has_in && has_out) {
        log::warn!("zero contour requested for a single-sign level set (collapsed contour)");
        return Vec::new();
    }

    let vertex = |key: usize| -> (f64, f64) {
        let cell = key / 2;
        let (x, y) = (cell % w, cell / w);
        let (bx, by) = if key.is_multiple_of(2) { (x + 1, y) } else { (x, y + 1) };
        let pa = phi.get(x, y).to_f64_lossy();
        let pb = phi.get(bx, by).to_f64_lossy();
        let t = pa / (pa - pb);
        (x as f64 + t * (bx as f64 - x as f64), y as f64 + t * (by as f64 - y as f64))
    };

    let mut segments: Vec<(usize, usize)> = Vec::new();
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let c = [inside(x, y), inside(x + 1, y), inside(x + 1, y + 1), inside(x, y + 1)];
            // edges: top (c0-c1), right (c1-c2), bottom (c3-c2), left (c0-c3)
            let e = [h_edge(w, x, y), v_edge(w, x + 1, y), h_edge(w, x, y + 1), v_edge(w, x, y)];
            let cut = [c[0] != c[1], c[1] != c[2], c[3] != c[2], c[0] != c[3]];
            let crossed: Vec<usize> = (0..4).filter(|&i| cut[i]).map(|i| e[i]).collect();
            match crossed.len() {
                2 => segments.push((crossed[0], crossed[1])),
                4 => {
                    let center = (*phi.get(x, y) + *phi.get(x + 1, y) + *phi.get(x + 1, y + 1) + *phi.get(x, y + 1))
                        * T::lit(0.25);
                    if (center < T::zero()) == c[0] {
                        // c0 and c2 joined through the center; isolate c1 and c3
                        segments.push((e[0], e[1]));
                        segments.push((e[2], e[3]));
                    } else {
                        segments.push((e[3], e[0]));
                        segments.push((e[1], e[2]));
                    }
                }
                _ => {}
            }
        }
    }

    let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, &(a, b)) in segments.iter().enumerate() {
        adjacency.entry(a).or_default().push(i);
        adjacency.entry(b).or_default().push(i);
    }

    let mut visited = vec![false; segments.len()];
    let mut out = Vec::new();
    let walk = |start_seg: usize, start_key: usize, visited: &mut Vec<bool>| {
        let mut keys = vec![start_key];
        let mut seg = start_seg;
        let mut key = start_key;
        loop {
            visited[seg] = true;
            let (a, b) = segments[seg];
            let other = if a == key { b } else { a };
            keys.push(other);
            key = other;
            match adjacency[&other].iter().copied().find(|&s| !visited[s]) {
                Some(next) => seg = next,
                None => break,
            }
        }
        let closed = keys.len() > 2 && keys.first() == keys.last();
        if closed {
            keys.pop();
        }
        Polyline { points: keys.into_iter().map(vertex).collect(), closed }
    };

    // open chains start at grid-boundary edges (degree one)
    let mut starts: Vec<usize> = adjacency.iter().filter(|(_, s)| s.len() == 1).map(|(&k, _)| k).collect();
    starts.sort_unstable();
    for key in starts {
        let seg = adjacency[&key][0];
        if !visited[seg] {
            out.push(walk(seg, key, &mut visited));
        }
    }
    for seg in 0..segments.len() {
        if !visited[seg] {
            let key = segments[seg].0;
            out.push(walk(seg, key, &mut visited));
        }
    }
    out
}
