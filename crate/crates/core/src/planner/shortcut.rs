use rand::Rng;

use super::Path;
use crate::cspace::Space;

/// Random shortcutting: pick two waypoints in the same maximal same-state
/// run and replace the stretch between them by a straight segment
/// (discretized at δ) when it is collision-free and strictly shorter.
/// Run endpoints, and therefore every state change, are never touched.
pub fn shortcut<R: Rng + ?Sized>(path: &Path, attempts: usize, rng: &mut R, space: &Space, delta: f64) -> Path {
    let mut w = path.waypoints.clone();
    for _ in 0..attempts {
        if w.len() < 3 {
            break;
        }
        let a = rng.random_range(0..w.len());
        let state = w[a].state;
        let mut lo = a;
        while lo > 0 && w[lo - 1].state == state {
            lo -= 1;
        }
        let mut hi = a;
        while hi + 1 < w.len() && w[hi + 1].state == state {
            hi += 1;
        }
        let b = rng.random_range(lo..=hi);
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        if j < i + 2 {
            continue;
        }
        let old: f64 = (i..j).map(|k| (&w[k + 1].q - &w[k].q).norm()).sum();
        let direct = (&w[j].q - &w[i].q).norm();
        if !(direct < old) {
            continue;
        }
        let n = (direct / delta).ceil().max(1.0) as usize;
        let middle: Vec<_> = (1..n)
            .map(|k| space.configuration(Space::interpolate_q(&w[i].q, &w[j].q, k as f64 / n as f64), state))
            .collect();
        // Check the new edges exactly as `Path::check` will, so collision
        // sampling happens at the same points.
        let mut corners = vec![&w[i].q];
        corners.extend(middle.iter().map(|c| &c.q));
        corners.push(&w[j].q);
        let free = middle.iter().all(|c| space.is_free(c))
            && corners.windows(2).all(|e| space.segment_is_free(e[0], e[1], state, delta / 4.0));
        if !free {
            continue;
        }
        w.splice(i + 1..j, middle);
    }
    Path { waypoints: w }
}
