//! Edge-fading amplitude panning over a polygon mesh of the loudspeaker setup.
//!
//! The mesh is the convex hull of the speaker unit vectors, with virtual
//! speakers added at the poles (and on wide horizontal gaps) so that it
//! encloses the listener. Coplanar hull triangles are merged into polygons.
//! A source is projected along its direction onto the face it passes
//! through; inside that polygon every vertex gain falls off linearly towards
//! each edge not touching the vertex, and the smallest of those ratios is
//! kept. Virtual speaker gains are shared equally among the real speakers
//! they connect to, then the gains are power normalized.

use crate::error::{PismError, Result};
use crate::render::layout::{Speaker, SpeakerLayout};
use crate::scene::Direction;

type Vec3 = [f64; 3];

const PLANE_EPS: f64 = 1e-9;
const POLE_ELEVATION_DEG: f64 = 45.0;
const MAX_HORIZONTAL_GAP_DEG: f64 = 160.0;

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Distance of `p` from the line through `a` and `b`.
fn line_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = sub(b, a);
    norm(cross(sub(p, a), ab)) / norm(ab)
}

/// Power-normalized panning gains over the panned (non-LFE) speakers.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectResponses(pub Vec<f64>);

impl DirectResponses {
    pub fn gains(&self) -> &[f64] {
        &self.0
    }

    pub fn power(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum()
    }
}

#[derive(Debug, Clone)]
struct Face {
    normal: Vec3,
    offset: f64,
    /// Vertex indices in order around the face.
    vertices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct EfapPanner {
    points: Vec<Vec3>,
    num_real: usize,
    faces: Vec<Face>,
    /// For every virtual vertex, the real speakers it shares an edge with.
    virtual_neighbours: Vec<Vec<usize>>,
}

impl EfapPanner {
    pub fn new(layout: &SpeakerLayout) -> Result<Self> {
        let speakers = layout.panned_speakers();
        Self::from_speakers(&speakers)
    }

    pub fn from_speakers(speakers: &[Speaker]) -> Result<Self> {
        if speakers.len() < 3 {
            return Err(PismError::UnsupportedLayout(format!(
                "panning needs at least 3 speakers, got {}",
                speakers.len()
            )));
        }
        let mut points: Vec<Vec3> = speakers
            .iter()
            .map(|s| Direction::new(s.azimuth_deg, s.elevation_deg).unit_vector())
            .collect();
        let num_real = points.len();
        for d in virtual_speakers(speakers) {
            points.push(d.unit_vector());
        }
        let faces = convex_hull_faces(&points)?;

        let mut virtual_neighbours = vec![Vec::new(); points.len() - num_real];
        for face in &faces {
            let m = face.vertices.len();
            for j in 0..m {
                let a = face.vertices[j];
                let b = face.vertices[(j + 1) % m];
                for (v, r) in [(a, b), (b, a)] {
                    if v >= num_real && r < num_real && !virtual_neighbours[v - num_real].contains(&r) {
                        virtual_neighbours[v - num_real].push(r);
                    }
                }
            }
        }
        Ok(EfapPanner {
            points,
            num_real,
            faces,
            virtual_neighbours,
        })
    }

    pub fn num_speakers(&self) -> usize {
        self.num_real
    }

    /// Number of mesh polygons, for inspection.
    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn face_sizes(&self) -> Vec<usize> {
        self.faces.iter().map(|f| f.vertices.len()).collect()
    }

    pub fn gains(&self, direction: Direction) -> DirectResponses {
        let u = direction.unit_vector();
        // the ray leaves the hull through the face with the smallest hit distance
        let mut best: Option<(f64, &Face)> = None;
        for face in &self.faces {
            let c = dot(face.normal, u);
            if c <= 0.0 {
                continue;
            }
            let t = face.offset / c;
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, face));
            }
        }
        let (t, face) = best.expect("hull encloses the origin");
        let p = scale(u, t);

        let m = face.vertices.len();
        let verts: Vec<Vec3> = face.vertices.iter().map(|&i| self.points[i]).collect();
        let mut all = vec![0.0; self.points.len()];
        for i in 0..m {
            let mut g = f64::INFINITY;
            for j in 0..m {
                let k = (j + 1) % m;
                if j == i || k == i {
                    continue;
                }
                let ratio = line_distance(p, verts[j], verts[k]) / line_distance(verts[i], verts[j], verts[k]);
                g = g.min(ratio);
            }
            all[face.vertices[i]] = g.clamp(0.0, 1.0);
        }

        let mut gains = all[..self.num_real].to_vec();
        for (v, neighbours) in self.virtual_neighbours.iter().enumerate() {
            let g = all[self.num_real + v];
            if g > 0.0 && !neighbours.is_empty() {
                let share = g / neighbours.len() as f64;
                for &r in neighbours {
                    gains[r] += share;
                }
            }
        }

        let power: f64 = gains.iter().map(|g| g * g).sum();
        if power <= 0.0 {
            // only reachable through a degenerate mesh; fall back to the closest speaker
            let nearest = (0..self.num_real)
                .max_by(|&a, &b| dot(self.points[a], u).total_cmp(&dot(self.points[b], u)))
                .unwrap_or(0);
            gains.iter_mut().for_each(|g| *g = 0.0);
            gains[nearest] = 1.0;
            return DirectResponses(gains);
        }
        let inv = power.sqrt().recip();
        DirectResponses(gains.into_iter().map(|g| g * inv).collect())
    }
}

/// Poles are added unless a real speaker is within 45 degrees of them, and
/// horizontal gaps wider than 160 degrees are split.
fn virtual_speakers(speakers: &[Speaker]) -> Vec<Direction> {
    let mut out = Vec::new();
    let max_el = speakers.iter().map(|s| s.elevation_deg).fold(f64::MIN, f64::max);
    let min_el = speakers.iter().map(|s| s.elevation_deg).fold(f64::MAX, f64::min);
    if max_el < POLE_ELEVATION_DEG {
        out.push(Direction::new(0.0, 90.0));
    }
    if min_el > -POLE_ELEVATION_DEG {
        out.push(Direction::new(0.0, -90.0));
    }
    let mut az: Vec<f64> = speakers
        .iter()
        .filter(|s| s.elevation_deg.abs() < POLE_ELEVATION_DEG)
        .map(|s| Direction::new(s.azimuth_deg, 0.0).azimuth_deg())
        .collect();
    az.sort_by(f64::total_cmp);
    az.dedup();
    if az.is_empty() {
        return out;
    }
    for i in 0..az.len() {
        let start = az[i];
        let end = if i + 1 < az.len() { az[i + 1] } else { az[0] + 360.0 };
        let gap = end - start;
        if gap > MAX_HORIZONTAL_GAP_DEG {
            let pieces = (gap / MAX_HORIZONTAL_GAP_DEG).ceil() as usize;
            for p in 1..pieces {
                out.push(Direction::new(start + gap * p as f64 / pieces as f64, 0.0));
            }
        }
    }
    out
}

/// Faces of the convex hull of unit vectors, by testing every vertex triple
/// as a supporting plane. Point counts are tiny (at most ~16).
fn convex_hull_faces(points: &[Vec3]) -> Result<Vec<Face>> {
    let n = points.len();
    let mut faces: Vec<Face> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let nrm = cross(sub(points[j], points[i]), sub(points[k], points[i]));
                let len = norm(nrm);
                if len < 1e-12 {
                    continue;
                }
                let mut normal = scale(nrm, 1.0 / len);
                let mut offset = dot(normal, points[i]);
                if offset < 0.0 {
                    normal = scale(normal, -1.0);
                    offset = -offset;
                }
                if offset < PLANE_EPS {
                    continue;
                }
                if points.iter().any(|&p| dot(normal, p) > offset + PLANE_EPS) {
                    continue;
                }
                let duplicate = faces
                    .iter()
                    .any(|f| (f.offset - offset).abs() < 1e-7 && norm(sub(f.normal, normal)) < 1e-7);
                if duplicate {
                    continue;
                }
                let on_plane: Vec<usize> = (0..n)
                    .filter(|&p| (dot(normal, points[p]) - offset).abs() <= PLANE_EPS)
                    .collect();
                faces.push(Face {
                    normal,
                    offset,
                    vertices: order_around(points, &on_plane, normal),
                });
            }
        }
    }
    if faces.len() < 4 {
        return Err(PismError::UnsupportedLayout(
            "speaker mesh does not enclose the listening position".into(),
        ));
    }
    Ok(faces)
}

fn order_around(points: &[Vec3], idx: &[usize], normal: Vec3) -> Vec<usize> {
    let m = idx.len() as f64;
    let centre = idx.iter().fold([0.0; 3], |acc, &i| {
        let p = points[i];
        [acc[0] + p[0] / m, acc[1] + p[1] / m, acc[2] + p[2] / m]
    });
    let first = sub(points[idx[0]], centre);
    let e1 = scale(first, 1.0 / norm(first));
    let e2 = cross(normal, e1);
    let mut with_angle: Vec<(f64, usize)> = idx
        .iter()
        .map(|&i| {
            let d = sub(points[i], centre);
            (dot(d, e2).atan2(dot(d, e1)), i)
        })
        .collect();
    with_angle.sort_by(|a, b| a.0.total_cmp(&b.0));
    with_angle.into_iter().map(|(_, i)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::layout::LayoutName;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn panner(name: LayoutName) -> (SpeakerLayout, EfapPanner) {
        let layout = SpeakerLayout::cicp(name);
        let p = EfapPanner::new(&layout).unwrap();
        (layout, p)
    }

    fn index_of(layout: &SpeakerLayout, label: &str) -> usize {
        layout.panned_speakers().iter().position(|s| s.label == label).unwrap()
    }

    #[test]
    fn speaker_positions_get_unit_gain() {
        for name in LayoutName::ALL {
            let (layout, p) = panner(name);
            for (i, s) in layout.panned_speakers().iter().enumerate() {
                let g = p.gains(Direction::new(s.azimuth_deg, s.elevation_deg));
                for (j, &v) in g.gains().iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-9, "{name} {} -> {j}: {v}", s.label);
                }
            }
        }
    }

    #[test]
    fn front_left_of_7_1_4() {
        let (layout, p) = panner(LayoutName::Surround7_1_4);
        let g = p.gains(Direction::new(30.0, 0.0));
        assert!((g.gains()[index_of(&layout, "L")] - 1.0).abs() < 1e-12);
        let g = p.gains(Direction::new(0.0, 0.0));
        assert!((g.gains()[index_of(&layout, "C")] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn midpoint_of_adjacent_pair_is_balanced() {
        let cases = [
            (LayoutName::Surround7_1_4, 60.0, "L", "Lss"),
            (LayoutName::Surround7_1_4, -112.5, "Rss", "Rb"),
            (LayoutName::Surround5_1, 70.0, "L", "Ls"),
            (LayoutName::Surround7_1, 15.0, "C", "L"),
        ];
        for (name, az, a, b) in cases {
            let (layout, p) = panner(name);
            let g = p.gains(Direction::new(az, 0.0));
            let (ia, ib) = (index_of(&layout, a), index_of(&layout, b));
            let h = std::f64::consts::FRAC_1_SQRT_2;
            assert!((g.gains()[ia] - h).abs() < 1e-9, "{name} {az}: {:?}", g.gains());
            assert!((g.gains()[ib] - h).abs() < 1e-9);
            for (j, &v) in g.gains().iter().enumerate() {
                if j != ia && j != ib {
                    assert!(v.abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn normalized_and_nonnegative_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for name in LayoutName::ALL {
            let (_, p) = panner(name);
            for _ in 0..2000 {
                let az = rng.gen_range(-180.0..180.0);
                let el = rng.gen_range(-90.0..=90.0);
                let g = p.gains(Direction::new(az, el));
                assert!((g.power() - 1.0).abs() < 1e-12);
                assert!(g.gains().iter().all(|&v| v >= 0.0 && v.is_finite()));
            }
        }
    }

    #[test]
    fn symmetric_layouts_pan_symmetrically() {
        let (layout, p) = panner(LayoutName::Surround5_1_4);
        let spk = layout.panned_speakers();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let az: f64 = rng.gen_range(-180.0..180.0);
            let el = rng.gen_range(-60.0..80.0);
            let g = p.gains(Direction::new(az, el));
            let m = p.gains(Direction::new(-az, el));
            for (i, s) in spk.iter().enumerate() {
                let mirror = spk
                    .iter()
                    .position(|t| t.azimuth_deg == -s.azimuth_deg && t.elevation_deg == s.elevation_deg)
                    .unwrap();
                assert!((g.gains()[i] - m.gains()[mirror]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn elevated_ring_forms_quads() {
        let (_, p) = panner(LayoutName::Surround5_1_4);
        // L/Ls with Ltf/Ltr and R/Rs with Rtf/Rtr are coplanar quads
        assert!(p.face_sizes().iter().filter(|&&s| s == 4).count() >= 2);
    }

    #[test]
    fn too_few_speakers() {
        let layout = SpeakerLayout::custom(vec![
            Speaker {
                label: "a",
                azimuth_deg: 30.0,
                elevation_deg: 0.0,
                is_lfe: false,
            },
            Speaker {
                label: "b",
                azimuth_deg: -30.0,
                elevation_deg: 0.0,
                is_lfe: false,
            },
            Speaker {
                label: "lfe",
                azimuth_deg: 0.0,
                elevation_deg: 0.0,
                is_lfe: true,
            },
        ]);
        assert!(matches!(EfapPanner::new(&layout), Err(PismError::UnsupportedLayout(_))));
    }

    #[test]
    fn gains_vary_continuously() {
        let (_, p) = panner(LayoutName::Surround7_1_4);
        let mut prev = p.gains(Direction::new(-180.0, 10.0));
        for step in 1..=3600 {
            let az = -180.0 + step as f64 * 0.1;
            let g = p.gains(Direction::new(az, 10.0));
            let diff: f64 = g.gains().iter().zip(prev.gains()).map(|(a, b)| (a - b).abs()).sum();
            assert!(diff < 0.05, "jump {diff} at {az}");
            prev = g;
        }
    }
}
