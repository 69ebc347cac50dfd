//! Optical DC channel gains: generalized Lambertian line-of-sight model,
//! recursive patch-mesh wall reflections, received power and floor
//! irradiance.

use crate::error::{Error, Result};
use crate::geometry::{PdElement, ReceiverSpec, RoomSpec, TransmitterBoard};
use crate::vec::Vec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Lambertian emission parameters: intensity pattern (m+1)/(2π) · cosᵐ φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambertianParams {
    pub order_m: f64,
    pub half_intensity_deg: f64,
}

impl LambertianParams {
    pub fn from_half_intensity(half_intensity_deg: f64) -> Result<Self> {
        Ok(LambertianParams {
            order_m: lambertian_order(half_intensity_deg)?,
            half_intensity_deg,
        })
    }
}

/// Lambertian order m = −ln 2 / ln(cos Φ½). Results within 1e-9 of an
/// integer are snapped so the symbolic cases (60° → 1, 45° → 2) come out
/// exact.
pub fn lambertian_order(half_intensity_deg: f64) -> Result<f64> {
    if half_intensity_deg <= 0.0 || half_intensity_deg >= 90.0 {
        return Err(Error::invalid(
            "half_intensity_deg",
            "must be in (0, 90) degrees",
        ));
    }
    let m = -std::f64::consts::LN_2 / half_intensity_deg.to_radians().cos().ln();
    let snapped = m.round();
    if (m - snapped).abs() < 1e-9 {
        Ok(snapped)
    } else {
        Ok(m)
    }
}

/// Which angular gate zeroes the LOS gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageGate {
    /// Emitter-side gate: covered iff φ ≤ divergence angle.
    Divergence,
    /// Receiver-side gate: accepted iff ψ ≤ PD field of view.
    Fov,
    Both,
}

impl CoverageGate {
    fn uses_divergence(self) -> bool {
        matches!(self, CoverageGate::Divergence | CoverageGate::Both)
    }
    fn uses_fov(self) -> bool {
        matches!(self, CoverageGate::Fov | CoverageGate::Both)
    }
}

/// LOS DC gain (m+1)/(2π d²) · cosᵐ φ · cos ψ · A, zeroed by the coverage
/// gate. `pd_position` is the detector location.
pub fn los_gain(
    board: &TransmitterBoard,
    pd: &PdElement,
    pd_position: Vec3,
    gate: CoverageGate,
) -> f64 {
    let v = pd_position - board.position;
    let d = v.norm();
    assert!(d > 0.0, "degenerate geometry: PD coincides with the board");
    let cos_phi = board.orientation.dot(v) / d;
    let cos_psi = pd.normal.dot(-v) / d;
    if cos_phi <= 0.0 || cos_psi <= 0.0 {
        return 0.0;
    }
    if gate.uses_divergence() && cos_phi < board.divergence_deg.to_radians().cos() {
        return 0.0;
    }
    if gate.uses_fov() && cos_psi < pd.fov_deg.to_radians().cos() {
        return 0.0;
    }
    let m = lambertian_order(board.half_intensity_deg).expect("validated half-intensity angle");
    (m + 1.0) / (2.0 * PI * d * d) * cos_phi.powf(m) * cos_psi * pd.aperture_area()
}

/// One reflective surface element.
#[derive(Debug, Clone, Copy)]
pub struct Patch {
    pub center: Vec3,
    pub normal: Vec3,
    pub area: f64,
    pub reflectivity: f64,
}

/// Walls, ceiling and floor discretized into Lambertian re-emitting patches.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub patches: Vec<Patch>,
    pub patch_size: f64,
}

impl SurfaceMesh {
    /// Meshes all six room surfaces. Patch size above 0.5 m degrades
    /// accuracy; a warning is printed but the mesh is still built.
    pub fn build(room: &RoomSpec, patch_size: f64) -> Result<Self> {
        room.validate()?;
        if patch_size <= 0.0 {
            return Err(Error::invalid("patch_size", "must be positive"));
        }
        if patch_size > 0.5 {
            eprintln!(
                "warning: patch_size {patch_size} m > 0.5 m; reflection accuracy degrades"
            );
        }
        let mut patches = Vec::new();
        let (w, d, h) = (room.width, room.depth, room.height);

        let mut add_plane = |origin: Vec3, u: Vec3, v: Vec3, len_u: f64, len_v: f64, normal: Vec3, rho: f64| {
            let nu = (len_u / patch_size).ceil().max(1.0) as usize;
            let nv = (len_v / patch_size).ceil().max(1.0) as usize;
            let su = len_u / nu as f64;
            let sv = len_v / nv as f64;
            for i in 0..nu {
                for j in 0..nv {
                    let center = origin
                        + u * ((i as f64 + 0.5) * su)
                        + v * ((j as f64 + 0.5) * sv);
                    patches.push(Patch {
                        center,
                        normal,
                        area: su * sv,
                        reflectivity: rho,
                    });
                }
            }
        };

        let ex = Vec3::new(1.0, 0.0, 0.0);
        let ey = Vec3::new(0.0, 1.0, 0.0);
        let ez = Vec3::new(0.0, 0.0, 1.0);
        // Floor (normal up) and ceiling (normal down).
        add_plane(Vec3::new(0.0, 0.0, 0.0), ex, ey, w, d, ez, room.floor_reflectivity);
        add_plane(Vec3::new(0.0, 0.0, h), ex, ey, w, d, -ez, room.ceiling_reflectivity);
        // Four walls, normals pointing into the room.
        add_plane(Vec3::new(0.0, 0.0, 0.0), ex, ez, w, h, ey, room.wall_reflectivity);
        add_plane(Vec3::new(0.0, d, 0.0), ex, ez, w, h, -ey, room.wall_reflectivity);
        add_plane(Vec3::new(0.0, 0.0, 0.0), ey, ez, d, h, ex, room.wall_reflectivity);
        add_plane(Vec3::new(w, 0.0, 0.0), ey, ez, d, h, -ex, room.wall_reflectivity);

        Ok(SurfaceMesh {
            patches,
            patch_size,
        })
    }

    pub fn total_area(&self) -> f64 {
        self.patches.iter().map(|p| p.area).sum()
    }
}

/// Per (board, PD element) DC gains, LOS and reflected parts kept separate.
#[derive(Debug, Clone)]
pub struct GainMatrix {
    pub n_boards: usize,
    pub n_elements: usize,
    /// Maps flat element index → (receiver index, element index within it).
    pub element_index: Vec<(usize, usize)>,
    los: Vec<f64>,
    reflected: Vec<f64>,
    /// Room/bulb parameter fingerprint for cache validation.
    pub meta: String,
}

impl GainMatrix {
    pub fn los(&self, board: usize, element: usize) -> f64 {
        self.los[board * self.n_elements + element]
    }

    pub fn reflected(&self, board: usize, element: usize) -> f64 {
        self.reflected[board * self.n_elements + element]
    }

    pub fn total(&self, board: usize, element: usize) -> f64 {
        self.los(board, element) + self.reflected(board, element)
    }

    /// Flat element index of a receiver's element.
    pub fn element_of(&self, receiver_idx: usize, element_idx: usize) -> usize {
        self.element_index
            .iter()
            .position(|&(r, e)| r == receiver_idx && e == element_idx)
            .expect("element present in matrix")
    }
}

/// Computes the LOS gain matrix, optionally adding patch-mesh reflections
/// up to `max_order` bounces.
pub fn compute_gain_matrix(
    boards: &[TransmitterBoard],
    receivers: &[ReceiverSpec],
    gate: CoverageGate,
    reflections: Option<(&SurfaceMesh, usize)>,
    meta: String,
) -> GainMatrix {
    let mut element_index = Vec::new();
    let mut elements: Vec<(&PdElement, Vec3)> = Vec::new();
    for (ri, r) in receivers.iter().enumerate() {
        for (ei, e) in r.elements.iter().enumerate() {
            element_index.push((ri, ei));
            elements.push((e, r.position));
        }
    }
    let n_elements = elements.len();
    let los: Vec<f64> = boards
        .par_iter()
        .flat_map_iter(|b| {
            elements
                .iter()
                .map(move |(e, p)| los_gain(b, e, *p, gate))
                .collect::<Vec<_>>()
        })
        .collect();
    let reflected = match reflections {
        Some((mesh, max_order)) if max_order >= 1 => {
            reflection_gains(boards, &elements, mesh, max_order, gate)
        }
        _ => vec![0.0; boards.len() * n_elements],
    };
    GainMatrix {
        n_boards: boards.len(),
        n_elements,
        element_index,
        los,
        reflected,
        meta,
    }
}

/// Gain from a Lambertian source to a patch treated as a receiver of the
/// patch's area.
fn source_to_patch(board: &TransmitterBoard, m: f64, patch: &Patch, gate: CoverageGate) -> f64 {
    let v = patch.center - board.position;
    let d2 = v.dot(v);
    if d2 == 0.0 {
        return 0.0;
    }
    let d = d2.sqrt();
    let cos_phi = board.orientation.dot(v) / d;
    let cos_theta = patch.normal.dot(-v) / d;
    if cos_phi <= 0.0 || cos_theta <= 0.0 {
        return 0.0;
    }
    if gate.uses_divergence() && cos_phi < board.divergence_deg.to_radians().cos() {
        return 0.0;
    }
    (m + 1.0) / (2.0 * PI * d2) * cos_phi.powf(m) * cos_theta * patch.area
}

/// First-order Lambertian re-emission from patch `p` toward a receiving
/// surface of area `area` with normal `n` at `target`.
fn patch_to_point(p: &Patch, target: Vec3, n: Vec3, area: f64, fov_deg: Option<f64>) -> f64 {
    let v = target - p.center;
    let d2 = v.dot(v);
    if d2 == 0.0 {
        return 0.0;
    }
    let d = d2.sqrt();
    let cos_emit = p.normal.dot(v) / d;
    let cos_inc = n.dot(-v) / d;
    if cos_emit <= 0.0 || cos_inc <= 0.0 {
        return 0.0;
    }
    if let Some(fov) = fov_deg {
        if cos_inc < fov.to_radians().cos() {
            return 0.0;
        }
    }
    cos_emit / (PI * d2) * cos_inc * area
}

/// Recursive patch-bounce reflection gains; returns a flat
/// [board × element] matrix of the summed orders 1..=max_order.
pub fn reflection_gains(
    boards: &[TransmitterBoard],
    elements: &[(&PdElement, Vec3)],
    mesh: &SurfaceMesh,
    max_order: usize,
    gate: CoverageGate,
) -> Vec<f64> {
    assert!(max_order >= 1, "max_order must be >= 1");
    let n_p = mesh.patches.len();
    let n_b = boards.len();
    let n_e = elements.len();

    // b[p][s]: power bound for re-emission at patch p from board s (unit
    // transmit power), i.e. reflectivity × incident power at this bounce.
    let mut bounce: Vec<f64> = (0..n_p)
        .into_par_iter()
        .flat_map_iter(|pi| {
            let patch = mesh.patches[pi];
            boards
                .iter()
                .map(move |b| {
                    let m = lambertian_order(b.half_intensity_deg)
                        .expect("validated half-intensity angle");
                    patch.reflectivity * source_to_patch(b, m, &patch, gate)
                })
                .collect::<Vec<_>>()
        })
        .collect();

    // Accumulated Σ_k b_k per (patch, board).
    let mut acc = bounce.clone();

    for _ in 2..=max_order {
        let next: Vec<f64> = (0..n_p)
            .into_par_iter()
            .flat_map_iter(|qi| {
                let q = mesh.patches[qi];
                let mut row = vec![0.0; n_b];
                for (pi, p) in mesh.patches.iter().enumerate() {
                    if pi == qi {
                        continue;
                    }
                    let t = patch_to_point(p, q.center, q.normal, q.area, None);
                    if t == 0.0 {
                        continue;
                    }
                    let src = &bounce[pi * n_b..(pi + 1) * n_b];
                    for (s, &w) in src.iter().enumerate() {
                        row[s] += q.reflectivity * t * w;
                    }
                }
                row
            })
            .collect();
        bounce = next;
        for (a, b) in acc.iter_mut().zip(&bounce) {
            *a += b;
        }
    }

    // Gather patch emissions onto each PD element.
    let fov_gate = gate.uses_fov();
    (0..n_b * n_e)
        .into_par_iter()
        .map(|idx| {
            let s = idx / n_e;
            let e = idx % n_e;
            let (pd, pos) = elements[e];
            let fov = if fov_gate { Some(pd.fov_deg) } else { None };
            let mut g = 0.0;
            for (pi, p) in mesh.patches.iter().enumerate() {
                let w = acc[pi * n_b + s];
                if w != 0.0 {
                    g += w * patch_to_point(p, pos, pd.normal, pd.aperture_area(), fov);
                }
            }
            g
        })
        .collect()
}

/// Received optical power for one (board, element) pair.
pub fn received_power(board: &TransmitterBoard, gain_los: f64, gain_reflected: f64) -> f64 {
    board.power * (gain_los + gain_reflected)
}

/// Floor irradiance grid in W/m². Outer index y, inner index x; cell
/// centers at ((i+0.5)·sx, (j+0.5)·sy). No coverage gate: illumination is
/// physical light, not a communication link.
#[derive(Debug, Clone)]
pub struct IrradianceMap {
    pub nx: usize,
    pub ny: usize,
    pub cell_x: f64,
    pub cell_y: f64,
    pub values: Vec<f64>,
}

impl IrradianceMap {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }
}

pub fn floor_irradiance_map(boards: &[TransmitterBoard], room: &RoomSpec) -> IrradianceMap {
    let res = room.floor_grid_resolution;
    let nx = (room.width / res).ceil().max(1.0) as usize;
    let ny = (room.depth / res).ceil().max(1.0) as usize;
    let cell_x = room.width / nx as f64;
    let cell_y = room.depth / ny as f64;
    let up = Vec3::new(0.0, 0.0, 1.0);
    let params: Vec<f64> = boards
        .iter()
        .map(|b| lambertian_order(b.half_intensity_deg).expect("validated half-intensity angle"))
        .collect();
    let values: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let ix = idx % nx;
            let iy = idx / nx;
            let p = Vec3::new((ix as f64 + 0.5) * cell_x, (iy as f64 + 0.5) * cell_y, 0.0);
            let mut e = 0.0;
            for (b, &m) in boards.iter().zip(&params) {
                let v = p - b.position;
                let d2 = v.dot(v);
                let d = d2.sqrt();
                let cos_phi = b.orientation.dot(v) / d;
                let cos_psi = up.dot(-v) / d;
                if cos_phi > 0.0 && cos_psi > 0.0 {
                    e += b.power * (m + 1.0) / (2.0 * PI * d2) * cos_phi.powf(m) * cos_psi;
                }
            }
            e
        })
        .collect();
    IrradianceMap {
        nx,
        ny,
        cell_x,
        cell_y,
        values,
    }
}

/// Writes a gain matrix as CSV: board_id, receiver_id, element_id,
/// los_gain, reflected_gain.
pub fn write_gain_csv<W: std::io::Write>(
    w: &mut W,
    gains: &GainMatrix,
    boards: &[TransmitterBoard],
    receivers: &[ReceiverSpec],
) -> std::io::Result<()> {
    writeln!(w, "board_id,receiver_id,element_id,los_gain,reflected_gain")?;
    for (bi, b) in boards.iter().enumerate() {
        for (flat, &(ri, ei)) in gains.element_index.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{:e},{:e}",
                b.id,
                receivers[ri].id,
                ei,
                gains.los(bi, flat),
                gains.reflected(bi, flat)
            )?;
        }
    }
    Ok(())
}

/// Writes an irradiance map as a CSV grid with x,y headers in meters.
pub fn write_irradiance_csv<W: std::io::Write>(
    w: &mut W,
    map: &IrradianceMap,
) -> std::io::Result<()> {
    write!(w, "y_m\\x_m")?;
    for ix in 0..map.nx {
        write!(w, ",{:.4}", (ix as f64 + 0.5) * map.cell_x)?;
    }
    writeln!(w)?;
    for iy in 0..map.ny {
        write!(w, "{:.4}", (iy as f64 + 0.5) * map.cell_y)?;
        for ix in 0..map.nx {
            write!(w, ",{:e}", map.at(ix, iy))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec::Vec2;
    use approx::assert_relative_eq;

    fn board_at(position: Vec3, orientation: Vec3) -> TransmitterBoard {
        TransmitterBoard {
            id: 0,
            position,
            orientation,
            divergence_deg: 20.0,
            half_intensity_deg: 60.0,
            power: 0.02,
            led_positions: vec![],
        }
    }

    #[test]
    fn lambertian_order_symbolic_cases() {
        assert_eq!(lambertian_order(60.0).unwrap(), 1.0);
        assert_eq!(lambertian_order(45.0).unwrap(), 2.0);
        assert_relative_eq!(lambertian_order(30.0).unwrap(), 4.818842, epsilon = 1e-6);
        assert!(lambertian_order(0.0).is_err());
        assert!(lambertian_order(90.0).is_err());
    }

    #[test]
    fn lambertian_half_intensity_round_trip() {
        for deg in [10.0, 30.0, 45.0, 60.0, 75.0, 89.0] {
            let m = lambertian_order(deg).unwrap();
            let half = deg.to_radians().cos().powf(m);
            assert_relative_eq!(half, 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn los_gain_nadir() {
        // PD directly beneath, m = 1: gain = A / (π d²) with A = π r².
        let b = board_at(Vec3::new(0.0, 0.0, 3.0), Vec3::new(0.0, 0.0, -1.0));
        let pd = PdElement::upward(90.0);
        let g = los_gain(&b, &pd, Vec3::new(0.0, 0.0, 0.0), CoverageGate::Divergence);
        assert_relative_eq!(g, 0.0375 * 0.0375 / 9.0, max_relative = 1e-12);
    }

    #[test]
    fn los_gain_divergence_gate() {
        let b = board_at(Vec3::new(0.0, 0.0, 3.0), Vec3::new(0.0, 0.0, -1.0));
        let pd = PdElement::upward(90.0);
        // Slightly outside the 20° cone.
        let x = 3.0 * 20.5f64.to_radians().tan();
        let g = los_gain(&b, &pd, Vec3::new(x, 0.0, 0.0), CoverageGate::Divergence);
        assert_eq!(g, 0.0);
        // Same geometry under the FOV gate (ψ = 20.5° < 90°): nonzero.
        let g = los_gain(&b, &pd, Vec3::new(x, 0.0, 0.0), CoverageGate::Fov);
        assert!(g > 0.0);
    }

    #[test]
    fn los_gain_behind_detector_plane() {
        let b = board_at(Vec3::new(0.0, 0.0, 3.0), Vec3::new(0.0, 0.0, -1.0));
        let pd = PdElement {
            normal: Vec3::new(0.0, 0.0, -1.0),
            aperture_radius: 0.0375,
            fov_deg: 90.0,
        };
        // Light arrives from above a downward-facing PD: ψ > 90°.
        let g = los_gain(&b, &pd, Vec3::new(0.0, 0.0, 0.0), CoverageGate::Fov);
        assert_eq!(g, 0.0);
    }

    #[test]
    fn los_gain_monotone_in_distance() {
        let b = board_at(Vec3::new(0.0, 0.0, 5.0), Vec3::new(0.0, 0.0, -1.0));
        let pd = PdElement::upward(90.0);
        let mut last = f64::INFINITY;
        for d in [1.0, 2.0, 3.0, 4.0] {
            let g = los_gain(&b, &pd, Vec3::new(0.0, 0.0, 5.0 - d), CoverageGate::Both);
            assert!(g < last);
            last = g;
        }
    }

    #[test]
    fn los_gain_both_gate_is_min() {
        let b = board_at(Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.0, 0.0, -1.0));
        let pd = PdElement::upward(40.0);
        for p in [
            Vec3::new(1.2, 2.0, 0.0),
            Vec3::new(2.5, 2.0, 0.0),
            Vec3::new(1.0, 5.0, 0.0),
        ] {
            let div = los_gain(&b, &pd, p, CoverageGate::Divergence);
            let fov = los_gain(&b, &pd, p, CoverageGate::Fov);
            let both = los_gain(&b, &pd, p, CoverageGate::Both);
            assert!(both <= div.min(fov));
            if div > 0.0 && fov > 0.0 {
                assert_eq!(both, div);
                assert_eq!(both, fov);
            }
        }
    }

    #[test]
    fn lambertian_hemisphere_normalization() {
        // ∫ (m+1)/(2π) cosᵐφ sinφ dφ dθ over the hemisphere = 1.
        for half in [20.0, 30.0, 45.0, 60.0] {
            let m = lambertian_order(half).unwrap();
            let n = 200_000;
            let mut integral = 0.0;
            for i in 0..n {
                let phi = (i as f64 + 0.5) / n as f64 * PI / 2.0;
                integral += (m + 1.0) / (2.0 * PI) * phi.cos().powf(m) * phi.sin();
            }
            integral *= PI / 2.0 / n as f64 * 2.0 * PI;
            assert_relative_eq!(integral, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn mesh_area_matches_room_surface() {
        let room = RoomSpec::square(5.0, 3.0, 0.25);
        let mesh = SurfaceMesh::build(&room, 0.33).unwrap();
        let expected = 2.0 * 5.0 * 5.0 + 4.0 * 5.0 * 3.0;
        assert_relative_eq!(mesh.total_area(), expected, max_relative = 0.01);
    }

    #[test]
    fn zero_reflectivity_zero_reflection() {
        let mut room = RoomSpec::square(5.0, 3.0, 0.25);
        room.wall_reflectivity = 0.0;
        room.ceiling_reflectivity = 0.0;
        room.floor_reflectivity = 0.0;
        let mesh = SurfaceMesh::build(&room, 0.5).unwrap();
        let b = board_at(Vec3::new(2.5, 2.5, 3.0), Vec3::new(0.0, 0.0, -1.0));
        let pd = PdElement::upward(90.0);
        let refl = reflection_gains(
            &[b],
            &[(&pd, Vec3::new(2.0, 2.0, 0.0))],
            &mesh,
            4,
            CoverageGate::Fov,
        );
        assert_eq!(refl, vec![0.0]);
    }

    #[test]
    fn reflection_linear_in_reflectivity_at_first_order() {
        let mut room = RoomSpec::square(5.0, 3.0, 0.25);
        room.wall_reflectivity = 0.3;
        room.ceiling_reflectivity = 0.3;
        room.floor_reflectivity = 0.15;
        let b = board_at(Vec3::new(2.5, 2.5, 3.0), Vec3::new(0.3, 0.0, -0.9539392014169457));
        let pd = PdElement::upward(90.0);
        let pos = Vec3::new(2.0, 2.0, 0.0);
        let mesh = SurfaceMesh::build(&room, 0.5).unwrap();
        let g1 = reflection_gains(&[b.clone()], &[(&pd, pos)], &mesh, 1, CoverageGate::Fov)[0];
        let mut doubled = room.clone();
        doubled.wall_reflectivity *= 2.0;
        doubled.ceiling_reflectivity *= 2.0;
        doubled.floor_reflectivity *= 2.0;
        let mesh2 = SurfaceMesh::build(&doubled, 0.5).unwrap();
        let g2 = reflection_gains(&[b], &[(&pd, pos)], &mesh2, 1, CoverageGate::Fov)[0];
        assert_relative_eq!(g2, 2.0 * g1, max_relative = 1e-12);
    }

    #[test]
    fn reflection_order1_matches_brute_force_on_tiny_mesh() {
        // One absorbing room except a single 4-patch wall; brute-force the
        // two-leg sum over those patches.
        let b = board_at(
            Vec3::new(1.0, 1.0, 2.0),
            Vec3::new(0.6, 0.0, -0.8),
        );
        let pd = PdElement::upward(85.0);
        let pos = Vec3::new(2.0, 1.5, 0.0);
        let patches: Vec<Patch> = (0..4)
            .map(|i| Patch {
                center: Vec3::new(3.0, 0.5 + i as f64 * 0.5, 1.0),
                normal: Vec3::new(-1.0, 0.0, 0.0),
                area: 0.25,
                reflectivity: 0.7,
            })
            .collect();
        let mesh = SurfaceMesh {
            patches: patches.clone(),
            patch_size: 0.5,
        };
        let got = reflection_gains(&[b.clone()], &[(&pd, pos)], &mesh, 1, CoverageGate::Fov)[0];

        let m = lambertian_order(b.half_intensity_deg).unwrap();
        let mut want = 0.0;
        for p in &patches {
            let v1 = p.center - b.position;
            let d1 = v1.norm();
            let cos_phi = b.orientation.dot(v1) / d1;
            let cos_t1 = p.normal.dot(-v1) / d1;
            let v2 = pos - p.center;
            let d2 = v2.norm();
            let cos_emit = p.normal.dot(v2) / d2;
            let cos_psi = pd.normal.dot(-v2) / d2;
            if cos_phi > 0.0 && cos_t1 > 0.0 && cos_emit > 0.0 && cos_psi > 0.0 {
                want += (m + 1.0) / (2.0 * PI * d1 * d1) * cos_phi.powf(m) * cos_t1 * p.area
                    * p.reflectivity
                    * cos_emit / (PI * d2 * d2) * cos_psi * pd.aperture_area();
            }
        }
        assert_relative_eq!(got, want, epsilon = 1e-12);
    }

    #[test]
    fn reflection_weakly_increases_with_order() {
        let room = RoomSpec::square(4.0, 3.0, 0.25);
        let b = board_at(Vec3::new(2.0, 2.0, 3.0), Vec3::new(0.5, 0.0, -0.8660254037844386));
        let pd = PdElement::upward(90.0);
        let pos = Vec3::new(1.0, 2.0, 0.0);
        let mesh = SurfaceMesh::build(&room, 0.5).unwrap();
        let mut last = 0.0;
        for order in 1..=4 {
            let g =
                reflection_gains(&[b.clone()], &[(&pd, pos)], &mesh, order, CoverageGate::Fov)[0];
            assert!(g >= last);
            last = g;
        }
    }

    #[test]
    fn reflection_mesh_convergence() {
        let room = RoomSpec::square(4.0, 3.0, 0.25);
        let b = board_at(Vec3::new(2.0, 2.0, 3.0), Vec3::new(0.5, 0.0, -0.8660254037844386));
        let pd = PdElement::upward(90.0);
        let pos = Vec3::new(1.0, 2.0, 0.0);
        let coarse = SurfaceMesh::build(&room, 0.25).unwrap();
        let fine = SurfaceMesh::build(&room, 0.125).unwrap();
        let gc = reflection_gains(&[b.clone()], &[(&pd, pos)], &coarse, 1, CoverageGate::Fov)[0];
        let gf = reflection_gains(&[b], &[(&pd, pos)], &fine, 1, CoverageGate::Fov)[0];
        assert!((gc - gf).abs() / gf < 0.02, "gc={gc} gf={gf}");
    }

    #[test]
    fn received_power_examples() {
        let b = board_at(Vec3::new(0.0, 0.0, 3.0), Vec3::new(0.0, 0.0, -1.0));
        assert_relative_eq!(
            received_power(&b, 1.5625e-4, 0.0),
            3.125e-6,
            max_relative = 1e-12
        );
        assert_eq!(received_power(&b, 0.0, 0.0), 0.0);
    }

    #[test]
    fn irradiance_single_board() {
        // Straight-down board over a cell center, P = 1 W, m = 1, d = 3:
        // E = 2/(2π·9).
        let mut room = RoomSpec::square(4.0, 3.0, 1.0);
        room.floor_grid_resolution = 1.0;
        let b = TransmitterBoard {
            power: 1.0,
            ..board_at(Vec3::new(0.5, 0.5, 3.0), Vec3::new(0.0, 0.0, -1.0))
        };
        let map = floor_irradiance_map(&[b], &room);
        assert_relative_eq!(map.at(0, 0), 2.0 / (2.0 * PI * 9.0), max_relative = 1e-12);
    }

    #[test]
    fn irradiance_empty_boards() {
        let room = RoomSpec::square(4.0, 3.0, 0.5);
        let map = floor_irradiance_map(&[], &room);
        assert!(map.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn irradiance_symmetry() {
        let room = RoomSpec::square(4.0, 3.0, 0.5);
        let design = crate::geometry::BulbDesign {
            center: room.ceiling_center(),
            radius: 0.4,
            layers: vec![crate::geometry::LayerSpec::new(45.0, 8)],
            board_radius: 0.0375,
            divergence_deg: 20.0,
            half_intensity_deg: 30.0,
            power_per_board: 0.02,
        };
        let boards = crate::geometry::build_bulb(&design).unwrap();
        let map = floor_irradiance_map(&boards, &room);
        for iy in 0..map.ny {
            for ix in 0..map.nx {
                let mirrored = map.at(map.nx - 1 - ix, iy);
                assert_relative_eq!(map.at(ix, iy), mirrored, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn gain_matrix_shapes_and_gate_zeroing() {
        let room = RoomSpec::square(6.0, 3.0, 0.25);
        let design = crate::geometry::BulbDesign {
            center: room.ceiling_center(),
            radius: 0.4,
            layers: vec![crate::geometry::LayerSpec::new(30.0, 8)],
            board_radius: 0.0375,
            divergence_deg: 15.0,
            half_intensity_deg: 30.0,
            power_per_board: 0.02,
        };
        let boards = crate::geometry::build_bulb(&design).unwrap();
        let receivers = vec![
            ReceiverSpec::at_floor(1, Vec2::new(1.0, 1.0), 90.0),
            ReceiverSpec::at_floor(2, Vec2::new(5.0, 5.0), 90.0),
        ];
        let gm = compute_gain_matrix(&boards, &receivers, CoverageGate::Divergence, None, String::new());
        assert_eq!(gm.n_boards, 8);
        assert_eq!(gm.n_elements, 2);
        for bi in 0..gm.n_boards {
            for ei in 0..gm.n_elements {
                assert!(gm.los(bi, ei) >= 0.0);
                assert_eq!(gm.reflected(bi, ei), 0.0);
            }
        }
    }
}
