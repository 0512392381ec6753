//! Lens-stack synthesis: wedge, two thin lenses and a telecentric stop.
//!
//! The object (waveguide exit) sits in the front focal plane of lens 1 and
//! the stop in its back focal plane, so every channel shares the same pupil.
//! Focal lengths come from a deterministic grid search refined by
//! Nelder-Mead on the geometric imaging residuals.

use serde::{Deserialize, Serialize};

use super::optimize::nelder_mead;
use crate::error::{ensure_positive, Error, Result};
use crate::gauss::{beam_from_mfd, propagate_abcd, waist_ratio, AbcdElement, AstigmaticGaussian, Axis, RayMatrix};
use crate::wave::{
    find_focus, make_gaussian_field, propagate_through, ElementKind, FocusSearch, Grid, Launch, LensProfile,
    PhaseElement, PlacedElement,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    #[default]
    TwoLens,
    /// One lens at finite conjugates; no stop.
    SingleLens,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignTargets {
    /// Image/object size ratio (positive; the stack inverts).
    pub magnification: f64,
    /// Object-side 1/e^2 NA of the x mode.
    pub numerical_aperture: f64,
    /// Distance from the last lens to the ion plane, metres.
    pub image_distance: f64,
    pub source_mfd: (f64, f64),
    pub wavelength: f64,
    pub max_stack_height: f64,
    /// Largest clear-aperture diameter any element may have, metres.
    pub aperture_budget: f64,
    /// Stop radius in units of the 1/e^2 beam radius; 0 removes the stop.
    pub stop_fill: f64,
    pub topology: Topology,
    pub ambient_index: f64,
    /// Index contrast of the tilt-correcting wedge.
    pub wedge_index_step: f64,
    /// Axial room between the stop and lens 2.
    pub stop_clearance: f64,
}

/// Relative NA mismatch tolerated between the source mode and the target.
const NA_TOLERANCE: f64 = 0.05;
/// Agreement required between ABCD and wave-optics waist ratios.
const WAVE_TOLERANCE: f64 = 0.03;
const RESIDUAL_TOLERANCE: f64 = 1e-9;

impl DesignTargets {
    /// Targets with the usual defaults for everything but the optical
    /// requirements.
    pub fn new(
        magnification: f64,
        numerical_aperture: f64,
        image_distance: f64,
        source_mfd: (f64, f64),
        wavelength: f64,
    ) -> Self {
        Self {
            magnification,
            numerical_aperture,
            image_distance,
            source_mfd,
            wavelength,
            max_stack_height: 1e-3,
            aperture_budget: 300e-6,
            stop_fill: 1.3,
            topology: Topology::TwoLens,
            ambient_index: 1.0,
            wedge_index_step: 0.5,
            stop_clearance: 5e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("magnification", self.magnification)?;
        if !(self.numerical_aperture > 0.0 && self.numerical_aperture < 1.0) {
            return Err(Error::invalid("numerical_aperture", "must lie in (0, 1)"));
        }
        ensure_positive("image_distance", self.image_distance)?;
        ensure_positive("source_mfd", self.source_mfd.0)?;
        ensure_positive("source_mfd", self.source_mfd.1)?;
        ensure_positive("wavelength", self.wavelength)?;
        ensure_positive("max_stack_height", self.max_stack_height)?;
        ensure_positive("aperture_budget", self.aperture_budget)?;
        if !(self.stop_fill >= 0.0 && self.stop_fill.is_finite()) {
            return Err(Error::invalid("stop_fill", "must be >= 0"));
        }
        if !(self.ambient_index >= 1.0) {
            return Err(Error::invalid("ambient_index", "must be >= 1"));
        }
        ensure_positive("wedge_index_step", self.wedge_index_step)?;
        if !(self.stop_clearance >= 0.0) {
            return Err(Error::invalid("stop_clearance", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Predicted {
    /// Image/object waist ratio per axis from Gaussian ABCD propagation.
    pub magnification: (f64, f64),
    /// Ray-matrix `A` element at the ion plane (negative: inverted image).
    pub geometric_magnification: f64,
    pub image_distance: f64,
    /// Gaussian image-waist distances from the last lens per axis.
    pub waist_distance: (f64, f64),
    pub object_na: f64,
    pub image_na: f64,
    /// Object-side NA subtended by the stop (0 without a stop).
    pub stop_na: f64,
    pub stack_height: f64,
    pub clear_aperture: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveCheck {
    /// Mode field diameters of the probe beam.
    pub probe_mfd: (f64, f64),
    pub abcd_ratio: (f64, f64),
    pub wave_ratio: (f64, f64),
    pub waist_distance: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LensStackPrescription {
    pub topology: Topology,
    pub elements: Vec<PlacedElement>,
    pub focal_lengths: Vec<f64>,
    pub source_tilt_deg: f64,
    pub wavelength: f64,
    pub ambient_index: f64,
    pub source_mfd: (f64, f64),
    pub predicted: Predicted,
    pub wave_check: Option<WaveCheck>,
}

impl LensStackPrescription {
    /// Axial position of the last element (the stack exit plane).
    pub fn exit_plane(&self) -> f64 {
        self.elements.last().map_or(0.0, |e| e.z)
    }

    /// Copy with the wedge and stop removed.
    pub fn lenses_only(&self) -> Vec<PlacedElement> {
        self.elements
            .iter()
            .filter(|e| matches!(e.element.kind, ElementKind::ThinLens { .. }))
            .copied()
            .collect()
    }
}

/// Ray matrix from the source plane to a plane `image_distance` behind
/// lens 2 for the telecentric layout (`s0 = f1`, lens separation `gap`).
fn two_lens_matrix(f1: f64, f2: f64, gap: f64, image_distance: f64) -> RayMatrix {
    RayMatrix::free_space(image_distance)
        * RayMatrix::thin_lens(f2)
        * RayMatrix::free_space(gap)
        * RayMatrix::thin_lens(f1)
        * RayMatrix::free_space(f1)
}

struct TwoLensSolution {
    f1: f64,
    f2: f64,
    gap: f64,
    residual: f64,
}

fn solve_two_lens(t: &DesignTargets) -> TwoLensSolution {
    let l = t.image_distance;
    let m = t.magnification;
    let gap_for = |f1: f64, extra: f64| f1 + t.stop_clearance + extra * f1;
    let residuals = |f1: f64, f2: f64, extra: f64| {
        let s = two_lens_matrix(f1, f2, gap_for(f1, extra), l);
        [s.b / l, (s.a.abs() - m) / m]
    };
    let cost = |p: &[f64], extra: f64| {
        let r = residuals(p[0].exp(), p[1].exp(), extra);
        r[0] * r[0] + r[1] * r[1]
    };

    // Coarse log grid over both focal lengths, then simplex refinement of
    // the best few points for each extra-gap option.
    let (lo, hi) = ((l / 100.0).ln(), (100.0 * l).ln());
    let n = 41;
    let mut best: Option<TwoLensSolution> = None;
    for extra in [0.0, 0.25, 0.5] {
        let mut grid: Vec<(f64, [f64; 2])> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let p = [
                    lo + (hi - lo) * i as f64 / (n - 1) as f64,
                    lo + (hi - lo) * j as f64 / (n - 1) as f64,
                ];
                grid.push((cost(&p, extra), p));
            }
        }
        grid.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, start) in grid.iter().take(3) {
            let m = nelder_mead(|p| cost(p, extra), start, 0.05, 1e-30, 4000);
            let (f1, f2) = gauss_newton_polish(m.x[0].exp(), m.x[1].exp(), |a, b| residuals(a, b, extra));
            let r = residuals(f1, f2, extra);
            let residual = r[0].abs().max(r[1].abs());
            let candidate = TwoLensSolution {
                f1,
                f2,
                gap: gap_for(f1, extra),
                residual,
            };
            let height = |s: &TwoLensSolution| s.f1 + s.gap;
            best = match best {
                None => Some(candidate),
                Some(b) => {
                    let c_ok = candidate.residual < RESIDUAL_TOLERANCE;
                    let b_ok = b.residual < RESIDUAL_TOLERANCE;
                    let take = match (c_ok, b_ok) {
                        (true, true) => height(&candidate) < height(&b) - 1e-12,
                        (true, false) => true,
                        (false, true) => false,
                        (false, false) => candidate.residual < b.residual,
                    };
                    Some(if take { candidate } else { b })
                }
            };
        }
    }
    best.expect("grid search always yields a candidate")
}

/// A few Gauss-Newton steps with a finite-difference Jacobian.
fn gauss_newton_polish(mut f1: f64, mut f2: f64, r: impl Fn(f64, f64) -> [f64; 2]) -> (f64, f64) {
    for _ in 0..20 {
        let r0 = r(f1, f2);
        if r0[0].abs().max(r0[1].abs()) < 1e-15 {
            break;
        }
        let (h1, h2) = (f1 * 1e-7, f2 * 1e-7);
        let ra = r(f1 + h1, f2);
        let rb = r(f1, f2 + h2);
        let j = [
            [(ra[0] - r0[0]) / h1, (rb[0] - r0[0]) / h2],
            [(ra[1] - r0[1]) / h1, (rb[1] - r0[1]) / h2],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let d1 = (-r0[0] * j[1][1] + r0[1] * j[0][1]) / det;
        let d2 = (-r0[1] * j[0][0] + r0[0] * j[1][0]) / det;
        let (n1, n2) = (f1 + d1, f2 + d2);
        if !(n1 > 0.0 && n2 > 0.0) {
            break;
        }
        f1 = n1;
        f2 = n2;
    }
    (f1, f2)
}

fn lens(z: f64, f: f64) -> PlacedElement {
    PlacedElement {
        z,
        element: PhaseElement::new(ElementKind::ThinLens {
            focal_length: f,
            profile: LensProfile::Exact,
        }),
    }
}

/// Synthesizes a stack for `targets` with the source emitting at
/// `source_tilt_deg` (y-z plane), and re-verifies it with wave optics on
/// `grid` (no apertures).
pub fn synthesize_lens_stack(
    targets: &DesignTargets,
    source_tilt_deg: f64,
    grid: Grid,
) -> Result<LensStackPrescription> {
    let mut p = synthesize_geometry(targets, source_tilt_deg)?;
    p.wave_check = Some(verify_with_wave(&p, grid)?);
    Ok(p)
}

/// Geometric synthesis and ABCD prediction without the wave-optics check.
pub fn synthesize_geometry(targets: &DesignTargets, source_tilt_deg: f64) -> Result<LensStackPrescription> {
    targets.validate()?;
    if !(source_tilt_deg.abs() < 30.0) {
        return Err(Error::invalid(
            "source_tilt",
            "wedge correction limited to +-30 degrees",
        ));
    }
    let t = targets;
    let n = t.ambient_index;
    let source = beam_from_mfd(t.source_mfd.0, t.source_mfd.1, t.wavelength, n)?;
    let object_na = t.wavelength / (std::f64::consts::PI * n * source.x.waist_radius);
    if (object_na / t.numerical_aperture - 1.0).abs() > NA_TOLERANCE {
        return Err(Error::Infeasible {
            constraint: "numerical_aperture",
            detail: format!(
                "source MFD_x {:.3e} m radiates NA {object_na:.4}, target {:.4} (tolerance {:.0}%)",
                t.source_mfd.0,
                t.numerical_aperture,
                100.0 * NA_TOLERANCE
            ),
        });
    }

    let mut elements = Vec::new();
    if source_tilt_deg != 0.0 {
        elements.push(PlacedElement {
            z: 0.0,
            element: PhaseElement::new(ElementKind::Wedge {
                tilt_x: 0.0,
                tilt_y: source_tilt_deg.to_radians(),
                index_step: t.wedge_index_step,
            }),
        });
    }

    let (chain, focal_lengths, stop_radius, stack_height, first_lens_z) = match t.topology {
        Topology::TwoLens => {
            let s = solve_two_lens(t);
            if s.residual > RESIDUAL_TOLERANCE {
                let r = two_lens_matrix(s.f1, s.f2, s.gap, t.image_distance);
                let constraint = if (r.a.abs() - t.magnification).abs() > 1e-6 * t.magnification {
                    "magnification"
                } else {
                    "image_distance"
                };
                return Err(Error::Infeasible {
                    constraint,
                    detail: format!(
                        "no two-lens solution within focal-length bounds (residual {:.2e})",
                        s.residual
                    ),
                });
            }
            let stop_radius = t.stop_fill * t.numerical_aperture * s.f1;
            elements.push(lens(s.f1, s.f1));
            if t.stop_fill > 0.0 {
                elements.push(PlacedElement {
                    z: 2.0 * s.f1,
                    element: PhaseElement::circ_aperture(stop_radius),
                });
            }
            elements.push(lens(s.f1 + s.gap, s.f2));
            let chain = vec![
                AbcdElement::FreeSpace { length: s.f1, index: n },
                AbcdElement::ThinLens { focal_length: s.f1 },
                AbcdElement::FreeSpace {
                    length: s.gap,
                    index: n,
                },
                AbcdElement::ThinLens { focal_length: s.f2 },
            ];
            (chain, vec![s.f1, s.f2], stop_radius, s.f1 + s.gap, s.f1)
        }
        Topology::SingleLens => {
            // 1/s0 + 1/L = 1/f with L/s0 = M.
            let s0 = t.image_distance / t.magnification;
            let f = s0 * t.image_distance / (s0 + t.image_distance);
            elements.push(lens(s0, f));
            let chain = vec![
                AbcdElement::FreeSpace { length: s0, index: n },
                AbcdElement::ThinLens { focal_length: f },
            ];
            (chain, vec![f], 0.0, s0, s0)
        }
    };

    if stack_height > t.max_stack_height {
        return Err(Error::Infeasible {
            constraint: "max_stack_height",
            detail: format!("stack needs {stack_height:.4e} m, limit {:.4e} m", t.max_stack_height),
        });
    }
    // Lens 1 sees the diverging source; 1.5 w holds 99% of a Gaussian.
    let beam_radius = t.numerical_aperture * first_lens_z;
    let clear_aperture = 2.0 * stop_radius.max(1.5 * beam_radius);
    if clear_aperture > t.aperture_budget {
        return Err(Error::Infeasible {
            constraint: "aperture_budget",
            detail: format!(
                "clear aperture {clear_aperture:.4e} m exceeds {:.4e} m",
                t.aperture_budget
            ),
        });
    }

    let image = propagate_abcd(&source, &chain)?;
    let mut full_chain = chain.clone();
    full_chain.push(AbcdElement::FreeSpace {
        length: t.image_distance,
        index: n,
    });
    let a = crate::gauss::chain_matrix(&full_chain).a;
    let geometric_magnification = a;
    let stop_na = if stop_radius > 0.0 {
        (stop_radius / focal_lengths[0]).atan().sin()
    } else {
        0.0
    };

    Ok(LensStackPrescription {
        topology: t.topology,
        elements,
        focal_lengths,
        source_tilt_deg,
        wavelength: t.wavelength,
        ambient_index: n,
        source_mfd: t.source_mfd,
        predicted: Predicted {
            magnification: waist_ratio(&source, &image),
            geometric_magnification,
            image_distance: t.image_distance,
            waist_distance: (image.x.waist_position, image.y.waist_position),
            object_na,
            image_na: object_na / t.magnification,
            stop_na,
            stack_height,
            clear_aperture,
        },
        wave_check: None,
    })
}

/// Largest image-side NA of the probe beam used by [`verify_with_wave`].
const PROBE_IMAGE_NA: f64 = 0.1;

/// Propagates an on-axis probe through the lenses only and compares the
/// measured waist ratios with ABCD. The probe is the source widened where
/// needed so the image-side NA stays paraxial; at the design NA the exact
/// focus departs from ABCD by several percent.
pub fn verify_with_wave(p: &LensStackPrescription, grid: Grid) -> Result<WaveCheck> {
    let m = p.predicted.geometric_magnification.abs();
    let min_mfd = 2.0 * p.wavelength / (std::f64::consts::PI * p.ambient_index * PROBE_IMAGE_NA * m);
    let probe = beam_from_mfd(
        p.source_mfd.0.max(min_mfd),
        p.source_mfd.1.max(min_mfd),
        p.wavelength,
        p.ambient_index,
    )?;
    let field = make_gaussian_field(&probe, Launch::default(), grid)?;
    let exit = propagate_through(&field, &p.lenses_only())?;
    let image = abcd_image(p, &probe)?;

    let mut wave = [0.0; 2];
    let mut abcd = [0.0; 2];
    let mut waist = [0.0; 2];
    for (k, axis) in [Axis::X, Axis::Y].into_iter().enumerate() {
        let b = image.axis(axis);
        let zr = b.rayleigh_length(p.wavelength);
        let half = (2.5 * zr).max(5e-6).min(0.9 * b.waist_position);
        let search = FocusSearch {
            axis,
            ..FocusSearch::around(b.waist_position, half, 21)
        };
        let r = find_focus(&exit, search)?;
        let (measured, input) = match axis {
            Axis::X => (r.metrics.mfd_moment.0, 2.0 * probe.x.waist_radius),
            Axis::Y => (r.metrics.mfd_moment.1, 2.0 * probe.y.waist_radius),
        };
        wave[k] = measured / input;
        abcd[k] = 2.0 * b.waist_radius / input;
        waist[k] = r.z_focus;
    }
    for (k, axis) in ["x", "y"].into_iter().enumerate() {
        if (wave[k] / abcd[k] - 1.0).abs() > WAVE_TOLERANCE {
            return Err(Error::Infeasible {
                constraint: "wave_verification",
                detail: format!("{axis} waist ratio: wave optics {:.4}, ABCD {:.4}", wave[k], abcd[k]),
            });
        }
    }
    Ok(WaveCheck {
        probe_mfd: probe.mfd(),
        abcd_ratio: (abcd[0], abcd[1]),
        wave_ratio: (wave[0], wave[1]),
        waist_distance: (waist[0], waist[1]),
    })
}

fn abcd_image(p: &LensStackPrescription, source: &AstigmaticGaussian) -> Result<AstigmaticGaussian> {
    let n = p.ambient_index;
    let mut chain = Vec::new();
    let mut z = 0.0;
    for e in p.lenses_only() {
        if let ElementKind::ThinLens { focal_length, .. } = e.element.kind {
            chain.push(AbcdElement::FreeSpace {
                length: e.z - z,
                index: n,
            });
            chain.push(AbcdElement::ThinLens { focal_length });
            z = e.z;
        }
    }
    propagate_abcd(source, &chain)
}
