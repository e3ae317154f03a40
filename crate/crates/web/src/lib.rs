//! Browser demo: three small views of the smoothing, exported through
//! `wasm-bindgen`. Each export returns a flat `Float64Array`.

use plsmooth::blend::{FaceBlend, FacePlane, WidthField};
use plsmooth::edge::CircleIsotopy;
use plsmooth::fixtures::perturbed_kuhn;
use plsmooth::geom::{Affine, Mat3, Vec3};
use plsmooth::pipeline::{smooth, SmoothingOptions};
use wasm_bindgen::prelude::*;

/// Cross-section of the face blend between the identity and
/// `diag(a, 1, 1)` with strip width `width`: triples `(x, g₁(x), det Dg)` for
/// `n` points `x ∈ [−width, 2·width]` on the normal line.
pub fn face_section(a: f64, width: f64, n: usize) -> Result<Vec<f64>, String> {
    let plane = FacePlane { origin: Vec3::zeros(), normal: Vec3::x(), tangents: [Vec3::y(), Vec3::z()] };
    let right = Affine::linear(Mat3::from_diagonal(&Vec3::new(a, 1.0, 1.0)));
    let g = FaceBlend::new(plane, Affine::identity(), right, WidthField::constant(width)).map_err(|e| e.to_string())?;
    let n = n.max(2);
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        let x = width * (-1.0 + 3.0 * i as f64 / (n - 1) as f64);
        let (y, d) = g.blend_with_jacobian(&Vec3::new(x, 0.0, 0.0));
        out.extend([x, y.x, d.determinant()]);
    }
    Ok(out)
}

/// Smooths a perturbed Kuhn cube at scale `lambda` and samples the slice
/// `x₃ = z` on an `n × n` grid: `(f₁, f₂, g₁, g₂, det Dg)` per point.
pub fn kuhn_slice(amplitude: f64, seed: u64, lambda: f64, z: f64, n: usize) -> Result<Vec<f64>, String> {
    let f = perturbed_kuhn(1.0, amplitude, seed).map_err(|e| e.to_string())?;
    f.validate().passed().then_some(()).ok_or("the perturbed cube is not a homeomorphism")?;
    let (_, g) = smooth(&f, lambda, &SmoothingOptions::default()).map_err(|e| e.to_string())?;
    let z = z.clamp(0.0, 1.0);
    let n = n.max(2);
    let mut out = Vec::with_capacity(5 * n * n);
    for j in 0..n {
        for i in 0..n {
            let x = Vec3::new((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64, z);
            let fx = f.eval(&x).map_err(|e| e.to_string())?;
            let (gx, d, _) = g.evaluate_full(&x).map_err(|e| e.to_string())?;
            out.extend([fx.x, fx.y, gx.x, gx.y, d.determinant()]);
        }
    }
    Ok(out)
}

/// Isotopy from the identity to the circle map with lift `θ + b·sin θ`
/// (`|b| < 1`): `α(θ, t)` at `n` angles.
pub fn circle_stage(b: f64, t: f64, n: usize) -> Result<Vec<f64>, String> {
    let iso =
        CircleIsotopy::from_fn(move |th: f64| (th + b * th.sin(), 1.0 + b * th.cos())).map_err(|e| e.to_string())?;
    let t = t.clamp(0.0, 1.0);
    Ok((0..n).map(|j| iso.alpha(std::f64::consts::TAU * j as f64 / n as f64, t)).collect())
}

#[wasm_bindgen(js_name = faceSection)]
pub fn face_section_js(a: f64, width: f64, n: usize) -> Result<Vec<f64>, JsError> {
    face_section(a, width, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = kuhnSlice)]
pub fn kuhn_slice_js(amplitude: f64, seed: u32, lambda: f64, z: f64, n: usize) -> Result<Vec<f64>, JsError> {
    kuhn_slice(amplitude, seed as u64, lambda, z, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = circleStage)]
pub fn circle_stage_js(b: f64, t: f64, n: usize) -> Result<Vec<f64>, JsError> {
    circle_stage(b, t, n).map_err(|e| JsError::new(&e))
}
