use super::Atom2D;
use crate::error::{Error, Result};

/// Overcomplete separable cosine atoms: `sqrt(k_c)` frequencies per axis,
/// `cos(pi * k * i / K)` evaluated over the whole canvas with `i` measured
/// from the crop origin, so shifted crops see the continued waveform. All
/// atoms except the constant one have their crop mean removed.
pub fn dct_fallback_atoms(k_c: usize, canvas: usize, patch: usize) -> Result<Vec<Atom2D>> {
    let k = (k_c as f64).sqrt().round() as usize;
    if k * k != k_c || k == 0 {
        return Err(Error::invalid(format!("k_c = {k_c} is not a perfect square")));
    }
    if canvas < patch || (canvas - patch) % 2 != 0 {
        return Err(Error::invalid("canvas must exceed the patch by an even margin"));
    }
    let origin = ((canvas - patch) / 2) as f64;
    let basis = |f: usize| -> Vec<f64> {
        (0..canvas)
            .map(|i| (std::f64::consts::PI * f as f64 * (i as f64 - origin) / k as f64).cos())
            .collect()
    };
    let bases: Vec<Vec<f64>> = (0..k).map(basis).collect();
    let mut atoms = Vec::with_capacity(k_c);
    for fy in 0..k {
        for fx in 0..k {
            let mut px = Vec::with_capacity(canvas * canvas);
            for y in 0..canvas {
                for x in 0..canvas {
                    px.push(bases[fy][y] * bases[fx][x]);
                }
            }
            let mut atom = Atom2D::new(canvas, px)?;
            if fx != 0 || fy != 0 {
                let crop = atom.central_crop(patch);
                let mean = crop.iter().sum::<f64>() / crop.len() as f64;
                atom.pixels.iter_mut().for_each(|v| *v -= mean);
            }
            if !atom.normalize_crop(patch) {
                return Err(Error::invalid("degenerate cosine atom"));
            }
            atoms.push(atom);
        }
    }
    Ok(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::omp::{dot, norm};

    #[test]
    fn default_bank_shape() {
        let atoms = dct_fallback_atoms(400, 30, 8).unwrap();
        assert_eq!(atoms.len(), 400);
        let c = atoms[0].central_crop(8);
        assert!(c.iter().all(|&v| (v - c[0]).abs() < 1e-15));
        for a in &atoms {
            assert!((norm(&a.central_crop(8)) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn distinct_frequencies_are_not_collinear() {
        let atoms = dct_fallback_atoms(400, 30, 8).unwrap();
        let crops: Vec<Vec<f64>> = atoms.iter().map(|a| a.central_crop(8)).collect();
        let mut worst = 0.0f64;
        for i in 0..crops.len() {
            for j in i + 1..crops.len() {
                worst = worst.max(dot(&crops[i], &crops[j]).abs());
            }
        }
        assert!(worst < 1.0 - 1e-6, "max coherence {worst}");
    }

    #[test]
    fn rejects_non_square_counts() {
        assert!(dct_fallback_atoms(399, 30, 8).is_err());
    }
}
