//! K-SVD training of the 2D atom bank.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Atom2D;
use crate::error::{Error, Result};
use crate::lf::Plane;
use crate::omp::{dot, norm, omp, ColumnMatrix};
use crate::par;

#[derive(Debug, Clone)]
pub struct KsvdOutput {
    /// Unit-norm atoms, each the same length as a training patch.
    pub atoms: Vec<Vec<f64>>,
    /// Total squared representation error after each iteration.
    pub objective: Vec<f64>,
}

const POWER_ITERATIONS: usize = 50;

/// Atoms per training patch in the pursuit stage.
pub const DEFAULT_SPARSITY: usize = 8;

/// Trains `k_c` atoms on `patches` with `iterations` rounds of OMP sparse
/// coding (at most `sparsity` atoms per patch) and rank-one atom updates.
///
/// A patch keeps its previous code when the fresh pursuit represents it
/// worse, and an atom keeps its previous value when the rank-one update does
/// not lower the error, so the objective never increases. Atoms nobody uses
/// are replaced by the worst-represented patch. The result depends only on
/// the inputs and `seed`.
pub fn train_ksvd(
    patches: &[Vec<f64>],
    k_c: usize,
    sparsity: usize,
    iterations: usize,
    seed: u64,
) -> Result<KsvdOutput> {
    if k_c == 0 || sparsity == 0 {
        return Err(Error::invalid("k_c and sparsity must be positive"));
    }
    if patches.len() < k_c {
        return Err(Error::invalid(format!(
            "{} training patches for {k_c} atoms",
            patches.len()
        )));
    }
    let n = patches[0].len();
    if n == 0 || patches.iter().any(|p| p.len() != n) {
        return Err(Error::invalid("training patches differ in length"));
    }
    let nonzero: Vec<usize> = (0..patches.len()).filter(|&i| norm(&patches[i]) > 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::invalid("training set is all zero"));
    }
    if nonzero.len() < k_c {
        return Err(Error::invalid(format!(
            "only {} non-zero training patches for {k_c} atoms",
            nonzero.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = nonzero.clone();
    order.shuffle(&mut rng);
    let mut dict = vec![0.0; n * k_c];
    for (k, &i) in order.iter().take(k_c).enumerate() {
        let p = &patches[i];
        let s = norm(p);
        for (d, v) in dict[k * n..(k + 1) * n].iter_mut().zip(p) {
            *d = v / s;
        }
    }

    let mut codes: Vec<Vec<(usize, f64)>> = vec![Vec::new(); patches.len()];
    let mut residuals: Vec<Vec<f64>> = patches.to_vec();
    let mut objective = Vec::with_capacity(iterations);

    for _ in 0..iterations {
        // Sparse coding stage.
        let a = ColumnMatrix::new(n, k_c, &dict);
        let fresh = par::map_range(patches.len(), |i| {
            let x = &patches[i];
            let out = omp(a, x, 1e-10 * norm(x), sparsity);
            let err = dot(&out.residual, &out.residual);
            (out, err)
        });
        for (i, (out, err)) in fresh.into_iter().enumerate() {
            let old = dot(&residuals[i], &residuals[i]);
            if err < old {
                codes[i] = out.atoms.into_iter().zip(out.coeffs).collect();
                residuals[i] = out.residual;
            }
        }

        // Dictionary update stage.
        let mut users: Vec<Vec<usize>> = vec![Vec::new(); k_c];
        for (i, code) in codes.iter().enumerate() {
            for &(k, _) in code {
                users[k].push(i);
            }
        }
        let mut replaced = vec![false; patches.len()];
        for k in 0..k_c {
            if users[k].is_empty() {
                let worst = (0..patches.len())
                    .filter(|&i| !replaced[i] && norm(&patches[i]) > 0.0)
                    .max_by(|&a, &b| {
                        let ea = dot(&residuals[a], &residuals[a]);
                        let eb = dot(&residuals[b], &residuals[b]);
                        ea.total_cmp(&eb).then(b.cmp(&a))
                    });
                if let Some(w) = worst {
                    replaced[w] = true;
                    let s = norm(&patches[w]);
                    for (d, v) in dict[k * n..(k + 1) * n].iter_mut().zip(&patches[w]) {
                        *d = v / s;
                    }
                }
                continue;
            }
            update_atom(k, n, &users[k], &mut dict, &mut codes, &mut residuals);
        }

        objective.push(residuals.iter().map(|r| dot(r, r)).sum());
    }

    Ok(KsvdOutput {
        atoms: dict.chunks(n).map(<[f64]>::to_vec).collect(),
        objective,
    })
}

fn coefficient_of(code: &[(usize, f64)], k: usize) -> f64 {
    code.iter().find(|(a, _)| *a == k).map_or(0.0, |&(_, c)| c)
}

/// Rank-one refit of atom `k` over the patches that use it.
fn update_atom(
    k: usize,
    n: usize,
    users: &[usize],
    dict: &mut [f64],
    codes: &mut [Vec<(usize, f64)>],
    residuals: &mut [Vec<f64>],
) {
    let atom: Vec<f64> = dict[k * n..(k + 1) * n].to_vec();
    // E = R + d_k x_k^T restricted to the users, stored column by column.
    let e: Vec<Vec<f64>> = users
        .iter()
        .map(|&i| {
            let c = coefficient_of(&codes[i], k);
            residuals[i].iter().zip(&atom).map(|(r, d)| r + c * d).collect()
        })
        .collect();
    let old_err: f64 = users.iter().map(|&i| dot(&residuals[i], &residuals[i])).sum();
    let e_energy: f64 = e.iter().map(|c| dot(c, c)).sum();

    let mut u = atom;
    for _ in 0..POWER_ITERATIONS {
        let z: Vec<f64> = e.iter().map(|c| dot(c, &u)).collect();
        let mut next = vec![0.0; n];
        for (c, &zj) in e.iter().zip(&z) {
            for (x, v) in next.iter_mut().zip(c) {
                *x += zj * v;
            }
        }
        let s = norm(&next);
        if s == 0.0 {
            return;
        }
        next.iter_mut().for_each(|v| *v /= s);
        let delta: f64 = next.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum();
        u = next;
        if delta < 1e-24 {
            break;
        }
    }
    let coeffs: Vec<f64> = e.iter().map(|c| dot(c, &u)).collect();
    let new_err = e_energy - dot(&coeffs, &coeffs);
    if !(new_err < old_err) {
        return;
    }
    dict[k * n..(k + 1) * n].copy_from_slice(&u);
    for ((&i, col), &c) in users.iter().zip(&e).zip(&coeffs) {
        for entry in codes[i].iter_mut().filter(|(a, _)| *a == k) {
            entry.1 = c;
        }
        residuals[i] = col.iter().zip(&u).map(|(x, d)| x - c * d).collect();
    }
}

/// Draws up to `count` random `size x size` mean-removed patches from
/// `planes`, skipping flat ones.
pub fn extract_training_patches(planes: &[Plane], size: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let usable: Vec<&Plane> = planes.iter().filter(|p| p.width >= size && p.height >= size).collect();
    let mut out = Vec::with_capacity(count);
    if usable.is_empty() {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0;
    while out.len() < count && attempts < count * 20 {
        attempts += 1;
        let p = usable[rng.random_range(0..usable.len())];
        let x0 = rng.random_range(0..=p.width - size);
        let y0 = rng.random_range(0..=p.height - size);
        let mut v = Vec::with_capacity(size * size);
        for y in y0..y0 + size {
            v.extend(p.data[y * p.width + x0..y * p.width + x0 + size].iter().map(|&s| f64::from(s)));
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|s| *s -= mean);
        if norm(&v) > 1e-9 {
            out.push(v);
        }
    }
    out
}

/// Wraps trained canvas vectors as atoms with unit-norm central crops.
pub fn atoms_from_canvases(vectors: Vec<Vec<f64>>, canvas: usize, patch: usize) -> Result<Vec<Atom2D>> {
    vectors
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            let mut a = Atom2D::new(canvas, v)?;
            if !a.normalize_crop(patch) {
                return Err(Error::invalid(format!("trained atom {k} has an empty central crop")));
            }
            Ok(a)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random_bank(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..k)
            .map(|_| {
                let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                let s = norm(&v);
                v.into_iter().map(|x| x / s).collect()
            })
            .collect()
    }

    #[test]
    fn orthonormal_set_is_recovered_exactly() {
        let n = 16;
        let patches: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 3.0 } else { 0.0 }).collect())
            .collect();
        let out = train_ksvd(&patches, n, 1, 3, 7).unwrap();
        assert!(*out.objective.last().unwrap() < 1e-20);
        for p in &patches {
            let best = out
                .atoms
                .iter()
                .map(|a| (dot(a, p) / norm(p)).abs())
                .fold(0.0, f64::max);
            assert!((best - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let patches: Vec<Vec<f64>> = (0..600)
            .map(|_| (0..36).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let out = train_ksvd(&patches, 50, 4, 6, 3).unwrap();
        assert!(out.objective.windows(2).all(|w| w[1] <= w[0]), "{:?}", out.objective);
    }

    #[test]
    fn planted_bank_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (n, k) = (64, 100);
        let bank = random_bank(n, k, &mut rng);
        let patches: Vec<Vec<f64>> = (0..3000)
            .map(|_| {
                let mut idx: Vec<usize> = (0..k).collect();
                idx.shuffle(&mut rng);
                let mut x = vec![0.0; n];
                for &j in &idx[..3] {
                    let c: f64 = StandardNormal.sample(&mut rng);
                    for (v, a) in x.iter_mut().zip(&bank[j]) {
                        *v += c * a;
                    }
                }
                x
            })
            .collect();
        let out = train_ksvd(&patches, k, 3, 30, 5).unwrap();
        let recovered = bank
            .iter()
            .filter(|b| out.atoms.iter().any(|a| dot(a, b).abs() > 0.95))
            .count();
        assert!(recovered >= 80, "recovered {recovered}/100");
    }

    #[test]
    fn same_seed_same_atoms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let patches: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..16).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let a = train_ksvd(&patches, 20, 2, 3, 42).unwrap();
        let b = train_ksvd(&patches, 20, 2, 3, 42).unwrap();
        assert_eq!(a.atoms, b.atoms);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn error_paths() {
        let zeros = vec![vec![0.0; 4]; 10];
        assert!(train_ksvd(&zeros, 2, 1, 1, 0).is_err());
        let few = vec![vec![1.0; 4]; 3];
        assert!(train_ksvd(&few, 5, 1, 1, 0).is_err());
    }

    #[test]
    fn training_patches_are_mean_free() {
        let p = Plane::new(40, 40, (0..1600).map(|i| (i * 13 % 251) as u8).collect()).unwrap();
        let patches = extract_training_patches(&[p], 30, 10, 1);
        assert_eq!(patches.len(), 10);
        for v in &patches {
            assert!(v.iter().sum::<f64>().abs() < 1e-8);
        }
    }
}
