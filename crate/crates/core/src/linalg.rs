//! Dense linear-algebra helpers on top of `nalgebra`: spectra, null spaces,
//! eigenspaces of non-symmetric matrices and the matrix exponential.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Francis iterations allowed per attempt, times the dimension.
const SCHUR_ITERS: usize = 200;
/// Relative shifts tried when the unshifted QR iteration stalls.
const SCHUR_SHIFTS: [f64; 5] = [0.0, 0.318_309_886, -0.577_215_665, 1.414_213_562, -2.718_281_828];

/// Eigenvalues of a general real square matrix.
///
/// Symmetric input goes through the symmetric solver. Otherwise the real
/// Schur iteration is capped and, if it stalls, retried on `A + σI`.
pub fn eigenvalues(m: &Mat) -> Vec<Complex64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    if asymmetry(m) <= 1e-14 * scale {
        return symmetric_part(m).symmetric_eigenvalues().iter().map(|v| Complex64::new(*v, 0.0)).collect();
    }
    for shift in SCHUR_SHIFTS {
        let sigma = shift * scale;
        let shifted = m + Mat::identity(n, n) * sigma;
        if let Some(schur) = shifted.try_schur(f64::EPSILON, SCHUR_ITERS * n) {
            return schur.complex_eigenvalues().iter().map(|z| z - sigma).collect();
        }
    }
    let cm = m.map(|v| Complex64::new(v, 0.0));
    complex_eigenvalues(&cm)
}

/// Eigenvalues of a complex square matrix, with the same shift fallback as
/// [`eigenvalues`]. Returns NaNs if every attempt stalls.
pub fn complex_eigenvalues(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let scale = m.iter().fold(0.0, |a: f64, z| a.max(z.norm())).max(f64::MIN_POSITIVE);
    for (k, shift) in SCHUR_SHIFTS.iter().enumerate() {
        // alternate real and imaginary shifts
        let sigma = if k % 2 == 0 { Complex64::new(shift * scale, 0.0) } else { Complex64::new(0.0, shift * scale) };
        let shifted = m + DMatrix::<Complex64>::identity(n, n) * sigma;
        if let Some(schur) = shifted.try_schur(f64::EPSILON, SCHUR_ITERS * n) {
            if let Some(ev) = schur.eigenvalues() {
                return ev.iter().map(|z| z - sigma).collect();
            }
        }
    }
    alloc::vec![Complex64::new(f64::NAN, f64::NAN); n]
}

/// Largest modulus among the eigenvalues.
pub fn spectral_radius(m: &Mat) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `(M + Mᵀ)/2`.
pub fn symmetric_part(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part, ascending.
pub fn symmetric_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = symmetric_part(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Max-abs entry.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// `‖M − Mᵀ‖∞` measured entrywise.
pub fn asymmetry(m: &Mat) -> f64 {
    max_abs(&(m - m.transpose()))
}

pub fn inf_norm(m: &Mat) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn one_norm(m: &Mat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Orthonormal basis (as columns) of the numerical null space of `m`.
///
/// Singular values below `rtol · σ_max` count as zero. A zero matrix has the
/// whole space as kernel.
pub fn null_space(m: &Mat, rtol: f64) -> Mat {
    let (r, c) = m.shape();
    let k = r.max(c);
    // thin SVD of a wide matrix drops kernel directions; pad to square
    let mut sq = Mat::zeros(k, c);
    sq.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = rtol * sigma_max;
    let cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| sigma_max == 0.0 || svd.singular_values[i] <= cut)
        .collect();
    let mut basis = Mat::zeros(c, cols.len());
    for (j, &i) in cols.iter().enumerate() {
        for row in 0..c {
            basis[(row, j)] = v_t[(i, row)];
        }
    }
    basis
}

/// One eigenvalue cluster of a real matrix together with a basis of its
/// eigenspace.
#[derive(Debug, Clone)]
pub struct Eigenspace {
    pub value: Complex64,
    pub algebraic: usize,
    /// Columns span the (complex) eigenspace.
    pub basis: DMatrix<Complex64>,
}

impl Eigenspace {
    pub fn geometric(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_defective(&self) -> bool {
        self.geometric() < self.algebraic
    }
}

/// Eigenspaces of a real square matrix, one per eigenvalue cluster.
///
/// Eigenvalues closer than `1e-6·max(1, |λ|)` are merged into one cluster;
/// the eigenspace is the null space of `A − λ̄I` at the cluster mean.
pub fn eigenspaces(m: &Mat) -> Vec<Eigenspace> {
    let n = m.nrows();
    let mut vals = eigenvalues(m);
    vals.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut used = alloc::vec![false; vals.len()];
    let scale = max_abs(m).max(1.0);
    let mut out = Vec::new();
    for i in 0..vals.len() {
        if used[i] {
            continue;
        }
        let mut members = alloc::vec![i];
        used[i] = true;
        for j in (i + 1)..vals.len() {
            if !used[j] && (vals[j] - vals[i]).norm() <= 1e-6 * vals[i].norm().max(1.0) {
                used[j] = true;
                members.push(j);
            }
        }
        let mean = members.iter().map(|&k| vals[k]).sum::<Complex64>() / members.len() as f64;
        let shifted = DMatrix::<Complex64>::from_fn(n, n, |r, c| {
            let d = if r == c { mean } else { Complex64::new(0.0, 0.0) };
            Complex64::new(m[(r, c)], 0.0) - d
        });
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("v_t requested");
        let cut = 1e-7 * scale;
        let idx: Vec<usize> = (0..n).filter(|&k| svd.singular_values[k] <= cut).collect();
        // at least one direction per cluster even if rounding hides it
        let idx = if idx.is_empty() {
            let mut best = 0;
            for k in 1..n {
                if svd.singular_values[k] < svd.singular_values[best] {
                    best = k;
                }
            }
            alloc::vec![best]
        } else {
            idx
        };
        let mut basis = DMatrix::<Complex64>::zeros(n, idx.len());
        for (j, &k) in idx.iter().enumerate() {
            for r in 0..n {
                basis[(r, j)] = v_t[(k, r)].conj();
            }
        }
        out.push(Eigenspace { value: mean, algebraic: members.len(), basis });
    }
    out
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

fn pade_low(a: &Mat, b: &[f64]) -> (Mat, Mat) {
    let n = a.nrows();
    let id = Mat::identity(n, n);
    let a2 = a * a;
    let mut pow = id.clone();
    let mut u = Mat::zeros(n, n);
    let mut v = Mat::zeros(n, n);
    for k in (0..b.len()).step_by(2) {
        v += &pow * b[k];
        if k + 1 < b.len() {
            u += &pow * b[k + 1];
        }
        pow = &pow * &a2;
    }
    (a * u, v)
}

fn pade13(a: &Mat) -> (Mat, Mat) {
    let n = a.nrows();
    let b = &PADE13;
    let id = Mat::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (u, v)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant of degree 3–13 chosen from the 1-norm.
pub fn expm(a: &Mat) -> Mat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let norm = one_norm(a);
    let solve = |u: Mat, v: Mat| -> Mat {
        let p = &v + &u;
        let q = &v - &u;
        q.lu().solve(&p).expect("Padé denominator is nonsingular")
    };
    for &(m, theta) in THETA.iter() {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let (u, v) = pade_low(a, coeffs);
            return solve(u, v);
        }
    }
    let s = if norm > THETA13 { libm::ceil(libm::log2(norm / THETA13)) as i32 } else { 0 };
    let scaled = a / libm::pow(2.0, s as f64);
    let (u, v) = pade13(&scaled);
    let mut r = solve(u, v);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Least-squares slope and intercept of `y` against `x`, with the RMS of
/// the residuals.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    (slope, intercept, libm::sqrt(ss / n))
}
