//! Orthonormal basis on the grid, discrete Fourier transform of the
//! regression data, weighted least-squares fits, and piecewise-constant
//! interpolation back to a function on [a, b].
//!
//! The basis is the discrete trigonometric system, which is exactly
//! orthonormal under the empirical inner product
//! (f, g)_n = ((b-a)/n) sum f(x_l) g(x_l) on the uniform grid. If rounding
//! ever pushed the Gram matrix off the identity beyond 1e-10 a modified
//! Gram-Schmidt pass restores it; the construction fails if even that does
//! not converge.

use std::io::Write;

use crate::design::GridSpec;
use crate::error::{Error, Result};

/// Tolerance on the empirical Gram deviation from the identity.
pub const GRAM_TOLERANCE: f64 = 1e-10;

/// Basis functions tabulated on the grid: `phi[j][l]` is the j-th function at
/// the l-th grid point (both 0-based; j = 0 is the constant function).
#[derive(Debug, Clone)]
pub struct BasisMatrix {
    phi: Vec<Vec<f64>>,
    pub n: usize,
    pub a: f64,
    pub b: f64,
}

impl BasisMatrix {
    /// Row j (0-based) of the basis.
    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.phi[j]
    }

    /// Empirical inner product weight (b - a)/n.
    #[inline]
    pub fn weight(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    /// Largest absolute deviation of the empirical Gram matrix from the
    /// identity.
    pub fn gram_deviation(&self) -> f64 {
        let w = self.weight();
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                let dot: f64 = self.phi[i]
                    .iter()
                    .zip(&self.phi[j])
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
                    * w;
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Debug CSV: one row per basis function, headered, row-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "j")?;
        for l in 1..=self.n {
            write!(w, ",x{l}")?;
        }
        writeln!(w)?;
        for (j, row) in self.phi.iter().enumerate() {
            write!(w, "{}", j + 1)?;
            for v in row {
                write!(w, ",{}", crate::csvio::fmt_float(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Build the discrete trigonometric basis for a grid.
pub fn build_basis(grid: &GridSpec) -> Result<BasisMatrix> {
    let n = grid.n;
    let span = grid.b - grid.a;
    let inv_sqrt_span = 1.0 / span.sqrt();
    let full_scale = (2.0 / span).sqrt();

    let mut phi = Vec::with_capacity(n);
    phi.push(vec![inv_sqrt_span; n]);
    for j in 2..=n {
        let m = (j - 1).div_ceil(2) as f64;
        let mut row = Vec::with_capacity(n);
        // At even n the final function degenerates to the alternating sign
        // pattern cos(pi l), whose empirical norm needs the halved scale.
        let is_alternating = n % 2 == 0 && j == n;
        for l in 1..=n {
            let angle = 2.0 * std::f64::consts::PI * m * l as f64 / n as f64;
            let v = if is_alternating {
                inv_sqrt_span * if l % 2 == 0 { 1.0 } else { -1.0 }
            } else if j % 2 == 0 {
                full_scale * angle.cos()
            } else {
                full_scale * angle.sin()
            };
            row.push(v);
        }
        phi.push(row);
    }

    let mut basis = BasisMatrix {
        phi,
        n,
        a: grid.a,
        b: grid.b,
    };
    if basis.gram_deviation() > GRAM_TOLERANCE {
        orthonormalize(&mut basis);
        let deviation = basis.gram_deviation();
        if deviation > GRAM_TOLERANCE {
            return Err(Error::BasisNotOrthonormal {
                deviation,
                tolerance: GRAM_TOLERANCE,
            });
        }
    }
    Ok(basis)
}

/// Modified Gram-Schmidt under the empirical inner product.
fn orthonormalize(basis: &mut BasisMatrix) {
    let w = basis.weight();
    let n = basis.n;
    for j in 0..n {
        for i in 0..j {
            let proj: f64 = basis.phi[i]
                .iter()
                .zip(&basis.phi[j])
                .map(|(x, y)| x * y)
                .sum::<f64>()
                * w;
            let (head, tail) = basis.phi.split_at_mut(j);
            for (x, y) in tail[0].iter_mut().zip(&head[i]) {
                *x -= proj * y;
            }
        }
        let norm = (basis.phi[j].iter().map(|x| x * x).sum::<f64>() * w).sqrt();
        for x in basis.phi[j].iter_mut() {
            *x /= norm;
        }
    }
}

/// Empirical Fourier coefficients theta_j = ((b-a)/n) sum Y_l phi_j(x_l).
pub fn fourier_coefficients(responses: &[f64], basis: &BasisMatrix) -> Result<Vec<f64>> {
    if responses.len() != basis.n {
        return Err(Error::invalid(format!(
            "response length {} does not match basis size {}",
            responses.len(),
            basis.n
        )));
    }
    let w = basis.weight();
    Ok((0..basis.n)
        .map(|j| {
            basis.phi[j]
                .iter()
                .zip(responses)
                .map(|(p, y)| p * y)
                .sum::<f64>()
                * w
        })
        .collect())
}

/// Coefficient variance proxies s_j = ((b-a)/n) sum sigma_l^2 phi_j^2(x_l).
pub fn variance_proxies(sigma_sq: &[f64], basis: &BasisMatrix) -> Result<Vec<f64>> {
    if sigma_sq.len() != basis.n {
        return Err(Error::invalid(format!(
            "variance length {} does not match basis size {}",
            sigma_sq.len(),
            basis.n
        )));
    }
    let w = basis.weight();
    Ok((0..basis.n)
        .map(|j| {
            basis.phi[j]
                .iter()
                .zip(sigma_sq)
                .map(|(p, s)| p * p * s)
                .sum::<f64>()
                * w
        })
        .collect())
}

/// Spectral view of one set of observations, carrying the interval the
/// empirical inner product lives on.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub theta_hat: Vec<f64>,
    pub s: Vec<f64>,
    pub gamma: bool,
    pub a: f64,
    pub b: f64,
}

impl SpectralData {
    pub fn from_observations(
        obs: &crate::sequential::SequentialObservations,
        basis: &BasisMatrix,
    ) -> Result<Self> {
        Ok(SpectralData {
            theta_hat: fourier_coefficients(&obs.responses, basis)?,
            s: variance_proxies(&obs.sigma_sq, basis)?,
            gamma: obs.gamma,
            a: basis.a,
            b: basis.b,
        })
    }
}

/// Coordinatewise damping weights; the first `d` entries are pinned to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    pub d: usize,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || d > weights.len() {
            return Err(Error::invalid(format!(
                "weight block size d = {d} incompatible with length {}",
                weights.len()
            )));
        }
        if weights[..d].iter().any(|&w| w != 1.0) {
            return Err(Error::invalid(
                "the first d weights must equal 1".to_string(),
            ));
        }
        if weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
            return Err(Error::invalid("weights must lie in [0, 1]".to_string()));
        }
        Ok(WeightVector { weights, d })
    }

    /// All-ones weights.
    pub fn ones(n: usize) -> Self {
        WeightVector {
            weights: vec![1.0; n],
            d: n,
        }
    }

    /// Ones on the first d coordinates, zero beyond.
    pub fn first_block(n: usize, d: usize) -> Result<Self> {
        let mut weights = vec![0.0; n];
        for w in weights.iter_mut().take(d) {
            *w = 1.0;
        }
        WeightVector::new(weights, d)
    }

    #[inline]
    pub fn get(&self, j: usize) -> f64 {
        self.weights[j]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// A function on [a, b] represented by its grid values: values[0] on
/// [a, x_1], values[l-1] on (x_{l-1}, x_l].
#[derive(Debug, Clone)]
pub struct PiecewiseEstimate {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl PiecewiseEstimate {
    /// Evaluate the piecewise-constant extension at any x in [a, b].
    pub fn eval(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g.points[0] {
            return self.values[0];
        }
        // Cell index l with x in (x_{l-1}, x_l]: ceil of the scaled offset.
        let u = (x - g.a) / (g.b - g.a) * g.n as f64;
        let mut l = u.ceil() as usize;
        if l > g.n {
            l = g.n;
        }
        // Guard against rounding placing x marginally past its true cell.
        if l >= 2 && x <= g.points[l - 2] {
            l -= 1;
        }
        self.values[l - 1]
    }
}

/// Weighted least-squares fit: values[l] = sum_j lambda(j) theta_j phi_j(x_l),
/// zeroed when the stopping event failed.
pub fn wls_fit(
    lambda: &WeightVector,
    theta: &[f64],
    basis: &BasisMatrix,
    gamma: bool,
) -> Result<PiecewiseEstimate> {
    if lambda.len() != basis.n || theta.len() != basis.n {
        return Err(Error::invalid(format!(
            "length mismatch: weights {}, coefficients {}, basis {}",
            lambda.len(),
            theta.len(),
            basis.n
        )));
    }
    let grid = GridSpec::new(basis.a, basis.b, basis.n)?;
    if !gamma {
        return Ok(PiecewiseEstimate {
            grid,
            values: vec![0.0; basis.n],
        });
    }
    let mut values = vec![0.0f64; basis.n];
    for j in 0..basis.n {
        let coef = lambda.get(j) * theta[j];
        if coef == 0.0 {
            continue;
        }
        for (v, p) in values.iter_mut().zip(&basis.phi[j]) {
            *v += coef * p;
        }
    }
    Ok(PiecewiseEstimate { grid, values })
}

/// Empirical squared norm ((b-a)/n) sum values^2.
pub fn empirical_norm_sq(values: &[f64], grid: &GridSpec) -> f64 {
    debug_assert_eq!(values.len(), grid.n);
    values.iter().map(|v| v * v).sum::<f64>() * (grid.b - grid.a) / grid.n as f64
}
