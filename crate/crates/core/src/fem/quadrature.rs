use crate::mesh::Point;

/// Quadrature on a reference simplex.
///
/// Points are given in reference coordinates `(ξ, η)`; 1D rules live on `[0, 1]`
/// with `η = 0`. Weights sum to the reference measure (1 in 1D, 1/2 in 2D).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    /// Three-point Gauss rule on `[0, 1]`, exact for degree 5.
    pub fn gauss_interval() -> Self {
        let d = 0.5 * (3.0f64 / 5.0).sqrt();
        Self {
            points: vec![[0.5 - d, 0.0], [0.5, 0.0], [0.5 + d, 0.0]],
            weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
            order: 5,
        }
    }

    /// Six-point symmetric rule on the reference triangle, exact for degree 4.
    pub fn gauss_triangle() -> Self {
        let (a, wa) = (0.445_948_490_915_965, 0.223_381_589_678_011);
        let (b, wb) = (0.091_576_213_509_771, 0.109_951_743_655_322);
        Self {
            points: vec![[a, a], [1.0 - 2.0 * a, a], [a, 1.0 - 2.0 * a], [b, b], [1.0 - 2.0 * b, b], [b, 1.0 - 2.0 * b]],
            weights: vec![0.5 * wa, 0.5 * wa, 0.5 * wa, 0.5 * wb, 0.5 * wb, 0.5 * wb],
            order: 4,
        }
    }

    pub fn for_dim(dim: usize) -> Self {
        if dim == 1 {
            Self::gauss_interval()
        } else {
            Self::gauss_triangle()
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical points, weights scaled to the element measure, and barycentric
    /// coordinates for the simplex with vertices `verts`.
    pub fn map<'a>(&'a self, verts: &'a [Point]) -> impl Iterator<Item = (Point, f64, [f64; 3])> + 'a {
        let dim = verts.len() - 1;
        let jac = if dim == 1 {
            (verts[1][0] - verts[0][0]).abs()
        } else {
            let (p0, p1, p2) = (verts[0], verts[1], verts[2]);
            ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])).abs()
        };
        self.points.iter().zip(&self.weights).map(move |(&[s, t], &w)| {
            let lam = if dim == 1 { [1.0 - s, s, 0.0] } else { [1.0 - s - t, s, t] };
            let mut x = [0.0; 2];
            for (k, v) in verts.iter().enumerate() {
                x[0] += lam[k] * v[0];
                x[1] += lam[k] * v[1];
            }
            (x, w * jac, lam)
        })
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}
