use crate::scalar::Scalar;

/// Variance epsilon used by every layer-norm in the models.
pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct LayerNormCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: T,
}

/// `(v - mean) / √(var + eps) · gain + bias`, statistics over `v`.
pub fn layer_norm<T: Scalar>(v: &[T], gain: &[T], bias: &[T], eps: T) -> (Vec<T>, LayerNormCache<T>) {
    debug_assert!(v.len() >= 2);
    let n = T::from_usize(v.len()).unwrap();
    let mean = v.iter().copied().sum::<T>() / n;
    let var = v.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    let inv_std = T::one() / (var + eps).sqrt();
    let xhat: Vec<T> = v.iter().map(|&x| (x - mean) * inv_std).collect();
    let out = xhat
        .iter()
        .zip(gain.iter().zip(bias))
        .map(|(&xh, (&g, &b))| xh * g + b)
        .collect();
    (out, LayerNormCache { xhat, inv_std })
}

/// Back-propagates `dy` through [`layer_norm`]; accumulates into the gain and
/// bias gradients and returns `∂/∂v`.
pub fn layer_norm_backward<T: Scalar>(
    cache: &LayerNormCache<T>,
    gain: &[T],
    dy: &[T],
    dgain: &mut [T],
    dbias: &mut [T],
) -> Vec<T> {
    let n = T::from_usize(dy.len()).unwrap();
    let mut dxhat = Vec::with_capacity(dy.len());
    for i in 0..dy.len() {
        dgain[i] += dy[i] * cache.xhat[i];
        dbias[i] += dy[i];
        dxhat.push(dy[i] * gain[i]);
    }
    let mean_d = dxhat.iter().copied().sum::<T>() / n;
    let mean_dx = dxhat
        .iter()
        .zip(&cache.xhat)
        .map(|(&d, &x)| d * x)
        .sum::<T>()
        / n;
    dxhat
        .iter()
        .zip(&cache.xhat)
        .map(|(&d, &x)| cache.inv_std * (d - mean_d - x * mean_dx))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln(v: &[f64], g: &[f64], b: &[f64]) -> Vec<f64> {
        layer_norm(v, g, b, LN_EPS).0
    }

    #[test]
    fn constant_vector_gives_bias() {
        let out = ln(&[3.0; 4], &[2.0; 4], &[0.5, -1.0, 0.0, 7.0]);
        assert_eq!(out, vec![0.5, -1.0, 0.0, 7.0]);
    }

    #[test]
    fn standardizes() {
        let v = [1.0, 5.0, -2.0, 8.0, 0.5];
        let out = ln(&v, &[1.0; 5], &[0.0; 5]);
        let mean = out.iter().sum::<f64>() / 5.0;
        let var = out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!(mean.abs() < 1e-6);
        assert!((var - 1.0).abs() < 1e-6);
    }

    #[test]
    fn affine_invariance() {
        let v = [1.0, 5.0, -2.0, 8.0];
        let g = [0.3, 1.0, -2.0, 0.7];
        let b = [0.1, 0.2, 0.3, 0.4];
        let w: Vec<f64> = v.iter().map(|x| 3.5 * x - 11.0).collect();
        for (a, c) in ln(&v, &g, &b).iter().zip(ln(&w, &g, &b)) {
            assert!((a - c).abs() < 1e-6);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let v = vec![0.3, -1.2, 2.0, 0.7, 0.1];
        let g = vec![1.1, 0.9, -0.4, 2.0, 0.5];
        let b = vec![0.0, 0.1, 0.2, 0.3, 0.4];
        let w = [0.2, -0.5, 1.0, 0.3, -0.7];
        let loss = |v: &[f64], g: &[f64], b: &[f64]| -> f64 {
            ln(v, g, b).iter().zip(&w).map(|(o, w)| o * w).sum()
        };
        let (_, cache) = layer_norm(&v, &g, &b, LN_EPS);
        let mut dg = vec![0.0; 5];
        let mut db = vec![0.0; 5];
        let dv = layer_norm_backward(&cache, &g, &w, &mut dg, &mut db);
        let h = 1e-6;
        for i in 0..5 {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[i] += h;
            vm[i] -= h;
            let num = (loss(&vp, &g, &b) - loss(&vm, &g, &b)) / (2.0 * h);
            assert!((num - dv[i]).abs() < 1e-7);
            let mut gp = g.clone();
            let mut gm = g.clone();
            gp[i] += h;
            gm[i] -= h;
            let num = (loss(&v, &gp, &b) - loss(&v, &gm, &b)) / (2.0 * h);
            assert!((num - dg[i]).abs() < 1e-7);
            assert!((db[i] - w[i]).abs() < 1e-15);
        }
    }
}
