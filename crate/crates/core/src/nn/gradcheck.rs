use super::params::Parameters;
use crate::scalar::Scalar;

/// Gradients smaller than this are compared absolutely rather than relatively.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Tensor name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares `analytic` against central differences `(L(θ+h) − L(θ−h)) / 2h`
/// on every coordinate of `params`. The relative error of a coordinate is
/// `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn finite_difference_check<T, P, F>(loss: F, params: &P, analytic: &P, h: T) -> GradCheckReport
where
    T: Scalar,
    P: Parameters<T> + Clone,
    F: Fn(&P) -> T,
{
    let names = params.names();
    let analytic_t = analytic.tensors();
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        checked: 0,
    };
    let n_tensors = analytic_t.len();
    for k in 0..n_tensors {
        let len = analytic_t[k].len();
        for i in 0..len {
            let orig = probe.tensors()[k].data[i];
            probe.tensors_mut()[k].data[i] = orig + h;
            let lp = loss(&probe);
            probe.tensors_mut()[k].data[i] = orig - h;
            let lm = loss(&probe);
            probe.tensors_mut()[k].data[i] = orig;
            let num = ((lp - lm) / (h + h)).as_f64();
            let a = analytic_t[k].data[i].as_f64();
            let rel = (a - num).abs() / a.abs().max(num.abs()).max(REL_FLOOR);
            report.checked += 1;
            if rel > report.max_rel_err || rel.is_nan() {
                report.max_rel_err = if rel.is_nan() { f64::INFINITY } else { rel };
                report.worst = Some((names[k].clone(), i));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    #[derive(Clone)]
    struct V(Tensor<f64>);

    impl Parameters<f64> for V {
        fn tensors(&self) -> Vec<&Tensor<f64>> {
            vec![&self.0]
        }
        fn tensors_mut(&mut self) -> Vec<&mut Tensor<f64>> {
            vec![&mut self.0]
        }
        fn names(&self) -> Vec<String> {
            vec!["theta".into()]
        }
    }

    fn half_sq(p: &V) -> f64 {
        0.5 * p.0.data.iter().map(|x| x * x).sum::<f64>()
    }

    #[test]
    fn quadratic_is_exact() {
        let p = V(Tensor::vector(vec![0.3, -1.7, 2.5, 1e-3]));
        let r = finite_difference_check(half_sq, &p, &p.clone(), 1e-4);
        assert!(r.max_rel_err < 1e-8, "{r:?}");
        assert_eq!(r.checked, 4);
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let p = V(Tensor::vector(vec![0.3, -1.7, 2.5]));
        let mut wrong = p.clone();
        wrong.0.data[1] *= 2.0;
        let r = finite_difference_check(half_sq, &p, &wrong, 1e-4);
        assert!(r.max_rel_err > 0.1);
        assert_eq!(r.worst, Some(("theta".into(), 1)));
    }
}
