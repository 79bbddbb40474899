//! One-vs-rest linear SVM trained by dual coordinate descent.
//!
//! Each class head solves the L1-loss (hinge) soft-margin problem
//!
//! ```text
//! min_w  ½‖w‖² + Σ_i C_i · max(0, 1 − y_i ⟨w, x̃_i⟩)
//! ```
//!
//! where `x̃_i = [x_i, 1]` carries the bias as an extra coordinate. Dual
//! coordinate descent raises the dual objective monotonically. After every
//! epoch the solver line-searches the primal objective along the segment
//! from the incumbent to the fresh dual iterate, so the primal trace of the
//! returned solution never increases. Training stops once the duality gap
//! falls below the relative tolerance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierError, IssueLabel};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeighting {
    /// Every sample costs C.
    None,
    /// Sample cost scaled by `n / (3 · n_class)`.
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions<T> {
    pub c: T,
    pub tolerance: T,
    pub max_epochs: usize,
    pub seed: u64,
    pub class_weighting: ClassWeighting,
}

impl<T: Scalar> TrainOptions<T> {
    pub fn new(c: T) -> Self {
        Self {
            c,
            tolerance: T::lit(1e-6),
            max_epochs: 10_000,
            seed: 0,
            class_weighting: ClassWeighting::None,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Per-epoch objective values of one binary head.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverTrace {
    /// Primal objective of the incumbent after each epoch; non-increasing.
    pub primal: Vec<f64>,
    /// Dual objective after each epoch; non-decreasing.
    pub dual: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<T> {
    pub(crate) weights: Vec<Vec<T>>,
    pub(crate) biases: Vec<T>,
    pub(crate) c: T,
    pub(crate) provider_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub label: IssueLabel,
    /// Decision value per class, in [`IssueLabel::ALL`] order.
    pub decision_values: [T; 3],
}

/// Label with the largest decision value; ties go to the earliest class.
pub(crate) fn argmax_label<T: Scalar>(values: &[T; 3]) -> IssueLabel {
    let mut best = 0;
    for i in 1..3 {
        if values[i] > values[best] {
            best = i;
        }
    }
    IssueLabel::ALL[best]
}

impl<T: Scalar> SvmModel<T> {
    pub fn from_parts(
        weights: Vec<Vec<T>>,
        biases: Vec<T>,
        c: T,
        provider_id: impl Into<String>,
    ) -> Result<Self, ClassifierError> {
        if weights.len() != 3 || biases.len() != 3 {
            return Err(ClassifierError::InvalidParameter(
                "a model needs exactly three class heads".into(),
            ));
        }
        let d = weights[0].len();
        if let Some(w) = weights.iter().find(|w| w.len() != d) {
            return Err(ClassifierError::DimensionMismatch {
                expected: d,
                got: w.len(),
            });
        }
        Ok(Self {
            weights,
            biases,
            c,
            provider_id: provider_id.into(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.weights[0].len()
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn weights(&self, label: IssueLabel) -> &[T] {
        &self.weights[label.index()]
    }

    pub fn bias(&self, label: IssueLabel) -> T {
        self.biases[label.index()]
    }

    pub fn decision_values(&self, x: &[T]) -> Result<[T; 3], ClassifierError> {
        if x.len() != self.dimension() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        Ok([0, 1, 2].map(|c| dot(&self.weights[c], x) + self.biases[c]))
    }

    pub fn predict(&self, x: &[T]) -> Result<Prediction<T>, ClassifierError> {
        let decision_values = self.decision_values(x)?;
        Ok(Prediction {
            label: argmax_label(&decision_values),
            decision_values,
        })
    }

    pub fn predict_labels(&self, xs: &[Vec<T>]) -> Result<Vec<IssueLabel>, ClassifierError> {
        xs.iter().map(|x| self.predict(x).map(|p| p.label)).collect()
    }

    /// Converts weights to another scalar type.
    pub fn cast<U: Scalar>(&self) -> SvmModel<U> {
        let conv = |v: T| U::lit(v.as_f64());
        SvmModel {
            weights: self
                .weights
                .iter()
                .map(|w| w.iter().map(|&v| conv(v)).collect())
                .collect(),
            biases: self.biases.iter().map(|&b| conv(b)).collect(),
            c: conv(self.c),
            provider_id: self.provider_id.clone(),
        }
    }
}

struct BinaryProblem<'a, T> {
    xs: &'a [Vec<T>],
    ys: Vec<T>,
    costs: Vec<T>,
}

impl<T: Scalar> BinaryProblem<'_, T> {
    /// ⟨w, x̃_i⟩ with the bias stored as the last coordinate of `w`.
    fn margin_raw(&self, w: &[T], i: usize) -> T {
        let d = self.xs[i].len();
        dot(&w[..d], &self.xs[i]) + w[d]
    }

    fn primal(&self, w: &[T]) -> T {
        let reg = T::lit(0.5) * dot(w, w);
        let loss: T = (0..self.xs.len())
            .map(|i| self.costs[i] * (T::one() - self.ys[i] * self.margin_raw(w, i)).max(T::zero()))
            .sum();
        reg + loss
    }

    /// Minimizes the primal over `u + t (v − u)`, `t ∈ [0, 1]`. Returns the
    /// best point and its objective; `u` itself is a candidate, so the result
    /// never exceeds `primal(u)`.
    fn line_search(&self, u: &[T], v: &[T], f_u: T) -> (Vec<T>, T) {
        let dir: Vec<T> = v.iter().zip(u).map(|(&a, &b)| a - b).collect();
        let uu = dot(u, u);
        let ud = dot(u, &dir);
        let dd = dot(&dir, &dir);
        let n = self.xs.len();
        let a: Vec<T> = (0..n).map(|i| T::one() - self.ys[i] * self.margin_raw(u, i)).collect();
        let c: Vec<T> = (0..n).map(|i| self.ys[i] * self.margin_raw(&dir, i)).collect();
        let half = T::lit(0.5);
        let f = |t: T| -> T {
            let reg = half * (uu + T::lit(2.0) * t * ud + t * t * dd);
            let loss: T = (0..n).map(|i| self.costs[i] * (a[i] - t * c[i]).max(T::zero())).sum();
            reg + loss
        };

        // Golden-section search on the convex 1-D objective.
        let phi = T::lit(0.618_033_988_749_894_8);
        let (mut lo, mut hi) = (T::zero(), T::one());
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..80 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = f(x2);
            }
        }
        let mid = (lo + hi) * half;
        let mut best_t = T::zero();
        let mut best_f = f_u;
        for t in [T::one(), mid] {
            let ft = f(t);
            if ft < best_f {
                best_f = ft;
                best_t = t;
            }
        }
        if best_t == T::zero() {
            return (u.to_vec(), f_u);
        }
        let point: Vec<T> = u.iter().zip(&dir).map(|(&x, &d)| x + best_t * d).collect();
        // Recompute exactly so the recorded value matches the stored point.
        let exact = self.primal(&point);
        if exact < f_u {
            (point, exact)
        } else {
            (u.to_vec(), f_u)
        }
    }

    fn solve(&self, opts: &TrainOptions<T>, seed: u64) -> (Vec<T>, SolverTrace) {
        let n = self.xs.len();
        let d = self.xs[0].len();
        let q: Vec<T> = self.xs.iter().map(|x| dot(x, x) + T::one()).collect();
        let mut alpha = vec![T::zero(); n];
        let mut w = vec![T::zero(); d + 1];
        let mut best = w.clone();
        let mut best_primal = self.primal(&best);
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tol = opts.tolerance.max(T::epsilon() * T::lit(100.0));
        let mut trace = SolverTrace::default();

        for epoch in 0..opts.max_epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let g = self.ys[i] * self.margin_raw(&w, i) - T::one();
                let upper = self.costs[i];
                let pg = if alpha[i] <= T::zero() {
                    g.min(T::zero())
                } else if alpha[i] >= upper {
                    g.max(T::zero())
                } else {
                    g
                };
                if pg.abs() <= T::lit(1e-12) {
                    continue;
                }
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).max(T::zero()).min(upper);
                let step = (alpha[i] - old) * self.ys[i];
                if step != T::zero() {
                    for (wj, &xj) in w[..d].iter_mut().zip(&self.xs[i]) {
                        *wj = *wj + step * xj;
                    }
                    w[d] = w[d] + step;
                }
            }

            let dual = alpha.iter().copied().sum::<T>() - T::lit(0.5) * dot(&w, &w);
            let (point, value) = self.line_search(&best, &w, best_primal);
            best = point;
            best_primal = value;
            trace.primal.push(best_primal.as_f64());
            trace.dual.push(dual.as_f64());
            trace.epochs = epoch + 1;

            let gap = best_primal - dual;
            if gap <= tol * best_primal.abs().max(T::one()) {
                trace.converged = true;
                break;
            }
        }
        (best, trace)
    }
}

fn check_inputs<T: Scalar>(xs: &[Vec<T>], labels: usize, opts: &TrainOptions<T>) -> Result<(), ClassifierError> {
    if xs.len() != labels {
        return Err(ClassifierError::LengthMismatch {
            features: xs.len(),
            labels,
        });
    }
    if xs.is_empty() {
        return Err(ClassifierError::Empty);
    }
    if !(opts.c > T::zero()) || !opts.c.is_finite() {
        return Err(ClassifierError::InvalidParameter(format!(
            "C must be positive, got {}",
            opts.c
        )));
    }
    let d = xs[0].len();
    if let Some(x) = xs.iter().find(|x| x.len() != d) {
        return Err(ClassifierError::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    Ok(())
}

/// Trains a single hinge-loss head; `positive[i]` puts sample `i` in the +1
/// class. Every sample costs C. Returns weights, bias and the solver trace.
pub fn train_binary_svm<T: Scalar>(
    xs: &[Vec<T>],
    positive: &[bool],
    opts: &TrainOptions<T>,
) -> Result<(Vec<T>, T, SolverTrace), ClassifierError> {
    check_inputs(xs, positive.len(), opts)?;
    let problem = BinaryProblem {
        xs,
        ys: positive.iter().map(|&p| if p { T::one() } else { -T::one() }).collect(),
        costs: vec![opts.c; xs.len()],
    };
    let (mut w, trace) = problem.solve(opts, opts.seed);
    let bias = w.pop().expect("bias coordinate");
    Ok((w, bias, trace))
}

/// Trains one hinge-loss head per class against the rest.
///
/// Returns the model and the solver trace of each head.
pub fn train_ovr_linear_svm<T: Scalar>(
    xs: &[Vec<T>],
    ys: &[IssueLabel],
    opts: &TrainOptions<T>,
    provider_id: &str,
) -> Result<(SvmModel<T>, [SolverTrace; 3]), ClassifierError> {
    check_inputs(xs, ys.len(), opts)?;
    let mut counts = [0usize; 3];
    for y in ys {
        counts[y.index()] += 1;
    }
    if let Some(missing) = IssueLabel::ALL.iter().find(|l| counts[l.index()] == 0) {
        return Err(ClassifierError::MissingClass(*missing));
    }

    let sample_weight = |label: IssueLabel| -> T {
        match opts.class_weighting {
            ClassWeighting::None => T::one(),
            ClassWeighting::Balanced => T::of_usize(xs.len()) / (T::lit(3.0) * T::of_usize(counts[label.index()])),
        }
    };
    let costs: Vec<T> = ys.iter().map(|&y| opts.c * sample_weight(y)).collect();

    let mut weights = Vec::with_capacity(3);
    let mut biases = Vec::with_capacity(3);
    let mut traces: [SolverTrace; 3] = Default::default();
    for label in IssueLabel::ALL {
        let problem = BinaryProblem {
            xs,
            ys: ys
                .iter()
                .map(|&y| if y == label { T::one() } else { -T::one() })
                .collect(),
            costs: costs.clone(),
        };
        let (mut w, trace) = problem.solve(opts, opts.seed.wrapping_add(label.index() as u64));
        biases.push(w.pop().expect("bias coordinate"));
        weights.push(w);
        traces[label.index()] = trace;
    }
    let model = SvmModel::from_parts(weights, biases, opts.c, provider_id)?;
    Ok((model, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use IssueLabel::*;

    fn model_with(bias: [f64; 3]) -> SvmModel<f64> {
        SvmModel::from_parts(vec![vec![0.0]; 3], bias.to_vec(), 1.0, "t").unwrap()
    }

    #[test]
    fn argmax_and_tie_rule() {
        assert_eq!(argmax_label(&[2.0, -1.0, -1.0]), Emphasize);
        assert_eq!(argmax_label(&[0.5, 0.5, -1.0]), Emphasize);
        assert_eq!(argmax_label(&[-1.0, 0.5, 0.5]), Improvable);
        assert_eq!(model_with([0.0, 0.0, 3.0]).predict(&[1.0]).unwrap().label, Others);
    }

    #[test]
    fn predict_dimension_mismatch() {
        assert!(matches!(
            model_with([0.0; 3]).predict(&[1.0, 2.0]),
            Err(ClassifierError::DimensionMismatch { .. })
        ));
    }

    /// 1-D pair plus one "others" point so all three heads exist.
    fn pair_data() -> (Vec<Vec<f64>>, Vec<IssueLabel>) {
        (
            vec![vec![-1.0], vec![1.0], vec![5.0]],
            vec![Emphasize, Improvable, Others],
        )
    }

    #[test]
    fn binary_head_separates_two_points() {
        let xs = vec![vec![-1.0], vec![1.0]];
        let (w, b, trace) = train_binary_svm(&xs, &[false, true], &TrainOptions::new(100.0)).unwrap();
        assert!(-w[0] + b < 0.0 && w[0] + b > 0.0);
        assert!(trace.converged);
        assert!(matches!(
            train_binary_svm(&xs, &[true], &TrainOptions::new(1.0)),
            Err(ClassifierError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn separable_pair_is_classified() {
        let (xs, ys) = pair_data();
        let (model, _) = train_ovr_linear_svm(&xs, &ys, &TrainOptions::new(10.0), "t").unwrap();
        assert_eq!(model.predict_labels(&xs).unwrap(), ys);
        let v = model.decision_values(&[-1.0]).unwrap();
        assert!(v[0] > 0.0 && v[1] < 0.0);
    }

    #[test]
    fn duplicated_data_keeps_training_predictions() {
        let (xs, ys) = pair_data();
        let (m1, _) = train_ovr_linear_svm(&xs, &ys, &TrainOptions::new(10.0), "t").unwrap();
        let xs2: Vec<_> = xs.iter().chain(&xs).cloned().collect();
        let ys2: Vec<_> = ys.iter().chain(&ys).copied().collect();
        let (m2, _) = train_ovr_linear_svm(&xs2, &ys2, &TrainOptions::new(10.0), "t").unwrap();
        assert_eq!(m1.predict_labels(&xs).unwrap(), m2.predict_labels(&xs).unwrap());
    }

    #[test]
    fn missing_class_is_named() {
        let err = train_ovr_linear_svm(
            &[vec![0.0], vec![1.0]],
            &[Emphasize, Others],
            &TrainOptions::new(1.0),
            "t",
        )
        .unwrap_err();
        assert!(matches!(err, ClassifierError::MissingClass(Improvable)));
        assert!(err.to_string().contains("improvable"));
    }

    #[test]
    fn ragged_input_rejected() {
        let err = train_ovr_linear_svm(
            &[vec![0.0], vec![1.0, 2.0], vec![3.0]],
            &[Emphasize, Improvable, Others],
            &TrainOptions::new(1.0),
            "t",
        )
        .unwrap_err();
        assert!(matches!(err, ClassifierError::DimensionMismatch { .. }));
    }

    #[test]
    fn converges_with_small_gap() {
        let (xs, ys) = pair_data();
        let (_, traces) = train_ovr_linear_svm(&xs, &ys, &TrainOptions::new(1.0), "t").unwrap();
        for t in &traces {
            assert!(t.converged, "{t:?}");
            let p = *t.primal.last().unwrap();
            let d = *t.dual.last().unwrap();
            assert!(p - d <= 1e-6 * p.max(1.0) + 1e-12);
        }
    }

    #[test]
    fn f32_and_f64_agree_on_labels() {
        let (xs, ys) = pair_data();
        let xs32: Vec<Vec<f32>> = xs.iter().map(|x| x.iter().map(|&v| v as f32).collect()).collect();
        let (m32, _) = train_ovr_linear_svm(&xs32, &ys, &TrainOptions::new(10.0f32), "t").unwrap();
        assert_eq!(m32.predict_labels(&xs32).unwrap(), ys);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn scaling_decision_values_keeps_label(v in proptest::array::uniform3(-10.0f64..10.0), s in 0.001f64..1000.0) {
            prop_assert_eq!(argmax_label(&v), argmax_label(&v.map(|x| x * s)));
        }

        #[test]
        fn traces_are_monotone(points in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, 0usize..3), 6..40), c in 0.05f64..50.0) {
            let mut xs: Vec<Vec<f64>> = points.iter().map(|&(a, b, _)| vec![a, b]).collect();
            let mut ys: Vec<IssueLabel> = points.iter().map(|&(_, _, l)| IssueLabel::ALL[l]).collect();
            for (i, l) in IssueLabel::ALL.iter().enumerate() {
                xs.push(vec![i as f64, -(i as f64)]);
                ys.push(*l);
            }
            let (_, traces) = train_ovr_linear_svm(&xs, &ys, &TrainOptions::new(c), "t").unwrap();
            for t in &traces {
                for w in t.primal.windows(2) {
                    prop_assert!(w[1] <= w[0] + 1e-9, "primal rose {} -> {}", w[0], w[1]);
                }
                for w in t.dual.windows(2) {
                    prop_assert!(w[1] >= w[0] - 1e-9, "dual fell {} -> {}", w[0], w[1]);
                }
            }
        }
    }
}
