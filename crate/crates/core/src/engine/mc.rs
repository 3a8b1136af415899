//! Monte Carlo estimation with deterministic parallel reduction.

use std::time::Instant;

use super::parallel::map_indexed;
use super::payoff::{payoff, PayoffKind};
use super::rng::StreamRng;
use crate::kernels::Kernel;
use crate::schemes::{
    valid_pairs, CirParams, GbmParams, HestonParams, LiftedEulerPlan, ModelKind, SchemeKind,
    SecondOrderScheme, SplittingPlan, Terminal, VolModel, VolterraEulerPlan,
};
use crate::{Error, Result};

/// Paths per reduction block. Fixed so that the summation tree does not
/// depend on the number of workers.
pub const BLOCK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Cir(CirParams),
    Heston(HestonParams),
    Gbm(GbmParams),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Cir(_) => ModelKind::Cir,
            Model::Heston(_) => ModelKind::Heston,
            Model::Gbm(_) => ModelKind::Gbm,
        }
    }

    pub fn x0(&self) -> f64 {
        match self {
            Model::Cir(p) => p.x0,
            Model::Heston(p) => p.cir.x0,
            Model::Gbm(p) => p.x0,
        }
    }

    fn vol_model(&self) -> Option<VolModel> {
        match self {
            Model::Cir(p) => Some(VolModel::Cir(*p)),
            Model::Heston(p) => Some(VolModel::Heston(*p)),
            Model::Gbm(_) => None,
        }
    }
}

/// Everything that defines the simulated quantity except the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct McProblem {
    pub kernel: Kernel,
    pub model: Model,
    pub t_end: f64,
    pub strike: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub paths: usize,
    pub seed: u64,
    pub steps: usize,
    /// Advisory thread count: 1 is sequential, 0 uses every available core.
    /// Never changes the result.
    pub workers: usize,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 || self.steps == 0 {
            return Err(Error::Config("paths and steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub ci95_halfwidth: f64,
    pub n: usize,
    pub seconds: f64,
    pub warning: Option<String>,
}

/// Running count, mean and centred second moment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        if other.n == 0.0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n / n,
            m2: self.m2 + other.m2 + d * d * self.n * other.n / n,
        }
    }
}

/// Mean and standard error of `sample(path, rng)` over `paths` paths, each
/// with its own stream keyed by `(seed, path)`.
pub fn mc_estimate<F>(paths: usize, seed: u64, workers: usize, sample: F) -> Result<McEstimate>
where
    F: Fn(u64, &mut StreamRng) -> Result<f64> + Sync + Send,
{
    if paths == 0 {
        return Err(Error::Config("paths must be positive".into()));
    }
    let start = Instant::now();
    let blocks = paths.div_ceil(BLOCK);
    let parts = map_indexed(blocks, workers, |b| -> Result<Moments> {
        let mut m = Moments::default();
        for path in b * BLOCK..((b + 1) * BLOCK).min(paths) {
            let mut rng = StreamRng::for_path(seed, path as u64);
            m.push(sample(path as u64, &mut rng)?);
        }
        Ok(m)
    });
    let mut total = Moments::default();
    for part in parts {
        total = total.merge(part?);
    }
    let (stderr, warning) = if paths > 1 {
        (
            (total.m2 / (total.n - 1.0)).max(0.0).sqrt() / total.n.sqrt(),
            None,
        )
    } else {
        (
            0.0,
            Some("single path: standard error undefined, reported as 0".to_string()),
        )
    };
    Ok(McEstimate {
        mean: total.mean,
        stderr,
        ci95_halfwidth: 1.96 * stderr,
        n: paths,
        seconds: start.elapsed().as_secs_f64(),
        warning,
    })
}

/// A scheme prepared for one problem and step count.
#[derive(Debug, Clone)]
pub enum PathSampler<'a> {
    SecondOrder(SecondOrderScheme<'a>, usize),
    EulerVolterra(VolterraEulerPlan, VolModel),
    EulerLifted(LiftedEulerPlan<'a>, VolModel),
    Splitting(SplittingPlan, GbmParams),
}

fn pairing_error(scheme: SchemeKind, problem: &McProblem, why: &str) -> Error {
    Error::Config(format!(
        "{scheme} cannot simulate {} {why}; valid scheme/model pairs: {}",
        problem.model.kind(),
        valid_pairs()
    ))
}

impl<'a> PathSampler<'a> {
    pub fn new(problem: &'a McProblem, scheme: SchemeKind, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        if !scheme.supports(problem.model.kind()) {
            return Err(pairing_error(scheme, problem, ""));
        }
        let t = problem.t_end;
        let need_multi_exp = || {
            problem.kernel.as_multi_exp().ok_or_else(|| {
                pairing_error(
                    scheme,
                    problem,
                    "on a kernel that is not a positive exponential sum",
                )
            })
        };
        Ok(match (scheme, problem.model) {
            (SchemeKind::SplittingGbm, Model::Gbm(p)) => {
                PathSampler::Splitting(SplittingPlan::new(&problem.kernel, t, steps)?, p)
            }
            (SchemeKind::SecondOrder, m) => {
                let vm = m.vol_model().expect("pairing checked");
                let k = need_multi_exp()?;
                PathSampler::SecondOrder(SecondOrderScheme::new(k, vm, t / steps as f64)?, steps)
            }
            (SchemeKind::EulerLifted, m) => {
                let vm = m.vol_model().expect("pairing checked");
                vm.validate()?;
                PathSampler::EulerLifted(LiftedEulerPlan::new(need_multi_exp()?, t, steps)?, vm)
            }
            (SchemeKind::EulerVolterra, m) => {
                let vm = m.vol_model().expect("pairing checked");
                vm.validate()?;
                PathSampler::EulerVolterra(VolterraEulerPlan::new(&problem.kernel, t, steps)?, vm)
            }
            _ => return Err(pairing_error(scheme, problem, "")),
        })
    }

    pub fn terminal(&self, rng: &mut StreamRng) -> Result<Terminal> {
        match self {
            PathSampler::SecondOrder(s, n) => s.run(*n, rng),
            PathSampler::EulerVolterra(plan, m) => Ok(plan.run(m, rng)),
            PathSampler::EulerLifted(plan, m) => Ok(plan.run(m, rng)),
            PathSampler::Splitting(plan, p) => {
                let x = plan.run(p, rng);
                Ok(Terminal {
                    spot: x,
                    log_price: Some(x.max(0.0).ln()),
                })
            }
        }
    }
}

/// Monte Carlo estimate of `E[payoff]` for `problem` simulated with `scheme`.
pub fn run_mc(
    problem: &McProblem,
    scheme: SchemeKind,
    payoff_kind: PayoffKind,
    config: &McConfig,
) -> Result<McEstimate> {
    config.validate()?;
    if payoff_kind.needs_log_price() && problem.model.kind() == ModelKind::Cir {
        return Err(Error::Config(format!(
            "payoff `{payoff_kind}` needs a log-price; the cir model has none"
        )));
    }
    let sampler = PathSampler::new(problem, scheme, config.steps)?;
    let x0 = problem.model.x0();
    mc_estimate(config.paths, config.seed, config.workers, |_, rng| {
        payoff(payoff_kind, &sampler.terminal(rng)?, x0, problem.strike)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{FractionalKernel, MultiExpKernel};

    fn heston_problem() -> McProblem {
        McProblem {
            kernel: MultiExpKernel::five_factor_h04().into(),
            model: Model::Heston(HestonParams::rough_heston_defaults()),
            t_end: 1.0,
            strike: 1.0,
        }
    }

    #[test]
    fn merge_matches_one_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|x| all.push(*x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..313].iter().for_each(|x| a.push(*x));
        xs[313..].iter().for_each(|x| b.push(*x));
        let m = a.merge(b);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.m2 - all.m2).abs() < 1e-9 * all.m2);
    }

    #[test]
    fn single_path_warns() {
        let e = mc_estimate(1, 0, 1, |_, _| Ok(3.0)).unwrap();
        assert_eq!((e.mean, e.stderr), (3.0, 0.0));
        assert!(e.warning.is_some());
    }

    #[test]
    fn deterministic_model_has_zero_error() {
        let p = CirParams::new(0.02, 0.0, 0.0, 1e-300).unwrap();
        let prob = McProblem {
            kernel: MultiExpKernel::five_factor_h04().into(),
            model: Model::Cir(p),
            t_end: 1.0,
            strike: 1.0,
        };
        let cfg = McConfig {
            paths: 100,
            seed: 1,
            steps: 10,
            workers: 1,
        };
        let e = run_mc(&prob, SchemeKind::SecondOrder, PayoffKind::Laplace, &cfg).unwrap();
        assert!((e.mean - (-1.0f64).exp()).abs() < 1e-14);
        assert!(e.stderr < 1e-14);
    }

    #[test]
    fn workers_do_not_change_the_estimate() {
        let prob = heston_problem();
        let base = McConfig {
            paths: 5000,
            seed: 42,
            steps: 8,
            workers: 1,
        };
        let a = run_mc(&prob, SchemeKind::SecondOrder, PayoffKind::Call, &base).unwrap();
        for w in [0, 2, 3] {
            let b = run_mc(
                &prob,
                SchemeKind::SecondOrder,
                PayoffKind::Call,
                &McConfig { workers: w, ..base },
            )
            .unwrap();
            assert_eq!(a.mean.to_bits(), b.mean.to_bits());
            assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        }
    }

    #[test]
    fn pairing_errors_list_valid_pairs() {
        let prob = heston_problem();
        let cfg = McConfig {
            paths: 10,
            seed: 1,
            steps: 4,
            workers: 1,
        };
        match run_mc(&prob, SchemeKind::SplittingGbm, PayoffKind::Call, &cfg) {
            Err(Error::Config(msg)) => assert!(msg.contains("second-order/heston")),
            other => panic!("unexpected {other:?}"),
        }
        let frac = McProblem {
            kernel: FractionalKernel::new(0.1).unwrap().into(),
            ..prob.clone()
        };
        assert!(run_mc(&frac, SchemeKind::SecondOrder, PayoffKind::Call, &cfg).is_err());
        assert!(run_mc(&frac, SchemeKind::EulerVolterra, PayoffKind::Call, &cfg).is_ok());
        let cir = McProblem {
            model: Model::Cir(CirParams::rough_heston_defaults()),
            ..prob
        };
        assert!(matches!(
            run_mc(&cir, SchemeKind::SecondOrder, PayoffKind::Call, &cfg),
            Err(Error::Config(_))
        ));
    }
}
