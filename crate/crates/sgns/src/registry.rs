//! Registry of runnable experiments. Each entry carries the statement in
//! the source text that it exercises, so summaries and listings can be
//! traced back to the claim being checked.

/// Rough wall-clock class at the default configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuntimeClass {
    /// Sub-second, deterministic.
    Fast,
    /// Seconds.
    Medium,
    /// Tens of seconds to minutes (Monte Carlo heavy).
    Slow,
}

impl RuntimeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            RuntimeClass::Fast => "fast",
            RuntimeClass::Medium => "medium",
            RuntimeClass::Slow => "slow",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExperimentInfo {
    pub name: &'static str,
    /// Anchor into the source text: the lemma/equation the checks verify.
    pub anchor: &'static str,
    pub runtime: RuntimeClass,
    pub summary: &'static str,
}

/// All registered experiments, in stable listing order.
pub const REGISTRY: &[ExperimentInfo] = &[
    ExperimentInfo {
        name: "smoothing-grid",
        anchor: "Eq. (2.1)",
        runtime: RuntimeClass::Fast,
        summary: "semigroup smoothing inequality on an (alpha, t) grid, both backends",
    },
    ExperimentInfo {
        name: "interpolation-grid",
        anchor: "Lemma 2.1",
        runtime: RuntimeClass::Fast,
        summary: "fractional-norm interpolation inequality on random fields",
    },
    ExperimentInfo {
        name: "trilinear-checks",
        anchor: "Lemma 2.2",
        runtime: RuntimeClass::Medium,
        summary: "triad antisymmetry, energy conservation, and bound-constant probe",
    },
    ExperimentInfo {
        name: "ou-law",
        anchor: "Theorem 2.4 / (H1)",
        runtime: RuntimeClass::Medium,
        summary: "exact OU transition law, increment moments, Hoelder slope, HS integral",
    },
    ExperimentInfo {
        name: "mild-residual",
        anchor: "Eq. (3.3) / Lemma 3.3",
        runtime: RuntimeClass::Medium,
        summary: "mild-formulation defect: linear exactness and order in the step size",
    },
    ExperimentInfo {
        name: "apriori-uniformity",
        anchor: "Lemma 3.2 / Lemma 3.4",
        runtime: RuntimeClass::Medium,
        summary: "a priori monitors uniform across truncations with a fitted constant",
    },
    ExperimentInfo {
        name: "galerkin-convergence",
        anchor: "Theorem 3.5",
        runtime: RuntimeClass::Medium,
        summary: "Cauchy differences across nested truncations on shared noise",
    },
    ExperimentInfo {
        name: "regularization",
        anchor: "Proposition 3.7",
        runtime: RuntimeClass::Medium,
        summary: "post-time smoothing for rough data, with the t0 = 0 negative control",
    },
    ExperimentInfo {
        name: "control-reachability",
        anchor: "Lemma 4.6(b) / Proposition 4.8",
        runtime: RuntimeClass::Medium,
        summary: "steering-control synthesis, endpoint error, irreducibility hits",
    },
    ExperimentInfo {
        name: "derivative-flow",
        anchor: "Prop. A.5 / Eq. (A.2)",
        runtime: RuntimeClass::Medium,
        summary: "derivative flow consistency and the pathwise energy bound",
    },
    ExperimentInfo {
        name: "bismut-vs-fd",
        anchor: "Eq. (4.3)",
        runtime: RuntimeClass::Slow,
        summary: "gradient by integration by parts vs common-random-number differences",
    },
    ExperimentInfo {
        name: "ergodic-averages",
        anchor: "Theorem 4.5",
        runtime: RuntimeClass::Slow,
        summary: "time-average agreement across initial data and the mixing TV proxy",
    },
];

pub fn find(name: &str) -> Option<&'static ExperimentInfo> {
    REGISTRY.iter().find(|e| e.name == name)
}
