//! One-stop pipeline: filter, optionally relabel, smooth, discretize, and
//! run the configured association tests on a single data set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fanova::{fanova_test, FanovaOptions, FanovaResult};
use crate::flm::{default_beta_basis, flm_test, FlmOptions, FlmResult};
use crate::genotype::{
    count_flips, filter_constant_variants, relabel_minimize_flips, GenotypeMatrix, Phenotype,
};
use crate::rng::{domain, substream_seed};
use crate::skatlite::{skat_test, SkatLiteResult, SkatOptions};
use crate::splines::{discretize_curves, smooth_matrix, KnotStrategy};

/// Association testing methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fanova,
    Flm,
    SkatLite,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Fanova => "fanova",
            Method::Flm => "flm",
            Method::SkatLite => "skatlite",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fanova" => Ok(Method::Fanova),
            "flm" => Ok(Method::Flm),
            "skatlite" | "skat_lite" | "skat" => Ok(Method::SkatLite),
            other => Err(Error::Config(format!("unknown method: {other:?}"))),
        }
    }
}

pub const ALL_METHODS: [Method; 3] = [Method::Fanova, Method::Flm, Method::SkatLite];

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub strategy: KnotStrategy,
    pub relabel: bool,
    pub methods: Vec<Method>,
    /// Permutation count I for every permutation-calibrated p-value.
    pub permutations: usize,
    pub seed: u64,
    /// Also compute the FANOVA permutation p-value (asymptotic is always
    /// computed).
    pub fanova_permutation: bool,
    /// Also compute the approximate moment-matched p-value for SKAT-lite.
    pub skat_satterthwaite: bool,
    /// Grid resolution; default is twice the number of (filtered) variants.
    pub grid_size: Option<usize>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            strategy: KnotStrategy::PenalizedFull,
            relabel: false,
            methods: vec![Method::Fanova],
            permutations: 999,
            seed: 0,
            fanova_permutation: false,
            skat_satterthwaite: false,
            grid_size: None,
        }
    }
}

/// Per-method results plus bookkeeping about the prepared data.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub n_subjects: usize,
    /// Variants surviving the constant-column filter.
    pub n_variants: usize,
    pub grid_size: usize,
    pub relabeled: bool,
    pub flips_before: usize,
    pub flips_after: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fanova: Option<FanovaResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flm: Option<FlmResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skatlite: Option<SkatLiteResult>,
}

/// Run the full pipeline on one data set.
pub fn analyze(g: &GenotypeMatrix, ph: &Phenotype, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    if ph.n() != g.n_subjects() {
        return Err(Error::Group(format!(
            "{} phenotype labels but {} genotype rows",
            ph.n(),
            g.n_subjects()
        )));
    }
    let filtered = filter_constant_variants(g)?;
    let flips_before = count_flips(&filtered);
    let (working, flips_after) = if opts.relabel {
        let (relabeled, _) = relabel_minimize_flips(&filtered)?;
        let after = count_flips(&relabeled);
        (relabeled, after)
    } else {
        (filtered, flips_before)
    };

    let needs_curves = opts
        .methods
        .iter()
        .any(|m| matches!(m, Method::Fanova | Method::Flm));
    let t = working.n_variants();
    let grid_size = opts.grid_size.unwrap_or(2 * t).max(2);

    let grid = if needs_curves {
        let (curves, _) = smooth_matrix(&working, opts.strategy)?;
        Some(discretize_curves(&curves, grid_size)?)
    } else {
        None
    };

    let mut report = AnalysisReport {
        n_subjects: working.n_subjects(),
        n_variants: t,
        grid_size,
        relabeled: opts.relabel,
        flips_before,
        flips_after,
        fanova: None,
        flm: None,
        skatlite: None,
    };

    for method in &opts.methods {
        match method {
            Method::Fanova => {
                let grid = grid.as_ref().expect("curves computed for fanova");
                let fopts = FanovaOptions {
                    with_permutation: opts.fanova_permutation,
                    permutations: opts.permutations,
                    seed: substream_seed(opts.seed, domain::ANALYSIS, 1),
                };
                report.fanova = Some(fanova_test(grid, ph, &fopts)?);
            }
            Method::Flm => {
                let grid = grid.as_ref().expect("curves computed for flm");
                let fopts = FlmOptions {
                    permutations: opts.permutations,
                    seed: substream_seed(opts.seed, domain::ANALYSIS, 2),
                };
                report.flm = Some(flm_test(grid, ph, &default_beta_basis(), &fopts)?);
            }
            Method::SkatLite => {
                let sopts = SkatOptions {
                    permutations: opts.permutations,
                    seed: substream_seed(opts.seed, domain::ANALYSIS, 3),
                    with_satterthwaite: opts.skat_satterthwaite,
                };
                report.skatlite = Some(skat_test(&working, ph, &sopts)?);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn toy_data(n: usize, t: usize, seed: u64) -> (GenotypeMatrix, Phenotype) {
        let mut rng = crate::rng::substream_rng(seed, 70, 0);
        let codes = Array2::from_shape_fn((n, t), |_| rng.random_range(0..3) as i8);
        let positions: Vec<f64> = (0..t).map(|j| j as f64).collect();
        let g = GenotypeMatrix::from_parts(
            codes,
            &positions,
            (0..t).map(|j| format!("v{j}")).collect(),
            (0..n).map(|i| format!("s{i}")).collect(),
        )
        .unwrap();
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        (g, Phenotype::case_control(labels).unwrap())
    }

    #[test]
    fn full_pipeline_produces_all_methods() {
        let (g, ph) = toy_data(24, 12, 1);
        let opts = AnalysisOptions {
            methods: ALL_METHODS.to_vec(),
            relabel: true,
            permutations: 49,
            fanova_permutation: true,
            skat_satterthwaite: true,
            seed: 5,
            ..Default::default()
        };
        let report = analyze(&g, &ph, &opts).unwrap();
        let fanova = report.fanova.unwrap();
        assert!(fanova.p_asymptotic > 0.0 && fanova.p_asymptotic <= 1.0);
        assert!(fanova.p_permutation.is_some());
        let flm = report.flm.unwrap();
        assert!(flm.p_permutation.is_some());
        let skat = report.skatlite.unwrap();
        assert!(skat.p_permutation.is_some());
        assert!(skat.p_satterthwaite.is_some());
        assert!(report.flips_after <= report.flips_before);
        assert_eq!(report.grid_size, 2 * report.n_variants);
    }

    #[test]
    fn same_seed_same_report() {
        let (g, ph) = toy_data(20, 10, 9);
        let opts = AnalysisOptions {
            methods: ALL_METHODS.to_vec(),
            permutations: 99,
            fanova_permutation: true,
            seed: 77,
            ..Default::default()
        };
        let r1 = analyze(&g, &ph, &opts).unwrap();
        let r2 = analyze(&g, &ph, &opts).unwrap();
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
    }

    #[test]
    fn grid_size_override() {
        let (g, ph) = toy_data(16, 10, 3);
        let opts = AnalysisOptions {
            grid_size: Some(31),
            ..Default::default()
        };
        let report = analyze(&g, &ph, &opts).unwrap();
        assert_eq!(report.grid_size, 31);
    }
}
