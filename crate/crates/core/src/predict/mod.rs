//! Social visual behavior score prediction: feature assembly, per-fold
//! preprocessing, five regressors, bootstrap out-of-bag evaluation and the
//! with-gaze / profile-only ablation.

mod ensemble;
mod linear;
mod mlp;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ensemble::{ForestParams, GbtParams, GradientBoosting, MaxFeatures, RandomForest};
pub use linear::{
    lambda_grid, lambda_max, lasso_fit, lasso_objective, svr_fit, svr_objective, LambdaChoice,
    Lasso, LassoParams, LinearModel, SvrParams,
};
pub use mlp::{Mlp, MlpParams};
pub use tree::{RegressionTree, TreeParams};

use crate::error::{Error, Result};
use crate::measures::MeasureSet;
use crate::model::{ChildProfile, ObservationKey};

/// Range of the expert score; predictions are clipped to it by default.
pub const SVB_RANGE: (f64, f64) = (1.0, 4.0);

pub const TABLE4_HEADER: &str = "model,setting,mae,rmse,r2,B,seed";

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    MutualGazeRatio,
    MutualGazeDuration,
    LevelOfFunctioning,
    AdosSocialAffect,
}

impl Feature {
    pub const ALL: [Feature; 4] = [
        Feature::MutualGazeRatio,
        Feature::MutualGazeDuration,
        Feature::LevelOfFunctioning,
        Feature::AdosSocialAffect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::MutualGazeRatio => "mutual_gaze_ratio",
            Feature::MutualGazeDuration => "mutual_gaze_duration",
            Feature::LevelOfFunctioning => "level_of_functioning",
            Feature::AdosSocialAffect => "ados_social_affect",
        }
    }

    pub fn is_gaze(self) -> bool {
        matches!(self, Feature::MutualGazeRatio | Feature::MutualGazeDuration)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Setting {
    WithGaze,
    ProfileOnly,
}

impl Setting {
    pub const ALL: [Setting; 2] = [Setting::WithGaze, Setting::ProfileOnly];

    pub fn name(self) -> &'static str {
        match self {
            Setting::WithGaze => "WithGaze",
            Setting::ProfileOnly => "ProfileOnly",
        }
    }

    pub fn keeps(self, f: Feature) -> bool {
        match self {
            Setting::WithGaze => true,
            Setting::ProfileOnly => !f.is_gaze(),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "WithGaze" => Ok(Setting::WithGaze),
            "ProfileOnly" => Ok(Setting::ProfileOnly),
            other => Err(Error::invalid(format!("unknown setting {other:?}"))),
        }
    }
}

/// One row per observation. Absent cells (only ever mutual gaze duration)
/// are NaN until imputed.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub keys: Vec<ObservationKey>,
    pub features: Vec<Feature>,
    pub x: Array2<f64>,
    pub y: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(
        keys: Vec<ObservationKey>,
        features: Vec<Feature>,
        x: Array2<f64>,
        y: Vec<f64>,
    ) -> Result<Self> {
        if x.nrows() != keys.len() || x.nrows() != y.len() || x.ncols() != features.len() {
            return Err(Error::invalid(format!(
                "feature matrix shape {:?} does not match {} keys, {} targets, {} features",
                x.dim(),
                keys.len(),
                y.len(),
                features.len()
            )));
        }
        if let Some(t) = y.iter().find(|t| !t.is_finite()) {
            return Err(Error::invalid(format!("non-finite target {t}")));
        }
        Ok(FeatureMatrix {
            keys,
            features,
            x,
            y,
        })
    }

    /// Joins measures with child profiles. Observations whose child has no
    /// svb score are left out.
    pub fn from_measures(
        measures: &[MeasureSet],
        profiles: &BTreeMap<String, ChildProfile>,
    ) -> Result<Self> {
        let mut keys = Vec::new();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let mut unlabeled = 0usize;
        for m in measures {
            let profile = profiles.get(&m.key.child_id).ok_or_else(|| {
                Error::validation(format!("no profile for child {}", m.key.child_id))
            })?;
            let Some(svb) = profile.svb_score else {
                unlabeled += 1;
                continue;
            };
            keys.push(m.key.clone());
            y.push(svb);
            rows.extend([
                m.mutual_gaze_ratio,
                m.mutual_gaze_duration_frames.unwrap_or(f64::NAN),
                f64::from(profile.level_of_functioning),
                f64::from(profile.ados_social_affect),
            ]);
        }
        if keys.is_empty() {
            return Err(Error::validation(
                "no observation has a social visual behavior score",
            ));
        }
        if unlabeled > 0 {
            log::info!("{unlabeled} observation(s) without an svb score left out");
        }
        let x = Array2::from_shape_vec((keys.len(), 4), rows).expect("four values per row");
        FeatureMatrix::new(keys, Feature::ALL.to_vec(), x, y)
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    /// Keeps only the columns the setting allows.
    pub fn for_setting(&self, setting: Setting) -> FeatureMatrix {
        let cols: Vec<usize> = (0..self.features.len())
            .filter(|&j| setting.keeps(self.features[j]))
            .collect();
        FeatureMatrix {
            keys: self.keys.clone(),
            features: cols.iter().map(|&j| self.features[j]).collect(),
            x: self.x.select(Axis(1), &cols),
            y: self.y.clone(),
        }
    }

    fn without_column(&self, j: usize) -> FeatureMatrix {
        let cols: Vec<usize> = (0..self.features.len()).filter(|&c| c != j).collect();
        FeatureMatrix {
            keys: self.keys.clone(),
            features: cols.iter().map(|&c| self.features[c]).collect(),
            x: self.x.select(Axis(1), &cols),
            y: self.y.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Imputed {
    pub data: FeatureMatrix,
    /// Rows whose duration was filled in; empty when the feature was dropped
    /// or never present.
    pub mask: Vec<bool>,
    pub dropped: bool,
}

/// Mean-imputes absent durations over all rows. When no row has a duration
/// the feature is removed instead.
pub fn impute_duration(data: &FeatureMatrix) -> Imputed {
    let Some(j) = data
        .features
        .iter()
        .position(|&f| f == Feature::MutualGazeDuration)
    else {
        return Imputed {
            data: data.clone(),
            mask: Vec::new(),
            dropped: false,
        };
    };
    let col = data.x.column(j);
    let mask: Vec<bool> = col.iter().map(|v| v.is_nan()).collect();
    let present: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
    if present.is_empty() {
        log::warn!("mutual gaze duration is absent for every observation; feature dropped");
        return Imputed {
            data: data.without_column(j),
            mask: Vec::new(),
            dropped: true,
        };
    }
    let fill = present.iter().sum::<f64>() / present.len() as f64;
    let mut out = data.clone();
    out.x
        .column_mut(j)
        .mapv_inplace(|v| if v.is_nan() { fill } else { v });
    Imputed {
        data: out,
        mask,
        dropped: false,
    }
}

/// Column-wise mean imputation and z-scoring, fitted on training rows only.
/// Columns with no observed training value are dropped; a zero standard
/// deviation leaves the column centered but unscaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    keep: Vec<usize>,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Preprocessor {
    pub fn fit(x: ArrayView2<'_, f64>, rows: &[usize]) -> Self {
        let mut keep = Vec::new();
        let mut mean = Vec::new();
        let mut scale = Vec::new();
        for j in 0..x.ncols() {
            let seen: Vec<f64> = rows
                .iter()
                .map(|&i| x[[i, j]])
                .filter(|v| !v.is_nan())
                .collect();
            if seen.is_empty() {
                continue;
            }
            let fill = seen.iter().sum::<f64>() / seen.len() as f64;
            // Imputed cells sit at the mean, so they add nothing to the
            // variance but do count in the denominator.
            let ss: f64 = seen.iter().map(|v| (v - fill) * (v - fill)).sum();
            let sd = (ss / rows.len() as f64).sqrt();
            keep.push(j);
            mean.push(fill);
            scale.push(if sd > 0.0 { sd } else { 1.0 });
        }
        Preprocessor { keep, mean, scale }
    }

    pub fn n_output(&self) -> usize {
        self.keep.len()
    }

    pub fn kept_columns(&self) -> &[usize] {
        &self.keep
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        Array2::from_shape_fn((x.nrows(), self.keep.len()), |(i, k)| {
            let v = x[[i, self.keep[k]]];
            if v.is_nan() {
                0.0
            } else {
                (v - self.mean[k]) / self.scale[k]
            }
        })
    }
}

/// Z-scores every column of a complete matrix in place of a fitted
/// [`Preprocessor`].
pub fn normalize(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let rows: Vec<usize> = (0..x.nrows()).collect();
    Preprocessor::fit(x, &rows).transform(x)
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "RF")]
    Rf,
    Lasso,
    #[serde(rename = "SVR")]
    Svr,
    #[serde(rename = "GBT")]
    Gbt,
    #[serde(rename = "MLP")]
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Rf,
        ModelKind::Lasso,
        ModelKind::Svr,
        ModelKind::Gbt,
        ModelKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rf => "RF",
            ModelKind::Lasso => "Lasso",
            ModelKind::Svr => "SVR",
            ModelKind::Gbt => "GBT",
            ModelKind::Mlp => "MLP",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown model {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ModelParams {
    #[serde(rename = "RF")]
    Rf(ForestParams),
    Lasso(LassoParams),
    #[serde(rename = "SVR")]
    Svr(SvrParams),
    #[serde(rename = "GBT")]
    Gbt(GbtParams),
    #[serde(rename = "MLP")]
    Mlp(MlpParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub params: ModelParams,
    /// Clip predictions to this closed range; `None` leaves them raw.
    pub clip: Option<(f64, f64)>,
}

impl ModelSpec {
    pub fn new(params: ModelParams) -> Self {
        ModelSpec {
            params,
            clip: Some(SVB_RANGE),
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        ModelSpec::new(match kind {
            ModelKind::Rf => ModelParams::Rf(ForestParams::default()),
            ModelKind::Lasso => ModelParams::Lasso(LassoParams::default()),
            ModelKind::Svr => ModelParams::Svr(SvrParams::default()),
            ModelKind::Gbt => ModelParams::Gbt(GbtParams::default()),
            ModelKind::Mlp => ModelParams::Mlp(MlpParams::default()),
        })
    }

    pub fn unclipped(mut self) -> Self {
        self.clip = None;
        self
    }

    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::Rf(_) => ModelKind::Rf,
            ModelParams::Lasso(_) => ModelKind::Lasso,
            ModelParams::Svr(_) => ModelKind::Svr,
            ModelParams::Gbt(_) => ModelKind::Gbt,
            ModelParams::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::invalid(format!("{}: {what}", self.kind())));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        match &self.params {
            ModelParams::Rf(p) => {
                if p.n_trees == 0 {
                    return bad("n_trees must be at least 1");
                }
                if p.min_samples_leaf == 0 {
                    return bad("min_samples_leaf must be at least 1");
                }
                if matches!(p.max_features, MaxFeatures::Count(0)) {
                    return bad("max_features count must be at least 1");
                }
            }
            ModelParams::Lasso(p) => {
                match p.lambda {
                    LambdaChoice::Fixed(l) if !(l.is_finite() && l >= 0.0) => {
                        return bad("lambda must be finite and non-negative")
                    }
                    LambdaChoice::Grid {
                        n_lambdas,
                        min_ratio,
                        inner_replicates,
                    } => {
                        if n_lambdas == 0 || inner_replicates == 0 {
                            return bad("grid needs at least one lambda and one replicate");
                        }
                        if !(min_ratio > 0.0 && min_ratio <= 1.0) {
                            return bad("min_ratio must lie in (0, 1]");
                        }
                    }
                    _ => {}
                }
                if !(p.tol.is_finite() && p.tol >= 0.0) || p.max_sweeps == 0 {
                    return bad("tol must be non-negative and max_sweeps positive");
                }
            }
            ModelParams::Svr(p) => {
                if !(p.epsilon.is_finite() && p.epsilon >= 0.0)
                    || !pos(p.c)
                    || !pos(p.learning_rate)
                {
                    return bad("epsilon must be non-negative; c and learning_rate positive");
                }
            }
            ModelParams::Gbt(p) => {
                if p.n_trees == 0 || p.min_samples_leaf == 0 || !pos(p.learning_rate) {
                    return bad("n_trees, min_samples_leaf and learning_rate must be positive");
                }
            }
            ModelParams::Mlp(p) => {
                if p.hidden == 0 || !pos(p.learning_rate) {
                    return bad("hidden and learning_rate must be positive");
                }
            }
        }
        if let Some((lo, hi)) = self.clip {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(format!("bad clip range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Fitted {
    Constant(f64),
    Rf(RandomForest),
    Linear(LinearModel),
    Gbt(GradientBoosting),
    Mlp(Mlp),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    kind: ModelKind,
    n_features: usize,
    clip: Option<(f64, f64)>,
    fitted: Fitted,
}

impl Model {
    /// Fits on a complete (imputed, normalized) design. A constant target
    /// yields a constant model whatever the kind.
    pub fn fit(spec: &ModelSpec, x: ArrayView2<'_, f64>, y: &[f64], seed: u64) -> Result<Model> {
        spec.validate()?;
        if x.nrows() != y.len() {
            return Err(Error::invalid(format!(
                "{} rows but {} targets",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() < 2 {
            return Err(Error::invalid("fitting needs at least two rows"));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "design and targets must be finite; impute first",
            ));
        }
        let x = x.as_standard_layout();
        let x = x.view();
        let first = y[0];
        let fitted = if y.iter().all(|&t| t == first) {
            Fitted::Constant(first)
        } else {
            match &spec.params {
                ModelParams::Rf(p) => Fitted::Rf(RandomForest::fit(x, y, p, seed)),
                ModelParams::Lasso(p) => Fitted::Linear(Lasso::fit(x, y, p, seed).model),
                ModelParams::Svr(p) => Fitted::Linear(svr_fit(x, y, p)),
                ModelParams::Gbt(p) => Fitted::Gbt(GradientBoosting::fit(x, y, p, seed)),
                ModelParams::Mlp(p) => Fitted::Mlp(Mlp::fit(x, y, p, seed)),
            }
        };
        Ok(Model {
            kind: spec.kind(),
            n_features: x.ncols(),
            clip: spec.clip,
            fitted,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::invalid(format!(
                "{} model was fitted on {} features, got {}",
                self.kind,
                self.n_features,
                x.ncols()
            )));
        }
        let x = x.as_standard_layout();
        x.rows()
            .into_iter()
            .map(|r| {
                let r = r.as_slice().expect("standard layout");
                let v = match &self.fitted {
                    Fitted::Constant(c) => *c,
                    Fitted::Rf(m) => m.predict_row(r),
                    Fitted::Linear(m) => m.predict_row(r),
                    Fitted::Gbt(m) => m.predict_row(r),
                    Fitted::Mlp(m) => m.predict_row(r),
                };
                if !v.is_finite() {
                    return Err(Error::numeric(format!(
                        "{} produced a non-finite prediction",
                        self.kind
                    )));
                }
                Ok(match self.clip {
                    Some((lo, hi)) => v.clamp(lo, hi),
                    None => v,
                })
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_name: String,
    pub setting: Setting,
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
    pub n_bootstrap: usize,
    pub seed: u64,
    /// Number of pooled out-of-bag predictions.
    pub n_oob: usize,
    pub skipped_replicates: usize,
    /// Standard deviation of the per-replicate out-of-bag MAE.
    pub mae_se: f64,
}

/// Rows not drawn in a resample of `n` from replicate `b`'s stream, with the
/// drawn rows and the stream positioned after the draw.
fn resample(n: usize, seed: u64, b: usize) -> (Vec<usize>, Vec<usize>, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    let draw: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let mut in_bag = vec![false; n];
    draw.iter().for_each(|&i| in_bag[i] = true);
    let oob = (0..n).filter(|&i| !in_bag[i]).collect();
    (draw, oob, rng)
}

fn replicate(
    spec: &ModelSpec,
    data: &FeatureMatrix,
    seed: u64,
    b: usize,
) -> Result<Option<Vec<(f64, f64)>>> {
    let (draw, oob, mut rng) = resample(data.n_rows(), seed, b);
    if oob.is_empty() {
        return Ok(None);
    }
    let prep = Preprocessor::fit(data.x.view(), &draw);
    let xb = prep.transform(data.x.select(Axis(0), &draw).view());
    let yb: Vec<f64> = draw.iter().map(|&i| data.y[i]).collect();
    let model = Model::fit(spec, xb.view(), &yb, rng.random())?;
    let xo = prep.transform(data.x.select(Axis(0), &oob).view());
    let pred = model.predict(xo.view())?;
    Ok(Some(oob.iter().map(|&i| data.y[i]).zip(pred).collect()))
}

/// Bootstrap out-of-bag evaluation. Replicate `b` draws from stream `b` of
/// `seed`, so the report does not depend on scheduling.
pub fn bootstrap_evaluate(
    spec: &ModelSpec,
    data: &FeatureMatrix,
    b: usize,
    seed: u64,
    setting: Setting,
) -> Result<EvalReport> {
    spec.validate()?;
    if b == 0 {
        return Err(Error::invalid("B must be at least 1"));
    }
    if data.n_rows() < 5 {
        return Err(Error::invalid(format!(
            "bootstrap evaluation needs at least 5 rows, got {}",
            data.n_rows()
        )));
    }
    let per_rep: Vec<Option<Vec<(f64, f64)>>> = (0..b)
        .into_par_iter()
        .map(|r| replicate(spec, data, seed, r))
        .collect::<Result<_>>()?;

    let mut pairs = Vec::new();
    let mut rep_mae = Vec::new();
    let mut skipped = 0;
    for rep in per_rep {
        match rep {
            None => skipped += 1,
            Some(p) => {
                rep_mae.push(p.iter().map(|(t, f)| (t - f).abs()).sum::<f64>() / p.len() as f64);
                pairs.extend(p);
            }
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} of {b} replicates had no out-of-bag rows");
    }
    if pairs.is_empty() {
        return Err(Error::numeric(
            "no replicate produced out-of-bag predictions",
        ));
    }
    let n = pairs.len() as f64;
    let mae = pairs.iter().map(|(t, f)| (t - f).abs()).sum::<f64>() / n;
    let sse: f64 = pairs.iter().map(|(t, f)| (t - f) * (t - f)).sum();
    let y_mean = pairs.iter().map(|(t, _)| t).sum::<f64>() / n;
    let sst: f64 = pairs.iter().map(|(t, _)| (t - y_mean) * (t - y_mean)).sum();
    if sst == 0.0 {
        return Err(Error::numeric(
            "out-of-bag targets are constant; R² is undefined",
        ));
    }
    let mae_se = if rep_mae.len() > 1 {
        crate::stats::mean_sd(&rep_mae)?.1
    } else {
        0.0
    };
    Ok(EvalReport {
        model_name: spec.kind().name().to_string(),
        setting,
        mae,
        rmse: (sse / n).sqrt(),
        r2: 1.0 - sse / sst,
        n_bootstrap: b,
        seed,
        n_oob: pairs.len(),
        skipped_replicates: skipped,
        mae_se,
    })
}

/// Hyperparameters for the five models; any field missing from a JSON
/// override keeps its default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictConfig {
    pub rf: ForestParams,
    pub lasso: LassoParams,
    pub svr: SvrParams,
    pub gbt: GbtParams,
    pub mlp: MlpParams,
    pub clip: bool,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            rf: ForestParams::default(),
            lasso: LassoParams::default(),
            svr: SvrParams::default(),
            gbt: GbtParams::default(),
            mlp: MlpParams::default(),
            clip: true,
        }
    }
}

impl PredictConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("model config: {e}")))
    }

    pub fn specs(&self) -> Vec<ModelSpec> {
        let clip = self.clip.then_some(SVB_RANGE);
        [
            ModelParams::Rf(self.rf),
            ModelParams::Lasso(self.lasso),
            ModelParams::Svr(self.svr),
            ModelParams::Gbt(self.gbt),
            ModelParams::Mlp(self.mlp),
        ]
        .into_iter()
        .map(|params| ModelSpec { params, clip })
        .collect()
    }
}

/// Five models under both settings. Both settings share every replicate's
/// resample, so their errors are paired.
pub fn ablation(
    data: &FeatureMatrix,
    b: usize,
    seed: u64,
    cfg: &PredictConfig,
) -> Result<Vec<EvalReport>> {
    if !Feature::ALL.iter().all(|f| data.features.contains(f)) {
        log::warn!("ablation data lacks some features: {:?}", data.features);
    }
    let mut out = Vec::with_capacity(10);
    for setting in Setting::ALL {
        let d = data.for_setting(setting);
        for spec in cfg.specs() {
            out.push(bootstrap_evaluate(&spec, &d, b, seed, setting)?);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Table-4 CSV
// ---------------------------------------------------------------------------

pub fn write_table4_csv(reports: &[EvalReport]) -> String {
    let mut s = String::from(TABLE4_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.model_name, r.setting, r.mae, r.rmse, r.r2, r.n_bootstrap, r.seed
        ));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table4Row {
    pub model: String,
    pub setting: Setting,
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
    pub b: usize,
    pub seed: u64,
}

pub fn parse_table4_csv(path: impl AsRef<Path>) -> Result<Vec<Table4Row>> {
    let path = path.as_ref();
    parse_table4_str(&crate::io::read_to_string(path)?, path)
}

pub(crate) fn parse_table4_str(text: &str, path: &Path) -> Result<Vec<Table4Row>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TABLE4_HEADER => {}
        _ => {
            return Err(Error::parse(
                path,
                1,
                format!("expected header {TABLE4_HEADER:?}"),
            ))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i as u64 + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 7 fields, got {}", f.len()),
            ));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::parse(path, line_no, format!("{s:?}: {e}")))
        };
        rows.push(Table4Row {
            model: f[0].to_string(),
            setting: f[1]
                .parse()
                .map_err(|e: Error| Error::parse(path, line_no, e.to_string()))?,
            mae: num(f[2])?,
            rmse: num(f[3])?,
            r2: num(f[4])?,
            b: f[5]
                .trim()
                .parse()
                .map_err(|e| Error::parse(path, line_no, format!("B: {e}")))?,
            seed: f[6]
                .trim()
                .parse()
                .map_err(|e| Error::parse(path, line_no, format!("seed: {e}")))?,
        });
    }
    Ok(rows)
}
