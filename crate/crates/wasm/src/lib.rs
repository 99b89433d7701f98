//! Browser bindings. Every method returns a JSON string; errors surface in
//! JavaScript as thrown strings.

use journey_core::clustering::{kmedoids, silhouette};
use journey_core::ingest::{allowed_next, parse_query};
use journey_core::prediction::{classify_value, DEFAULT_THRESHOLD};
use journey_core::{
    distance_matrix, find_counterfactual, fixture, mds, read_dataset, CfQuery, Dataset, DistanceConfig,
    DistanceMatrix, Format, Journey, Kernel, KnnModel, Outcome, StageMask, StageWeights,
};
use serde_json::json;
use wasm_bindgen::prelude::*;

type JsResult = Result<String, String>;

fn err(e: impl ToString) -> String {
    e.to_string()
}

fn config(w1: &str, w2: &str, w3: &str, kernel: &str) -> Result<DistanceConfig, String> {
    let weights = StageWeights::parse(w1, w2, w3).map_err(err)?;
    let kernel: Kernel = kernel.parse().map_err(err)?;
    Ok(DistanceConfig::new(weights, kernel))
}

/// Comma-separated items, e.g. `c,c,e,g`. The outcome may be omitted.
fn query(items: &str) -> Result<Journey, String> {
    let symbols: Vec<&str> = items.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    parse_query("draft", &symbols).map_err(|r| match r.position {
        Some(p) => format!("{} at item {p}", r.reason),
        None => r.reason.to_string(),
    })
}

#[wasm_bindgen]
pub struct Workbench {
    dataset: Dataset,
    matrix: Option<(DistanceConfig, DistanceMatrix)>,
    model: Option<KnnModel>,
}

#[wasm_bindgen]
impl Workbench {
    /// Starts on the bundled survey fixture.
    #[wasm_bindgen(constructor)]
    pub fn new() -> Result<Workbench, String> {
        let (dataset, _) = fixture::survey().map_err(err)?;
        Ok(Workbench::with_dataset(dataset))
    }

    /// Replaces the dataset with an uploaded CSV; returns the cleansing report.
    #[wasm_bindgen(js_name = loadCsv)]
    pub fn load_csv(&mut self, text: &str) -> JsResult {
        let (dataset, report) = read_dataset(text.as_bytes(), Format::Csv, "upload").map_err(err)?;
        *self = Workbench::with_dataset(dataset);
        serde_json::to_string(&report).map_err(err)
    }

    pub fn size(&self) -> usize {
        self.dataset.len()
    }

    /// MDS coordinates coloured by a k-medoids partition.
    #[wasm_bindgen(js_name = clusterMap)]
    pub fn cluster_map(&mut self, k: usize, w1: &str, w2: &str, w3: &str, kernel: &str, seed: u32) -> JsResult {
        let config = config(w1, w2, w3, kernel)?;
        let matrix = self.matrix_for(config)?;
        let result = kmedoids(matrix, k, u64::from(seed)).map_err(err)?;
        let sc = if k >= 2 { silhouette(matrix, &result.assignment).ok() } else { None };
        let embedding = mds(matrix).map_err(err)?;
        let notations: Vec<String> = self.dataset.journeys().iter().map(Journey::notation).collect();
        let out = json!({
            "config": config.label(),
            "ids": embedding.ids,
            "xy": embedding.xy,
            "notations": notations,
            "outcomes": self.dataset.labels(),
            "clusters": result.assignment,
            "medoids": result.medoids,
            "sizes": result.sizes,
            "silhouette": sc,
            "negative_mass": embedding.negative_mass,
        });
        Ok(out.to_string())
    }

    /// k-NN purchase estimate for a draft journey over its st1 and st2 items.
    pub fn predict(&mut self, items: &str, k: usize, w1: &str, w2: &str, w3: &str, kernel: &str) -> JsResult {
        let draft = query(items)?;
        let model = self.model_for(k, config(w1, w2, w3, kernel)?)?;
        let y_hat = model.predict_value(&draft);
        let out = json!({
            "y_hat": y_hat,
            "label": classify_value(y_hat, DEFAULT_THRESHOLD),
            "neighbors": model.neighbors(&draft),
        });
        Ok(out.to_string())
    }

    /// Closest observed journey with the requested outcome, plus the edits to reach it.
    #[allow(clippy::too_many_arguments)]
    pub fn counterfactual(
        &mut self,
        items: &str,
        y_obj: u8,
        lambda: f64,
        k: usize,
        w1: &str,
        w2: &str,
        w3: &str,
        kernel: &str,
    ) -> JsResult {
        let y_obj = Outcome::from_bit(y_obj).ok_or("y_obj must be 0 or 1")?;
        let base = query(items)?;
        let k = k.min(self.dataset.len());
        let model = self.model_for(k, config(w1, w2, w3, kernel)?)?.clone();
        let q = CfQuery::new(base, y_obj, lambda).with_mask(StageMask::PRE_PURCHASE);
        let result = find_counterfactual(&self.dataset, &model, &q).map_err(err)?;
        serde_json::to_string(&result).map_err(err)
    }

    /// Items that may legally follow the draft; empty once it has an outcome.
    #[wasm_bindgen(js_name = allowedNext)]
    pub fn allowed_next(&self, items: &str) -> JsResult {
        let draft = query(items)?;
        let next: Vec<String> = if draft.outcome_item().is_some() {
            Vec::new()
        } else {
            let last = draft.steps().last().and_then(|i| i.stage());
            allowed_next(last).iter().map(|i| i.to_string()).collect()
        };
        serde_json::to_string(&next).map_err(err)
    }
}

impl Workbench {
    fn with_dataset(dataset: Dataset) -> Self {
        Workbench {
            dataset,
            matrix: None,
            model: None,
        }
    }

    fn matrix_for(&mut self, config: DistanceConfig) -> Result<&DistanceMatrix, String> {
        if self.matrix.as_ref().is_none_or(|(c, _)| *c != config) {
            let m = distance_matrix(&self.dataset, &config, StageMask::ALL).map_err(err)?;
            self.matrix = Some((config, m));
        }
        Ok(&self.matrix.as_ref().expect("just filled").1)
    }

    fn model_for(&mut self, k: usize, config: DistanceConfig) -> Result<&KnnModel, String> {
        if self.model.as_ref().is_none_or(|m| m.k() != k || *m.config() != config) {
            self.model = Some(KnnModel::fit(&self.dataset, k, config).map_err(err)?);
        }
        Ok(self.model.as_ref().expect("just filled"))
    }
}
