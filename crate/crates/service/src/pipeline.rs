use chartalk_core::agent::{fetch_visual_features, now_millis, prompts_version, ChartImage, VlmProvider};
use chartalk_core::chart::{build_chart_from_dataset, ChartDocument, ChartSpec};
use chartalk_core::ingest::{parse_csv, CsvOptions};
use chartalk_core::semantics::{annotate, knowledge_file, KnowledgeFile};

use crate::error::ApiError;
use crate::store::{digest, ChartRecord, NewChart, RECORD_SCHEMA_VERSION};

/// Chart document (with contexts filled in) and its knowledge file.
pub fn render_chart(csv: &[u8], spec: &ChartSpec) -> Result<(ChartDocument, KnowledgeFile), ApiError> {
    let ds = parse_csv(csv, CsvOptions::default())?;
    let doc = build_chart_from_dataset(spec, &ds)?;
    let knowledge = knowledge_file(&doc).map_err(|e| ApiError::Internal(e.to_string()))?;
    let doc = annotate(&doc, &knowledge.knowledge);
    Ok((doc, knowledge))
}

/// Snapshot for the vision model: PNG when rasterization works, else the SVG.
pub fn chart_image(svg: &str) -> ChartImage {
    match rasterize(svg) {
        Ok(png) => ChartImage::new("image/png", png),
        Err(e) => {
            tracing::warn!("rasterization failed, sending SVG: {e}");
            ChartImage::new("image/svg+xml", svg.as_bytes().to_vec())
        }
    }
}

pub fn rasterize(svg: &str) -> Result<Vec<u8>, String> {
    use resvg::{tiny_skia, usvg};
    let mut opt = usvg::Options::default();
    opt.fontdb_mut().load_system_fonts();
    let tree = usvg::Tree::from_str(svg, &opt).map_err(|e| e.to_string())?;
    let size = tree.size().to_int_size();
    let mut pixmap = tiny_skia::Pixmap::new(size.width(), size.height()).ok_or("empty canvas")?;
    pixmap.fill(tiny_skia::Color::WHITE);
    resvg::render(&tree, tiny_skia::Transform::default(), &mut pixmap.as_mut());
    pixmap.encode_png().map_err(|e| e.to_string())
}

pub async fn prepare_chart(
    chart_id: String,
    csv: Vec<u8>,
    spec: ChartSpec,
    data_description: Option<String>,
    vlm: Option<&dyn VlmProvider>,
) -> Result<NewChart, ApiError> {
    let (document, knowledge, csv, spec) = tokio::task::spawn_blocking(move || {
        render_chart(&csv, &spec).map(|(d, k)| (d, k, csv, spec))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    let visual_features = match vlm {
        Some(v) => {
            let svg = document.svg.clone();
            let image = tokio::task::spawn_blocking(move || chart_image(&svg))
                .await
                .map_err(|e| ApiError::Internal(e.to_string()))?;
            fetch_visual_features(&image, v).await
        }
        None => None,
    };
    let record = ChartRecord {
        schema_version: RECORD_SCHEMA_VERSION,
        chart_id,
        dataset_digest: digest(&csv),
        created_at: now_millis(),
        data_description: data_description.filter(|d| !d.trim().is_empty()),
        visual_features,
        template_version: knowledge.template_version,
        prompts_version: prompts_version(),
        warnings: document.warnings.clone(),
        spec,
    };
    Ok(NewChart {
        record,
        dataset: csv,
        document,
        knowledge,
    })
}
