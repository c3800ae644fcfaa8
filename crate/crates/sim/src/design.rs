//! Reference library construction and codebook design for a scenario.

use secfmcw::ambiguity::{range_af, ReferenceAfLibrary};
use secfmcw::codebook::{
    enumerate_im_indices, parse_codebook_text, validate_codebook, CodebookDesigner, CombinedCodebook, DesignConfig,
    DesignOutcome, PhaseCodebook,
};
use secfmcw::waveform::{generate_chirp, ChirpParams, PhaseCode};

use crate::config::ScenarioConfig;
use crate::error::{SimError, SimResult};

/// The uncoded widest chirp at the band centre that codeword AFs are
/// evaluated on.
pub fn anchor_chirp(cfg: &ScenarioConfig, code_len: usize) -> SimResult<ChirpParams> {
    let band = cfg.band_plan()?;
    Ok(band.chirp(
        0.0,
        cfg.band.bw_max_hz,
        PhaseCode::zeros(code_len, cfg.codebook.order),
        cfg.band.chirp_duration_s,
    )?)
}

/// Ghost-ladder library of the scenario.
pub fn reference_library(cfg: &ScenarioConfig, anchor: &ChirpParams) -> SimResult<ReferenceAfLibrary> {
    let nominal = range_af(&generate_chirp(anchor)?.samples);
    let c = &cfg.codebook;
    Ok(ReferenceAfLibrary::ladder(
        &nominal,
        c.ghost_first_offset,
        c.library_size,
        c.ghost_amplitude,
        c.harmonic_amplitude,
    )?)
}

/// Designer settings derived from the scenario.
pub fn design_config(cfg: &ScenarioConfig, code_len: usize, size: usize) -> DesignConfig {
    DesignConfig {
        size,
        epsilon: cfg.codebook.epsilon,
        order: cfg.codebook.order,
        code_len,
        max_sweeps: cfg.codebook.max_sweeps,
        seed: secfmcw::rng::SeedStream::new(cfg.seed).child("codebook", code_len as u64).seed(),
    }
}

/// Runs the designer; the outcome may contain infeasible codewords.
pub fn run_designer(cfg: &ScenarioConfig, code_len: usize, size: usize) -> SimResult<(DesignOutcome, ReferenceAfLibrary)> {
    let anchor = anchor_chirp(cfg, code_len)?;
    let library = reference_library(cfg, &anchor)?;
    let outcome = CodebookDesigner::new(design_config(cfg, code_len, size), &library, &anchor)?.run()?;
    Ok((outcome, library))
}

/// Designed or loaded phase codebook with the library it was checked
/// against.
#[derive(Debug, Clone)]
pub struct ScenarioCodebook {
    pub phase: PhaseCodebook,
    pub library: ReferenceAfLibrary,
    pub combined: CombinedCodebook,
    pub objective_trace: Vec<f64>,
}

/// Loads `codebook.path` when set (re-validating it), otherwise designs the
/// configured codebook. Infeasible codewords are an error.
pub fn scenario_codebook(cfg: &ScenarioConfig) -> SimResult<ScenarioCodebook> {
    let c = &cfg.codebook;
    let anchor = anchor_chirp(cfg, c.code_len)?;
    let library = reference_library(cfg, &anchor)?;
    let (phase, trace) = match &c.path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
            let (header, rows) = parse_codebook_text(&text)?;
            if header.order != c.order || header.code_len != c.code_len {
                return Err(SimError::Validation(vec![format!(
                    "codebook file has M = {}, L = {}; configuration expects M = {}, L = {}",
                    header.order, header.code_len, c.order, c.code_len
                )]));
            }
            let cb = PhaseCodebook::from_rows(rows, &library, &anchor, header.epsilon, header.seed)?;
            let report = validate_codebook(&cb, &library, &anchor)?;
            if !report.is_valid() {
                return Err(SimError::Validation(report.violations));
            }
            (cb, Vec::new())
        }
        None => {
            let outcome = CodebookDesigner::new(design_config(cfg, c.code_len, c.size), &library, &anchor)?.run()?;
            if !outcome.infeasible.is_empty() {
                return Err(SimError::DesignFailed {
                    indices: outcome.infeasible,
                });
            }
            (outcome.codebook, outcome.objective_trace)
        }
    };
    let im = enumerate_im_indices(&cfg.band_plan()?)?;
    let combined = CombinedCodebook::new(im, phase.rows.clone())?;
    Ok(ScenarioCodebook {
        phase,
        library,
        combined,
        objective_trace: trace,
    })
}
